"""Exact geometry of flip-glued products of metric trees.

Instances are finite trees of pieces, each piece a product of a metric
tree with a height interval under the l1 metric, glued along marked
geodesics with the two factors swapped.  The package computes exact
distances, canonical quasi-geodesics, block decompositions of finite
graphs, and structure-preserving isomorphisms between instances, all
over rational arithmetic.
"""

__version__ = "0.1.0"

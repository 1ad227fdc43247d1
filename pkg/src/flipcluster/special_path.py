"""Canonical piecewise paths through bridge feet, with quality audits.

A special path between two points follows their support-to-support
geodesic in T.  Inside each intermediate piece it runs between the two
mark lines of the traversed walls, entering and leaving at the feet of
the bridge between those lines (the midpoint of their overlap when they
intersect).  End pieces project the endpoint onto the single mark line
instead.  Crossing heights are then forced by the flip rule: the height
carried into a piece is the mark parameter left behind in the previous
one.

The construction is canonical given the vertex geodesic, which is what
makes the inner segments of long paths independent of the endpoints.
Paths are never shorter than the exact distance, and the interest is in
how much longer they can get: verify_bilipschitz measures that ratio
over sampled pairs, including every contiguous sub-range of segments,
since those are again special paths between their own endpoints.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, NamedTuple

from .cluster import (
    Cluster,
    ClusterPoint,
    piece_distance,
    point_to_spec,
    transfer_across_wall,
)
from .distance_oracle import closest_support_pair, exact_distance
from .errors import SegmentOverflow
from .metric_tree import project_to_line
from .rational import format_rational


class PathSegment(NamedTuple):
    """One in-piece leg; entry and exit share the segment's vertex."""

    entry: ClusterPoint
    exit: ClusterPoint
    length: Fraction

    @property
    def vertex(self) -> int:
        return self.entry.vertex


class SpecialPath(NamedTuple):
    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    segments: tuple[PathSegment, ...]
    length: Fraction


def _segment(c: Cluster, y: ClusterPoint, z: ClusterPoint) -> PathSegment:
    return PathSegment(y, z, piece_distance(c, y.vertex, y, z))


def special_path(c: Cluster, x0: ClusterPoint, xn: ClusterPoint) -> SpecialPath:
    """Build the special path from x0 to xn.

    Wall endpoints have several supporting vertices; the pair minimizing
    the T-distance is used (ties to lower ids), so the path never starts
    with an avoidable crossing.

    Raises SegmentOverflow, tagged with the offending T-edge, when a
    projection or bridge foot with positive distance lands on a mark end
    that the piece tree continues past: a longer mark could move the
    foot, so the truncation is not innocent there.
    """
    sx = c.supports(x0)
    sy = c.supports(xn)
    common = sorted(set(sx) & set(sy))
    if common:
        v = common[0]
        y = ClusterPoint(v, *sx[v])
        z = ClusterPoint(v, *sy[v])
        seg = _segment(c, y, z)
        return SpecialPath((v,), (), (seg,), seg.length)

    a, b = closest_support_pair(c, sx, sy)
    verts, eids = c.tree.path(a, b)
    n = len(eids)
    p: list = [None] * (n + 1)
    q: list = [None] * (n + 1)

    p[0] = sx[verts[0]][0]
    try:
        q[0] = project_to_line(c.pieces[verts[0]].tree, p[0],
                               c.marks[(verts[0], eids[0])]).foot
    except SegmentOverflow as exc:
        raise SegmentOverflow(str(exc), edge=eids[0], param=exc.param) from exc
    q[n] = sy[verts[n]][0]
    try:
        p[n] = project_to_line(c.pieces[verts[n]].tree, q[n],
                               c.marks[(verts[n], eids[n - 1])]).foot
    except SegmentOverflow as exc:
        raise SegmentOverflow(str(exc), edge=eids[n - 1], param=exc.param) from exc

    for i in range(1, n):
        enter = c.marks[(verts[i], eids[i - 1])]
        leave = c.marks[(verts[i], eids[i])]
        rel = c.mark_relation(verts[i], eids[i - 1], eids[i])
        if rel[0] == "overlap":
            ov = rel[1]
            mid = (ov.lo1 + ov.hi1) / 2
            p[i] = enter.point_at(mid)
            q[i] = leave.point_at(ov.sigma * mid + ov.shift)
        else:
            br = rel[1]
            for line, param, eid in ((enter, br.param_p, eids[i - 1]),
                                     (leave, br.param_q, eids[i])):
                if br.gap > 0 and line.extendable_end(param):
                    raise SegmentOverflow(
                        f"bridge foot at parameter {param} hits an extendable"
                        f" mark end in piece {verts[i]}",
                        edge=eid, param=param,
                    )
            p[i], q[i] = br.p, br.q

    t: list = [None] * (n + 1)
    u: list = [None] * (n + 1)
    t[0] = sx[verts[0]][1]
    u[n] = sy[verts[n]][1]
    for i in range(n):
        u[i] = c.marks[(verts[i + 1], eids[i])].coord_of(p[i + 1])
        t[i + 1] = c.marks[(verts[i], eids[i])].coord_of(q[i])

    segments = []
    for i in range(n + 1):
        y = ClusterPoint(verts[i], p[i], t[i])
        z = ClusterPoint(verts[i], q[i], u[i])
        segments.append(_segment(c, y, z))
    for i in range(n):
        crossed = transfer_across_wall(c, eids[i], verts[i], segments[i].exit)
        if crossed != segments[i + 1].entry:
            raise AssertionError(
                f"segments {i} and {i + 1} fail to glue across edge {eids[i]}"
            )
    total = sum(s.length for s in segments)
    return SpecialPath(tuple(verts), tuple(eids), tuple(segments), total)


def path_length(sp: SpecialPath) -> Fraction:
    return sum((s.length for s in sp.segments), Fraction(0))


def middle_segments(sp: SpecialPath) -> list[PathSegment]:
    """Inner segments 2..n-2, which depend only on the vertex geodesic.

    Empty for paths through fewer than five pieces.
    """
    n = len(sp.segments) - 1
    if n < 4:
        return []
    return list(sp.segments[2:n - 1])


def subpath(sp: SpecialPath, i: int, j: int) -> SpecialPath:
    """Contiguous sub-range of segments i..j as a path in its own right."""
    if not 0 <= i <= j < len(sp.segments):
        raise IndexError(f"segment range {i}..{j} out of bounds")
    segs = sp.segments[i:j + 1]
    return SpecialPath(sp.vertices[i:j + 1], sp.edges[i:j],
                       segs, sum(s.length for s in segs))


def verify_bilipschitz(c: Cluster, pairs: Iterable[tuple[ClusterPoint, ClusterPoint]],
                       oracle: Callable = exact_distance) -> dict:
    """Largest path-length/distance ratio over pairs and their sub-ranges.

    Single segments are skipped: pieces embed isometrically, so their
    ratio is exactly 1.  A zero distance with zero length counts as
    ratio 1.  Pairs whose construction overflows a truncated mark are
    skipped and counted.
    """
    max_ratio = Fraction(1)
    attaining = None
    count = 0
    overflow = 0
    for x, y in pairs:
        try:
            sp = special_path(c, x, y)
        except SegmentOverflow:
            overflow += 1
            continue
        count += 1
        n = len(sp.segments) - 1
        for i in range(n + 1):
            for j in range(i, n + 1):
                if i == j:
                    continue
                sub = subpath(sp, i, j)
                d = oracle(c, sub.segments[0].entry, sub.segments[-1].exit)[0]
                if sub.length < d:
                    raise AssertionError(
                        f"path of length {sub.length} beats the distance {d}"
                    )
                if d == 0:
                    if sub.length != 0:
                        raise AssertionError(
                            f"positive length {sub.length} between coincident points"
                        )
                    continue
                ratio = sub.length / d
                if ratio > max_ratio:
                    max_ratio = ratio
                    attaining = (x, y)
    return {
        "pairs": count,
        "max_ratio": format_rational(max_ratio),
        "attaining_pair": None if attaining is None else
            [point_to_spec(attaining[0]), point_to_spec(attaining[1])],
        "overflow_count": overflow,
    }


def star_audit(c: Cluster, x0: ClusterPoint, xn: ClusterPoint
               ) -> list[tuple[Fraction, Fraction]]:
    """Per-piece vertical comparison of the path against the optimal profile.

    For each traversed piece, the path's vertical travel |t_i - u_i| is
    bounded by the optimal crossing's vertical leg plus the two height
    mismatches at the walls (entry heights t_0 and s_{i-1} coincide at
    i = 0, exit heights u_n and h_n at i = n).  Returns (lhs, rhs) pairs.
    """
    sp = special_path(c, x0, xn)
    value, prof = exact_distance(c, x0, xn)
    if prof.vertices != sp.vertices:
        raise AssertionError("path and oracle disagree on the vertex geodesic")
    n = len(sp.segments) - 1
    out = []
    for i in range(n + 1):
        t_i = sp.segments[i].entry.height
        u_i = sp.segments[i].exit.height
        s_prev = prof.s[i - 1] if i >= 1 else t_i
        h_i = prof.h[i] if i <= n - 1 else u_i
        lhs = abs(t_i - u_i)
        rhs = abs(s_prev - h_i) + abs(t_i - s_prev) + abs(h_i - u_i)
        out.append((lhs, rhs))
    return out

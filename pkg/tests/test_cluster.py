"""Instance validation, wall transfers, supports, and the JSON wire format."""

import random
from fractions import Fraction

import pytest

from flipcluster.cluster import (
    Cluster,
    ClusterPoint,
    Piece,
    SimplicialTree,
    bass_serre_distance,
    dumps,
    piece_distance,
    piece_distance_parts,
    supporting_vertices,
    to_spec,
    transfer_across_wall,
    validate,
)
from flipcluster.errors import (
    ClusterValidationError,
    InvalidPointError,
    NotOnLineError,
    SegmentOverflow,
)
from flipcluster.metric_tree import Line, MetricTree

F = Fraction


def two_piece_spec(range_hi="10", window=("-12", "12")):
    """Two segment pieces [-10, 10] glued along their full marks."""
    seg = {
        "tree_edges": [[0, 1, "20"]],
        "height_window": list(window),
    }
    mark = {"path": [0], "range": ["-10", range_hi], "origin": "-10", "orient": 1}
    return {
        "tree": {"vertices": [0, 1], "edges": [[0, 1]]},
        "pieces": {"0": dict(seg), "1": dict(seg)},
        "marks": {"0:0": dict(mark), "1:0": dict(mark)},
    }


def two_piece() -> Cluster:
    return validate(two_piece_spec())


def chain3() -> Cluster:
    """Three pieces along a path; the middle piece's marks share an edge."""
    t = SimplicialTree([0, 1, 2], [(0, 1), (1, 2)])
    z0 = MetricTree([(0, 1, 2), (1, 2, 3), (1, 3, 4)])
    z1 = MetricTree([(0, 1, 3), (0, 2, 5), (0, 3, 4)])
    z2 = MetricTree([(0, 1, 6)])
    pieces = {
        0: Piece(z0, (F(-1), F(9))),
        1: Piece(z1, (F(-3), F(6))),
        2: Piece(z2, (F(-4), F(5))),
    }
    marks = {
        (0, 0): Line(z0, [0, 1], 0, F(-2)),   # range [-2, 3]
        (1, 0): Line(z1, [0, 1], 1, F(0)),    # range [0, 8]
        (1, 1): Line(z1, [0, 2], 1, F(-3)),   # range [-3, 4]
        (2, 1): Line(z2, [0], 0, F(-1)),      # range [-1, 5]
    }
    return Cluster(t, pieces, marks)


class TestValidation:
    def test_single_vertex_no_edges(self):
        spec = {
            "tree": {"vertices": [0], "edges": []},
            "pieces": {"0": {"tree_edges": [[0, 1, "1"]], "height_window": ["0", "1"]}},
            "marks": {},
        }
        c = validate(spec)
        assert c.tree.vertices == (0,)
        assert c.marks == {}

    def test_two_piece_valid(self):
        c = two_piece()
        assert c.tree.edges == ((0, 1),)
        assert c.marks[(0, 0)].length == 20

    def test_window_range_mismatch(self):
        spec = two_piece_spec()
        spec["pieces"]["1"]["height_window"] = ["0", "5"]
        with pytest.raises(ClusterValidationError) as exc:
            validate(spec)
        codes = {p[0] for p in exc.value.problems}
        assert "window-range-mismatch" in codes
        assert any("edge 0" in p[1] for p in exc.value.problems)

    def test_rejects_noncanonical_rationals(self):
        for bad in ("5/10", "5/1", "5/0", "+3", "3.5"):
            spec = two_piece_spec()
            spec["pieces"]["0"]["height_window"] = [bad, "12"]
            with pytest.raises(ClusterValidationError):
                validate(spec)

    def test_rejects_origin_not_range_start(self):
        spec = two_piece_spec()
        spec["marks"]["0:0"]["origin"] = "0"
        with pytest.raises(ClusterValidationError) as exc:
            validate(spec)
        assert any(p[0] == "origin-mismatch" for p in exc.value.problems)

    def test_rejects_wrong_range_end(self):
        spec = two_piece_spec(range_hi="9")
        with pytest.raises(ClusterValidationError) as exc:
            validate(spec)
        assert any(p[0] == "range-length-mismatch" for p in exc.value.problems)

    def test_rejects_inconsistent_orient(self):
        c = chain3()
        spec = to_spec(c)
        assert spec["marks"]["0:0"]["orient"] == 1
        spec["marks"]["0:0"]["orient"] = -1
        with pytest.raises(ClusterValidationError) as exc:
            validate(spec)
        assert any(p[0] == "bad-orient" for p in exc.value.problems)

    def test_rejects_missing_mark_key(self):
        spec = two_piece_spec()
        del spec["marks"]["1:0"]
        with pytest.raises(ClusterValidationError):
            validate(spec)

    def test_chain3_roundtrip(self):
        c = chain3()
        spec = to_spec(c)
        c2 = validate(spec)
        assert to_spec(c2) == spec
        assert dumps(c2) == dumps(c)

    def test_two_piece_roundtrip_bytes(self):
        c = two_piece()
        again = validate(to_spec(c))
        assert dumps(again) == dumps(c)


class TestPointsAndSupports:
    def test_interior_point_single_support(self):
        c = two_piece()
        # height 11 exceeds the twin mark range [-10, 10]: not a wall point
        p = c.point(1, 0, F(3), F(11))
        assert supporting_vertices(c, p) == (1,)
        assert p.vertex == 1

    def test_wall_point_two_supports_canonical_at_lower(self):
        c = two_piece()
        p = c.point(1, 0, F(13), F(5))  # mark parameter 3, height 5
        assert supporting_vertices(c, p) == (0, 1)
        assert p.vertex == 0  # canonicalized across the wall
        assert p.height == F(3)
        assert c.marks[(0, 0)].coord_of(p.horizontal) == F(5)

    def test_point_rejects_bad_height(self):
        c = two_piece()
        with pytest.raises(InvalidPointError):
            c.point(0, 0, F(1), F(13))

    def test_represent_at_both_sides(self):
        c = two_piece()
        p = c.point(0, 0, F(13), F(5))
        r1 = c.represent_at(p, 1)
        assert r1.vertex == 1
        assert c.represent_at(p, 0) == p
        with pytest.raises(InvalidPointError):
            c.represent_at(c.point(0, 0, F(1), F(11)), 1)

    def test_same_point_across_representations(self):
        c = two_piece()
        a = ClusterPoint(0, c.pieces[0].tree.point(0, F(13)), F(5))
        b = transfer_across_wall(c, 0, 0, a)
        assert c.same_point(a, b)


class TestTransfer:
    def test_flip_swaps_coordinates(self):
        c = two_piece()
        # mark parameter 3, height 5 on the 0 side
        pt = ClusterPoint(0, c.pieces[0].tree.point(0, F(13)), F(5))
        out = transfer_across_wall(c, 0, 0, pt)
        assert out.vertex == 1
        assert c.marks[(1, 0)].coord_of(out.horizontal) == F(5)
        assert out.height == F(3)

    def test_origin_fixed(self):
        c = two_piece()
        pt = ClusterPoint(0, c.pieces[0].tree.point(0, F(10)), F(0))  # (t, u) = (0, 0)
        out = transfer_across_wall(c, 0, 0, pt)
        assert c.marks[(1, 0)].coord_of(out.horizontal) == F(0)
        assert out.height == F(0)

    def test_involution_on_random_wall_points(self):
        c = chain3()
        rng = random.Random(7)
        for _ in range(100):
            eid = rng.choice([0, 1])
            v, w = c.tree.edges[eid]
            line = c.marks[(v, eid)]
            twin = c.marks[(w, eid)]
            t = line.lo + (line.hi - line.lo) * F(rng.randrange(0, 17), 16)
            u = twin.lo + (twin.hi - twin.lo) * F(rng.randrange(0, 17), 16)
            pt = ClusterPoint(v, line.point_at(t), u)
            there = transfer_across_wall(c, eid, v, pt)
            back = transfer_across_wall(c, eid, w, there)
            assert back == pt

    def test_transfer_requires_wall_membership(self):
        c = chain3()
        off_wall = ClusterPoint(0, c.pieces[0].tree.point(2, F(1)), F(0))
        with pytest.raises(NotOnLineError):
            transfer_across_wall(c, 0, 0, off_wall)

    def test_transfer_overflow_outside_twin_range(self):
        c = two_piece()
        pt = ClusterPoint(0, c.pieces[0].tree.point(0, F(13)), F(11))
        with pytest.raises(SegmentOverflow) as exc:
            transfer_across_wall(c, 0, 0, pt)
        assert exc.value.edge == 0


class TestPieceDistance:
    def test_zero(self):
        c = two_piece()
        p = c.point(0, 0, F(3), F(1))
        assert piece_distance(c, 0, p, p) == 0

    def test_pure_vertical(self):
        c = two_piece()
        a = c.point(0, 0, F(3), F(2))
        b = c.point(0, 0, F(3), F(9))
        assert piece_distance(c, 0, a, b) == 7

    def test_l1_sum(self):
        c = two_piece()
        a = c.point(0, 0, F(3), F(2))
        b = c.point(0, 0, F(7), F(5))
        assert piece_distance(c, 0, a, b) == 7
        assert piece_distance_parts(c, 0, a, b) == (F(4), F(3))

    def test_wall_pair_parts_swap_across_transfer(self):
        c = chain3()
        rng = random.Random(11)
        line = c.marks[(1, 0)]
        twin = c.marks[(0, 0)]
        for _ in range(40):
            t1 = line.lo + line.length * F(rng.randrange(0, 9), 8)
            t2 = line.lo + line.length * F(rng.randrange(0, 9), 8)
            u1 = twin.lo + twin.length * F(rng.randrange(0, 9), 8)
            u2 = twin.lo + twin.length * F(rng.randrange(0, 9), 8)
            a = ClusterPoint(1, line.point_at(t1), u1)
            b = ClusterPoint(1, line.point_at(t2), u2)
            dh, dv = piece_distance_parts(c, 1, a, b)
            assert (dh, dv) == (abs(t1 - t2), abs(u1 - u2))
            dh2, dv2 = piece_distance_parts(c, 0, a, b)
            assert (dh2, dv2) == (dv, dh)

    def test_requires_membership(self):
        c = two_piece()
        far = c.point(1, 0, F(3), F(11))
        near = c.point(0, 0, F(3), F(1))
        with pytest.raises(InvalidPointError):
            piece_distance(c, 0, far, near)


class TestBassSerre:
    def test_same_piece(self):
        c = chain3()
        a = c.point(1, 1, F(1), F(6))
        b = c.point(1, 2, F(1), F(6))
        assert bass_serre_distance(c, a, b) == 0

    def test_adjacent_interiors(self):
        c = chain3()
        a = c.point(0, 2, F(2), F(9))    # off both marks of piece 0
        b = c.point(1, 2, F(1), F(6))    # height 6 not transferable anywhere
        assert bass_serre_distance(c, a, b) == 1

    def test_wall_point_counts_for_both(self):
        c = two_piece()
        wall = c.point(0, 0, F(13), F(5))
        interior = c.point(1, 0, F(3), F(11))
        assert bass_serre_distance(c, wall, interior) == 0

    def test_pseudo_metric_samples(self):
        c = chain3()
        rng = random.Random(3)
        pts = []
        for _ in range(12):
            v = rng.choice([0, 1, 2])
            tree = c.pieces[v].tree
            eid = rng.randrange(len(tree.edges))
            off = tree.edges[eid].length * F(rng.randrange(0, 9), 8)
            lo, hi = c.pieces[v].window
            h = lo + (hi - lo) * F(rng.randrange(0, 9), 8)
            pts.append(c.point(v, eid, off, h))
        for x in pts:
            for y in pts:
                for z in pts:
                    dxz = bass_serre_distance(c, x, z)
                    dyz = bass_serre_distance(c, y, z)
                    dxy = bass_serre_distance(c, x, y)
                    assert abs(dxz - dyz) <= dxy + 1

"""Glued products of metric trees along flipped walls.

An instance is a finite simplicial tree T whose vertices carry pieces
Q_v = Z_v x W_v: a finite metric tree Z_v times a rational height window
W_v, metrized by the l1 sum.  Every T-edge e = (v, w) carries one
geodesic mark line in each endpoint piece; the wall of e is the set
mark(v,e) x W glued to mark(w,e) x W by swapping the two coordinates:

    (mark(v,e)(t), u)  ~  (mark(w,e)(u), t)

Validation enforces the window/range compatibility that makes every such
identification total: the parameter range of mark(v,e) must fit inside
the height window of w, and vice versa.  Under that rule every wall
point transfers, transfer is an involution, and each piece embeds
isometrically in the glued space.

Points are canonicalized at their lowest supporting vertex so that
structural equality is geometric equality.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, NamedTuple

from .errors import ClusterValidationError, InvalidPointError, SegmentOverflow
from .jsonutil import dumps_canonical
from .metric_tree import Line, MetricTree, TreePoint, bridge_raw, line_intersection
from .rational import format_rational, parse_rational


class SimplicialTree:
    """The finite tree indexing the pieces; edges are unit, ids positional."""

    def __init__(self, vertices: Iterable[int], edges: Iterable[tuple[int, int]]):
        self.vertices: tuple[int, ...] = tuple(int(v) for v in vertices)
        self.edges: tuple[tuple[int, int], ...] = tuple((int(a), int(b)) for a, b in edges)
        vs = set(self.vertices)
        if not vs:
            raise ValueError("tree needs at least one vertex")
        if len(vs) != len(self.vertices):
            raise ValueError("duplicate vertex ids")
        seen_pairs = set()
        adj: dict[int, list[tuple[int, int]]] = {v: [] for v in self.vertices}
        for i, (a, b) in enumerate(self.edges):
            if a == b:
                raise ValueError(f"edge {i} is a self-loop")
            if a not in vs or b not in vs:
                raise ValueError(f"edge {i} references a missing vertex")
            key = (min(a, b), max(a, b))
            if key in seen_pairs:
                raise ValueError(f"edge {i} duplicates {key}")
            seen_pairs.add(key)
            adj[a].append((i, b))
            adj[b].append((i, a))
        self._adj = {v: tuple(sorted(n)) for v, n in adj.items()}
        if len(self.edges) != len(self.vertices) - 1:
            raise ValueError("vertex/edge counts do not form a tree")
        root = self.vertices[0]
        seen = {root}
        stack = [root]
        while stack:
            v = stack.pop()
            for _, w in self._adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != len(self.vertices):
            raise ValueError("tree is not connected")
        # hop counts and first-edge routing from every vertex
        self._dist: dict[int, dict[int, int]] = {}
        self._first: dict[int, dict[int, int]] = {}
        for r in self.vertices:
            d = {r: 0}
            f: dict[int, int] = {}
            stack = [r]
            while stack:
                v = stack.pop()
                for eid, w in self._adj[v]:
                    if w not in d:
                        d[w] = d[v] + 1
                        f[w] = eid if v == r else f[v]
                        stack.append(w)
            self._dist[r] = d
            self._first[r] = f

    def neighbors(self, v: int) -> tuple[tuple[int, int], ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def edge_endpoints(self, eid: int) -> tuple[int, int]:
        return self.edges[eid]

    def other_end(self, eid: int, v: int) -> int:
        a, b = self.edges[eid]
        if v == a:
            return b
        if v == b:
            return a
        raise ValueError(f"vertex {v} not on edge {eid}")

    def distance(self, u: int, v: int) -> int:
        return self._dist[u][v]

    def path(self, u: int, v: int) -> tuple[list[int], list[int]]:
        """(vertex sequence u..v, edge ids between them)."""
        verts = [u]
        eids = []
        cur = u
        while cur != v:
            eid = self._first[cur][v]
            eids.append(eid)
            cur = self.other_end(eid, cur)
            verts.append(cur)
        return verts, eids


class Piece(NamedTuple):
    tree: MetricTree
    window: tuple[Fraction, Fraction]


class ClusterPoint(NamedTuple):
    vertex: int
    horizontal: TreePoint
    height: Fraction


class Cluster:
    """Immutable glued space; construct via :func:`validate` for full checks."""

    def __init__(self, tree: SimplicialTree, pieces: dict[int, Piece],
                 marks: dict[tuple[int, int], Line]):
        self.tree = tree
        self.pieces = dict(pieces)
        self.marks = dict(marks)
        self._relations: dict[tuple[int, int, int], tuple] = {}
        problems = self._check()
        if problems:
            raise ClusterValidationError(problems)

    def _check(self) -> list[tuple[str, str, str]]:
        problems = []
        for v in self.tree.vertices:
            if v not in self.pieces:
                problems.append(("missing-piece", f"vertex {v}", "no piece assigned"))
                continue
            lo, hi = self.pieces[v].window
            if lo >= hi:
                problems.append(
                    ("empty-window", f"vertex {v}", f"height window [{lo}, {hi}] is empty")
                )
        for v in self.pieces:
            if v not in set(self.tree.vertices):
                problems.append(("orphan-piece", f"vertex {v}", "piece for a missing vertex"))
        for eid, (a, b) in enumerate(self.tree.edges):
            for v in (a, b):
                if (v, eid) not in self.marks:
                    problems.append(
                        ("missing-mark", f"edge {eid} at vertex {v}", "no mark line")
                    )
        for (v, eid), line in self.marks.items():
            if eid >= len(self.tree.edges) or v not in (self.tree.edges[eid]):
                problems.append(
                    ("dangling-mark", f"mark {v}:{eid}", "edge not incident to vertex")
                )
                continue
            if v in self.pieces and line.tree is not self.pieces[v].tree:
                problems.append(
                    ("foreign-line", f"mark {v}:{eid}", "line lives in another piece's tree")
                )
        if problems:
            return problems
        # flip totality: each side's parameter range must fit in the
        # other side's height window, else some wall points cannot transfer
        for eid, (a, b) in enumerate(self.tree.edges):
            for v, w in ((a, b), (b, a)):
                line = self.marks[(v, eid)]
                wlo, whi = self.pieces[w].window
                if line.lo < wlo or line.hi > whi:
                    problems.append(
                        (
                            "window-range-mismatch",
                            f"edge {eid}",
                            f"mark {v}:{eid} range [{line.lo}, {line.hi}] exceeds "
                            f"window [{wlo}, {whi}] of vertex {w}",
                        )
                    )
        return problems

    # -- points --------------------------------------------------------------

    def point(self, v: int, edge: int, offset, height) -> ClusterPoint:
        """Build and canonicalize a point from raw coordinates."""
        if v not in self.pieces:
            raise InvalidPointError(f"no piece at vertex {v}")
        piece = self.pieces[v]
        horizontal = piece.tree.point(edge, Fraction(offset))
        height = Fraction(height)
        lo, hi = piece.window
        if height < lo or height > hi:
            raise InvalidPointError(
                f"height {height} outside window [{lo}, {hi}] at vertex {v}"
            )
        return self.canonical(ClusterPoint(v, horizontal, height))

    def _wall_steps(self, v: int, horizontal: TreePoint, height: Fraction):
        """One-wall transfers available from a representation in Q_v."""
        for eid, w in self.tree.neighbors(v):
            line = self.marks[(v, eid)]
            if not line.contains(horizontal):
                continue
            twin = self.marks[(w, eid)]
            if not twin.lo <= height <= twin.hi:
                continue
            t = line.coord_of(horizontal)
            yield eid, w, twin.point_at(height), t

    def supports(self, pt: ClusterPoint) -> dict[int, tuple[TreePoint, Fraction]]:
        """Every vertex whose piece contains the point, with its representation.

        Wall membership propagates: a point on several walls of one piece
        belongs to every neighbor across those walls, so the support set is
        found by walking transfers until closure.  It is always a subtree
        of T.
        """
        reps = {pt.vertex: (pt.horizontal, pt.height)}
        stack = [pt.vertex]
        while stack:
            v = stack.pop()
            h, u = reps[v]
            for _eid, w, h2, u2 in self._wall_steps(v, h, u):
                if w not in reps:
                    reps[w] = (h2, u2)
                    stack.append(w)
        return reps

    def canonical(self, pt: ClusterPoint) -> ClusterPoint:
        reps = self.supports(pt)
        v = min(reps)
        h, u = reps[v]
        return ClusterPoint(v, h, u)

    def represent_at(self, pt: ClusterPoint, v: int) -> ClusterPoint:
        reps = self.supports(pt)
        if v not in reps:
            raise InvalidPointError(f"point not in the piece of vertex {v}")
        h, u = reps[v]
        return ClusterPoint(v, h, u)

    def same_point(self, a: ClusterPoint, b: ClusterPoint) -> bool:
        return self.canonical(a) == self.canonical(b)

    # -- relations between marks (used by path and distance code) -------------

    def mark_relation(self, v: int, e1: int, e2: int):
        """How two mark lines of one piece sit relative to each other.

        Returns ("overlap", Overlap) for intersecting carriers, else
        ("disjoint", Bridge).  Computed without overflow guards; callers
        that care about truncated ends must check them.
        """
        key = (v, e1, e2)
        if key in self._relations:
            return self._relations[key]
        l1 = self.marks[(v, e1)]
        l2 = self.marks[(v, e2)]
        ov = line_intersection(l1, l2)
        if ov is not None:
            rel = ("overlap", ov)
        else:
            rel = ("disjoint", bridge_raw(self.pieces[v].tree, l1, l2))
        self._relations[key] = rel
        return rel


# -- module-level operations ---------------------------------------------------


def transfer_across_wall(c: Cluster, eid: int, v: int, pt: ClusterPoint) -> ClusterPoint:
    """Re-express a wall point of edge eid on the other side.

    The result is the representation at the neighbor vertex, not the
    canonical form; transferring back returns the input exactly.
    """
    if pt.vertex != v:
        raise InvalidPointError(f"point is represented at {pt.vertex}, not {v}")
    w = c.tree.other_end(eid, v)
    line = c.marks[(v, eid)]
    t = line.coord_of(pt.horizontal)  # NotOnLineError if off the wall
    twin = c.marks[(w, eid)]
    if not twin.lo <= pt.height <= twin.hi:
        raise SegmentOverflow(
            f"height {pt.height} outside the twin mark range "
            f"[{twin.lo}, {twin.hi}] on edge {eid}",
            edge=eid,
            param=pt.height,
        )
    return ClusterPoint(w, twin.point_at(pt.height), t)


def piece_distance_parts(c: Cluster, v: int, x: ClusterPoint, y: ClusterPoint
                         ) -> tuple[Fraction, Fraction]:
    """(horizontal, vertical) summands of the l1 distance inside Q_v."""
    rx = c.represent_at(x, v)
    ry = c.represent_at(y, v)
    dh = c.pieces[v].tree.distance(rx.horizontal, ry.horizontal)
    dv = abs(rx.height - ry.height)
    return dh, dv


def piece_distance(c: Cluster, v: int, x: ClusterPoint, y: ClusterPoint) -> Fraction:
    dh, dv = piece_distance_parts(c, v, x, y)
    return dh + dv


def supporting_vertices(c: Cluster, x: ClusterPoint) -> tuple[int, ...]:
    return tuple(sorted(c.supports(x)))


def bass_serre_distance(c: Cluster, x: ClusterPoint, y: ClusterPoint) -> int:
    sx = c.supports(x)
    sy = c.supports(y)
    return min(c.tree.distance(a, b) for a in sx for b in sy)


# -- serialization ---------------------------------------------------------------


def _mark_key(v: int, eid: int) -> str:
    return f"{v}:{eid}"


def validate(spec: dict) -> Cluster:
    """Parse and fully check an instance dict (the JSON wire format)."""
    problems: list[tuple[str, str, str]] = []

    def fail():
        raise ClusterValidationError(problems)

    if not isinstance(spec, dict) or set(spec) != {"tree", "pieces", "marks"}:
        problems.append(("schema", "top level",
                         'expected exactly the keys "tree", "pieces", "marks"'))
        fail()
    tree_spec = spec["tree"]
    if not isinstance(tree_spec, dict) or set(tree_spec) != {"vertices", "edges"}:
        problems.append(("schema", "tree", 'expected keys "vertices", "edges"'))
        fail()
    try:
        tree = SimplicialTree(tree_spec["vertices"], tree_spec["edges"])
    except (ValueError, TypeError) as ex:
        problems.append(("bad-tree", "tree", str(ex)))
        fail()

    pieces: dict[int, Piece] = {}
    piece_spec = spec["pieces"]
    if not isinstance(piece_spec, dict):
        problems.append(("schema", "pieces", "expected an object"))
        fail()
    expected = {str(v) for v in tree.vertices}
    if set(piece_spec) != expected:
        problems.append(
            ("schema", "pieces",
             f"piece keys {sorted(piece_spec)} do not match tree vertices")
        )
        fail()
    for v in tree.vertices:
        entry = piece_spec[str(v)]
        ctx = f"piece {v}"
        if not isinstance(entry, dict) or set(entry) != {"tree_edges", "height_window"}:
            problems.append(("schema", ctx, 'expected keys "tree_edges", "height_window"'))
            continue
        try:
            edges = [(a, b, parse_rational(ln)) for a, b, ln in entry["tree_edges"]]
            ztree = MetricTree(edges)
        except (ValueError, TypeError) as ex:
            problems.append(("bad-piece-tree", ctx, str(ex)))
            continue
        try:
            lo, hi = (parse_rational(s) for s in entry["height_window"])
        except (ValueError, TypeError) as ex:
            problems.append(("bad-window", ctx, str(ex)))
            continue
        pieces[v] = Piece(ztree, (lo, hi))
    if problems:
        fail()

    marks: dict[tuple[int, int], Line] = {}
    mark_spec = spec["marks"]
    if not isinstance(mark_spec, dict):
        problems.append(("schema", "marks", "expected an object"))
        fail()
    expected_keys = {
        _mark_key(v, eid)
        for eid, (a, b) in enumerate(tree.edges)
        for v in (a, b)
    }
    if set(mark_spec) != expected_keys:
        problems.append(
            ("schema", "marks",
             f"mark keys do not match tree incidences (want {sorted(expected_keys)})")
        )
        fail()
    for key in sorted(mark_spec):
        entry = mark_spec[key]
        ctx = f"mark {key}"
        v_str, e_str = key.split(":")
        v, eid = int(v_str), int(e_str)
        if not isinstance(entry, dict) or set(entry) != {"path", "range", "origin", "orient"}:
            problems.append(
                ("schema", ctx, 'expected keys "path", "range", "origin", "orient"')
            )
            continue
        ztree = pieces[v].tree
        try:
            lo, hi = (parse_rational(s) for s in entry["range"])
            origin = parse_rational(entry["origin"])
        except (ValueError, TypeError) as ex:
            problems.append(("bad-rational", ctx, str(ex)))
            continue
        if origin != lo:
            problems.append(
                ("origin-mismatch", ctx, f"origin {origin} must equal range start {lo}")
            )
            continue
        path = entry["path"]
        orient = entry["orient"]
        if orient not in (1, -1):
            problems.append(("bad-orient", ctx, f"orient must be 1 or -1, got {orient!r}"))
            continue
        try:
            start = _walk_start(ztree, path, orient, ctx, problems)
            if start is None:
                continue
            line = Line(ztree, path, start, lo)
        except (ValueError, TypeError) as ex:
            problems.append(("bad-line", ctx, str(ex)))
            continue
        if line.hi != hi:
            problems.append(
                ("range-length-mismatch", ctx,
                 f"range end {hi} does not match carrier length (expected {line.hi})")
            )
            continue
        marks[(v, eid)] = line
    if problems:
        fail()

    return Cluster(tree, pieces, marks)


def _walk_start(ztree: MetricTree, path, orient: int, ctx: str, problems) -> int | None:
    if not isinstance(path, list) or not path:
        problems.append(("bad-line", ctx, "path must be a non-empty edge id list"))
        return None
    first = ztree.edges[path[0]] if 0 <= path[0] < len(ztree.edges) else None
    if first is None:
        problems.append(("bad-line", ctx, f"path references missing edge {path[0]}"))
        return None
    if len(path) == 1:
        return first.a if orient == 1 else first.b
    second = ztree.edges[path[1]] if 0 <= path[1] < len(ztree.edges) else None
    if second is None:
        problems.append(("bad-line", ctx, f"path references missing edge {path[1]}"))
        return None
    shared = {first.a, first.b} & {second.a, second.b}
    if len(shared) != 1:
        problems.append(("bad-line", ctx, "first two path edges do not chain"))
        return None
    start = (first.a if first.b in shared else first.b)
    derived = 1 if start == first.a else -1
    if derived != orient:
        problems.append(
            ("bad-orient", ctx, f"orient {orient} contradicts the edge walk ({derived})")
        )
        return None
    return start


def to_spec(c: Cluster) -> dict:
    """The JSON wire form; key order is deterministic for byte-exact dumps."""
    tree = {
        "vertices": list(c.tree.vertices),
        "edges": [list(e) for e in c.tree.edges],
    }
    pieces = {}
    for v in sorted(c.pieces):
        ztree, (lo, hi) = c.pieces[v]
        pieces[str(v)] = {
            "tree_edges": [[e.a, e.b, format_rational(e.length)] for e in ztree.edges],
            "height_window": [format_rational(lo), format_rational(hi)],
        }
    marks = {}
    for v, eid in sorted(c.marks):
        line = c.marks[(v, eid)]
        first = line.tree.edges[line.edge_path[0]]
        marks[_mark_key(v, eid)] = {
            "path": list(line.edge_path),
            "range": [format_rational(line.lo), format_rational(line.hi)],
            "origin": format_rational(line.lo),
            "orient": 1 if line.start_vertex == first.a else -1,
        }
    return {"tree": tree, "pieces": pieces, "marks": marks}


def dumps(c: Cluster) -> str:
    return dumps_canonical(to_spec(c))


def point_to_spec(pt: ClusterPoint) -> dict:
    """JSON shape of a point: piece vertex, edge id, offset, height."""
    return {
        "vertex": pt.vertex,
        "edge": pt.horizontal.edge,
        "offset": format_rational(pt.horizontal.offset),
        "height": format_rational(pt.height),
    }


def point_of_spec(c: Cluster, spec: dict) -> ClusterPoint:
    return c.point(
        spec["vertex"],
        spec["edge"],
        parse_rational(spec["offset"]),
        parse_rational(spec["height"]),
    )

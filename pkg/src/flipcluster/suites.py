"""Verification suites over generated corpora, reported as JSON.

Each suite regenerates its corpus from the configured seed (instance
seeds are derived arithmetically, so a failure's index pins its input),
runs exact checks, and returns counters plus up to three minimal
reproductions: instance JSON, operation, inputs.  Reports are built with
canonical key order; the only nondeterministic fields are the timing
ones, which consumers strip before comparing runs.  Everything executes
sequentially; instance order is the merge order.
"""

from __future__ import annotations

import itertools
import random
import time
from fractions import Fraction

from .cluster import dumps, piece_distance, point_to_spec, to_spec
from .cluster_iso import brute_force_iso, isomorphic, point_image, verify_good
from .distance_oracle import DiscretizedOracle, default_eps, exact_distance
from .errors import SizeCapError
from .generator import (
    GeneratorParams,
    generate_cluster,
    mutated_pair,
    planted_pair,
    random_graph_spec,
    sample_points,
    shrink_edge,
)
from .jsonutil import dumps_canonical
from .rational import format_rational, parse_rational
from .special_path import special_path, star_audit, subpath
from .tree_graded import blocks, check_T1_T2, cut_points, graph_of_spec

SCHEMA_VERSION = 1
SUITE_NAMES = (
    "metric-axioms",
    "bilipschitz",
    "oracle-agreement",
    "remark-nice",
    "tree-graded",
    "isomorphism",
)
MAX_REPROS = 3

# desk-scale defaults; the acceptance run overrides these from its config
DESK_SIZES = {
    "metric-axioms": {"instances": 30, "triples": 10, "pool": 6},
    "bilipschitz": {"instances": 30, "pairs": 10, "subpath_pairs": 3},
    "oracle-agreement": {"instances": 8, "pairs": 5, "cap": 200_000},
    "remark-nice": {"instances": 10},
    "tree-graded": {"graphs": 50, "max_vertices": 8},
    "isomorphism": {"pairs": 20, "spot_checks": 20},
}

CORPUS = GeneratorParams(seed=0, tree_size=(1, 8), piece_edges=(1, 40))
ORACLE_CORPUS = GeneratorParams(seed=0, tree_size=(1, 3), piece_edges=(1, 3),
                                edge_length=(Fraction(1), Fraction(2)),
                                max_denominator=2)
ISO_CORPUS = GeneratorParams(seed=0, tree_size=(1, 4), piece_edges=(1, 8))


def _instance_seed(base: int, index: int) -> int:
    return base * 100_003 + index


def _params(template: GeneratorParams, seed: int, **overrides) -> GeneratorParams:
    fields = {
        "seed": seed,
        "tree_size": template.tree_size,
        "piece_edges": template.piece_edges,
        "edge_length": template.edge_length,
        "max_denominator": template.max_denominator,
        "slack": template.slack,
        "tree_shape": template.tree_shape,
    }
    fields.update(overrides)
    return GeneratorParams(**fields)


class _Recorder:
    def __init__(self):
        self.failures: list[dict] = []
        self.count = 0

    def fail(self, instance_json: str, op: str, inputs, detail: str):
        self.count += 1
        if len(self.failures) < MAX_REPROS:
            self.failures.append({
                "instance": instance_json,
                "op": op,
                "inputs": inputs,
                "detail": detail,
            })


def _floor_point_in(c, rng, v):
    """Random horizontal at the window floor; generated windows keep the
    floor strictly below every twin range, so the support is unique."""
    tree = c.pieces[v].tree
    eid = rng.randrange(len(tree.edges))
    off = tree.edges[eid].length * Fraction(rng.randint(0, 8), 8)
    return c.point(v, eid, off, c.pieces[v].window[0])


def suite_metric_axioms(seed: int, sizes: dict) -> dict:
    rec = _Recorder()
    triples_run = 0
    for i in range(sizes["instances"]):
        params = _params(CORPUS, _instance_seed(seed, i))
        c = generate_cluster(params)
        rng = random.Random(params.seed + 1)
        pool = sample_points(c, rng, sizes["pool"])
        cache: dict[tuple[int, int], Fraction] = {}
        for a, b in itertools.permutations(range(len(pool)), 2):
            cache[(a, b)] = exact_distance(c, pool[a], pool[b])[0]
        for a in range(len(pool)):
            cache[(a, a)] = exact_distance(c, pool[a], pool[a])[0]
            if cache[(a, a)] != 0:
                rec.fail(dumps(c), "exact_distance",
                         [point_to_spec(pool[a])] * 2, "nonzero self distance")
        for a, b in itertools.combinations(range(len(pool)), 2):
            if cache[(a, b)] != cache[(b, a)]:
                rec.fail(dumps(c), "exact_distance",
                         [point_to_spec(pool[a]), point_to_spec(pool[b])],
                         "asymmetric distance")
            if cache[(a, b)] < 0:
                rec.fail(dumps(c), "exact_distance",
                         [point_to_spec(pool[a]), point_to_spec(pool[b])],
                         "negative distance")
            if cache[(a, b)] == 0 and not c.same_point(pool[a], pool[b]):
                rec.fail(dumps(c), "exact_distance",
                         [point_to_spec(pool[a]), point_to_spec(pool[b])],
                         "zero distance between distinct points")
        combos = list(itertools.combinations(range(len(pool)), 3))
        rng.shuffle(combos)
        for a, b, k in combos[:sizes["triples"]]:
            triples_run += 1
            if cache[(a, b)] > cache[(a, k)] + cache[(k, b)]:
                rec.fail(dumps(c), "exact_distance",
                         [point_to_spec(pool[x]) for x in (a, b, k)],
                         "triangle inequality violated")
    return {
        "pass": rec.count == 0,
        "counters": {"instances": sizes["instances"], "triples": triples_run,
                     "violations": rec.count},
        "failures": rec.failures,
    }


def suite_bilipschitz(seed: int, sizes: dict, k_obs: str | None) -> dict:
    rec = _Recorder()
    max_ratio = Fraction(0)
    attaining = None
    star_checked = pairs_run = subpaths_run = 0
    for i in range(sizes["instances"]):
        params = _params(CORPUS, _instance_seed(seed, i))
        c = generate_cluster(params)
        rng = random.Random(params.seed + 2)
        pts = sample_points(c, rng, 2 * sizes["pairs"])
        for j in range(sizes["pairs"]):
            x, y = pts[2 * j], pts[2 * j + 1]
            pairs_run += 1
            d = exact_distance(c, x, y)[0]
            sp = special_path(c, x, y)
            if sp.length < d:
                rec.fail(dumps(c), "special_path",
                         [point_to_spec(x), point_to_spec(y)],
                         "path shorter than the distance")
            if d == 0:
                if sp.length != 0:
                    rec.fail(dumps(c), "special_path",
                             [point_to_spec(x), point_to_spec(y)],
                             "positive length at distance zero")
            elif sp.length / d > max_ratio:
                max_ratio = sp.length / d
                attaining = [point_to_spec(x), point_to_spec(y)]
            for lhs, rhs in star_audit(c, x, y):
                star_checked += 1
                if lhs > rhs:
                    rec.fail(dumps(c), "star_audit",
                             [point_to_spec(x), point_to_spec(y)],
                             f"triangle chain violated: {lhs} > {rhs}")
            if j >= sizes["subpath_pairs"]:
                continue
            n = len(sp.segments) - 1
            for lo, hi in itertools.combinations_with_replacement(range(n + 1), 2):
                sub = subpath(sp, lo, hi)
                a = sub.segments[0].entry
                b = sub.segments[-1].exit
                dsub = exact_distance(c, a, b)[0]
                subpaths_run += 1
                if sub.length < dsub:
                    rec.fail(dumps(c), "subpath",
                             [point_to_spec(a), point_to_spec(b)],
                             "sub-path shorter than the distance")
                elif dsub == 0:
                    if sub.length != 0:
                        rec.fail(dumps(c), "subpath",
                                 [point_to_spec(a), point_to_spec(b)],
                                 "positive sub-path at distance zero")
                elif sub.length / dsub > max_ratio:
                    max_ratio = sub.length / dsub
                    attaining = [point_to_spec(a), point_to_spec(b)]
    if k_obs is not None and max_ratio > parse_rational(k_obs):
        rec.count += 1
        rec.failures.append({
            "instance": None,
            "op": "bilipschitz-bound",
            "inputs": attaining,
            "detail": f"observed ratio {format_rational(max_ratio)} exceeds {k_obs}",
        })
    return {
        "pass": rec.count == 0,
        "counters": {
            "instances": sizes["instances"],
            "pairs": pairs_run,
            "subpaths": subpaths_run,
            "star_terms": star_checked,
            "max_ratio": format_rational(max_ratio),
            "attaining_pair": attaining,
        },
        "failures": rec.failures,
    }


def suite_oracle_agreement(seed: int, sizes: dict) -> dict:
    rec = _Recorder()
    histogram = {str(k): 0 for k in range(5)}
    pairs_run = 0
    for i in range(sizes["instances"]):
        params = _params(ORACLE_CORPUS, _instance_seed(seed, i))
        c = generate_cluster(params)
        eps = default_eps(c)
        try:
            oracle = DiscretizedOracle(c, eps, cap=sizes["cap"])
        except SizeCapError as ex:
            rec.fail(dumps(c), "DiscretizedOracle",
                     [format_rational(eps)], str(ex))
            continue
        rng = random.Random(params.seed + 3)
        pts = sample_points(c, rng, 2 * sizes["pairs"])
        for j in range(sizes["pairs"]):
            x, y = pts[2 * j], pts[2 * j + 1]
            pairs_run += 1
            exact, profile = exact_distance(c, x, y)
            approx = oracle.distance(x, y)
            crossings = len(profile.edges)
            bound = 4 * eps * (crossings + 1)
            if not exact <= approx <= exact + bound:
                rec.fail(dumps(c), "discretized_distance",
                         [point_to_spec(x), point_to_spec(y),
                          format_rational(eps)],
                         f"deviation {format_rational(approx - exact)} "
                         f"outside [0, {format_rational(bound)}]")
                continue
            ratio = (approx - exact) / (eps * (crossings + 1))
            histogram[str(min(int(ratio), 4))] += 1
    return {
        "pass": rec.count == 0,
        "counters": {"instances": sizes["instances"], "pairs": pairs_run,
                     "deviation_histogram": histogram},
        "failures": rec.failures,
    }


def suite_remark_nice(seed: int, sizes: dict) -> dict:
    rec = _Recorder()
    for i in range(sizes["instances"]):
        length = 5 + i % 4
        params = _params(CORPUS, _instance_seed(seed, i),
                         tree_size=(length, length), tree_shape="path",
                         piece_edges=(1, 8))
        c = generate_cluster(params)
        rng = random.Random(params.seed + 4)
        deep = length // 2   # at least two walls from either endpoint piece
        first, last = 0, length - 1
        sp_a = special_path(c, _floor_point_in(c, rng, first),
                            _floor_point_in(c, rng, last))
        sp_b = special_path(c, _floor_point_in(c, rng, first),
                            _floor_point_in(c, rng, last))
        for sp in (sp_a, sp_b):
            assert sp.vertices == tuple(range(length))
        seg_a = sp_a.segments[deep]
        seg_b = sp_b.segments[deep]
        if seg_a != seg_b:
            rec.fail(dumps(c), "special_path",
                     [point_to_spec(seg_a.entry), point_to_spec(seg_b.entry)],
                     f"deep segment at piece {deep} depends on the endpoints")
    return {
        "pass": rec.count == 0,
        "counters": {"instances": sizes["instances"]},
        "failures": rec.failures,
    }


def _reference_blocks(g) -> set[frozenset]:
    """Maximal vertex sets staying connected under any single removal."""

    def connected(vs: frozenset) -> bool:
        start = next(iter(vs))
        seen = {start}
        work = [start]
        while work:
            v = work.pop()
            for _, w in g.adjacency(v):
                if w in vs and w not in seen:
                    seen.add(w)
                    work.append(w)
        return seen == vs

    robust = []
    verts = list(g.vertices)
    for r in range(2, len(verts) + 1):
        for combo in itertools.combinations(verts, r):
            vs = frozenset(combo)
            if connected(vs) and all(connected(vs - {v}) for v in vs):
                robust.append(vs)
    return {vs for vs in robust if not any(vs < other for other in robust)}


def suite_tree_graded(seed: int, sizes: dict) -> dict:
    rec = _Recorder()
    rng = random.Random(seed + 5)
    for i in range(sizes["graphs"]):
        spec = random_graph_spec(rng, max_vertices=sizes["max_vertices"])
        g = graph_of_spec(spec)
        dec = blocks(g)
        fast = {frozenset(b) for b in dec.blocks}
        if fast != _reference_blocks(g):
            rec.fail(dumps_canonical(spec), "blocks", [], "decomposition "
                     "disagrees with the exhaustive reference")
            continue
        report = check_T1_T2(g, dec.blocks)
        if not (report["cover_ok"] and report["t1_ok"] and report["t2_ok"]):
            rec.fail(dumps_canonical(spec), "check_T1_T2", [],
                     dumps_canonical(report))
        seen_in: dict[int, int] = {}
        for b in dec.blocks:
            for v in b:
                seen_in[v] = seen_in.get(v, 0) + 1
        multi = tuple(sorted(v for v, n in seen_in.items() if n >= 2))
        if multi != cut_points(g):
            rec.fail(dumps_canonical(spec), "cut_points", [],
                     "cut vertices do not match multi-block vertices")
    return {
        "pass": rec.count == 0,
        "counters": {"graphs": sizes["graphs"]},
        "failures": rec.failures,
    }


def suite_isomorphism(seed: int, sizes: dict, fault: str | None) -> dict:
    rec = _Recorder()
    planted_count = sizes["pairs"] // 2
    found = agreements = spots = 0
    for i in range(sizes["pairs"]):
        params = _params(ISO_CORPUS, _instance_seed(seed, i))
        planted = i < planted_count
        ca, cb = planted_pair(params) if planted else mutated_pair(params)
        if fault == "mutate-planted" and i == 0:
            cb = shrink_edge(cb, cb.tree.vertices[0], 0)
        triple = isomorphic(ca, cb)
        referee = brute_force_iso(ca, cb)
        if (triple is None) != (referee is None):
            rec.fail(dumps(ca), "isomorphic", [dumps(cb)],
                     "search and brute force disagree")
            continue
        if planted and triple is None:
            rec.fail(dumps(ca), "isomorphic", [dumps(cb)],
                     "planted isometric pair reported non-isomorphic")
            continue
        agreements += 1
        if triple is None:
            continue
        found += 1
        ok, cond, detail = verify_good(triple)
        if not ok:
            rec.fail(dumps(ca), "verify_good", [dumps(cb)],
                     f"condition {cond}: {detail}")
            continue
        rng = random.Random(params.seed + 6)
        pts = sample_points(ca, rng, 2 * sizes["spot_checks"])
        for j in range(sizes["spot_checks"]):
            x, y = pts[2 * j], pts[2 * j + 1]
            spots += 1
            if exact_distance(ca, x, y)[0] != exact_distance(
                    cb, point_image(triple, x), point_image(triple, y))[0]:
                rec.fail(dumps(ca), "point_image",
                         [point_to_spec(x), point_to_spec(y)],
                         "witness does not preserve this distance")
                break
    return {
        "pass": rec.count == 0,
        "counters": {"pairs": sizes["pairs"], "planted": planted_count,
                     "witnesses": found, "agreements": agreements,
                     "spot_checks": spots},
        "failures": rec.failures,
    }


def run_suite(config: dict) -> dict:
    """Execute the configured suites; deterministic apart from timings."""
    known = {"seed", "suites", "sizes", "k_obs", "fault"}
    unknown = set(config) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    seed = config.get("seed", 0)
    if not isinstance(seed, int):
        raise ValueError("seed must be an integer")
    names = config.get("suites", list(SUITE_NAMES))
    bad = [n for n in names if n not in SUITE_NAMES]
    if bad:
        raise ValueError(f"unknown suites: {bad}")
    sizes_cfg = config.get("sizes", {})
    k_obs = config.get("k_obs")
    fault = config.get("fault")
    if fault not in (None, "mutate-planted"):
        raise ValueError(f"unknown fault flag {fault!r}")

    report = {"schema_version": SCHEMA_VERSION, "seed": seed, "suites": {}}
    overall = True
    total0 = time.perf_counter()
    for name in SUITE_NAMES:
        if name not in names:
            continue
        sizes = dict(DESK_SIZES[name])
        sizes.update(sizes_cfg.get(name, {}))
        t0 = time.perf_counter()
        if name == "metric-axioms":
            result = suite_metric_axioms(seed, sizes)
        elif name == "bilipschitz":
            result = suite_bilipschitz(seed, sizes, k_obs)
        elif name == "oracle-agreement":
            result = suite_oracle_agreement(seed, sizes)
        elif name == "remark-nice":
            result = suite_remark_nice(seed, sizes)
        elif name == "tree-graded":
            result = suite_tree_graded(seed, sizes)
        else:
            result = suite_isomorphism(seed, sizes, fault)
        result["seconds"] = round(time.perf_counter() - t0, 3)
        report["suites"][name] = result
        overall = overall and result["pass"]
    report["pass"] = overall
    report["total_seconds"] = round(time.perf_counter() - total0, 3)
    return report


def strip_timings(report: dict) -> dict:
    """Copy of a report without wall-clock fields, for byte comparison."""
    out = {k: v for k, v in report.items() if k != "total_seconds"}
    out["suites"] = {
        name: {k: v for k, v in suite.items() if k != "seconds"}
        for name, suite in report["suites"].items()
    }
    return out

"""Chain-structured convex PL minimization against a breakpoint-grid oracle.

Every objective built from the supported term types is piecewise linear,
so its minimum over a box is attained at an arrangement vertex whose
coordinates come from unary kinks propagated through the pair couplings.
The oracle enumerates that grid and takes the exact minimum.
"""

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from flipcluster.errors import NonConvexObjective, ObjectiveStructureError
from flipcluster.piecewise_linear import (
    AbsAnchor,
    Affine,
    Const,
    IntervalDist,
    PairAbs,
    PLFunction,
    TreePair,
    evaluate_terms,
    minimize_convex_pl,
    pl_abs,
    pl_add,
    pl_build,
    pl_compose_affine,
    pl_inf_conv_abs,
    pl_min2,
)

F = Fraction


def _clamp(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def grid_minimize(terms, box):
    """Exact minimum by enumerating propagated breakpoints per variable."""
    n = len(box)
    cands = [{F(lo), F(hi)} for lo, hi in box]
    for t in terms:
        if isinstance(t, AbsAnchor):
            cands[t.var].add(F(t.anchor))
        elif isinstance(t, IntervalDist):
            cands[t.var] |= {F(t.lo), F(t.hi)}
        elif isinstance(t, TreePair):
            cands[t.var_a] |= {F(t.lo), F(t.hi)}
            cands[t.var_b] |= {
                t.sigma * (F(t.lo) - F(t.shift)),
                t.sigma * (F(t.hi) - F(t.shift)),
            }
    pairs = [t for t in terms if isinstance(t, (PairAbs, TreePair))]
    for _ in range(n):
        for t in pairs:
            if isinstance(t, PairAbs):
                for v in list(cands[t.var_b]):
                    cands[t.var_a].add(t.sigma * v + F(t.shift))
                for v in list(cands[t.var_a]):
                    cands[t.var_b].add(t.sigma * (v - F(t.shift)))
            else:
                lo, hi = F(t.lo), F(t.hi)
                for v in list(cands[t.var_b]):
                    cands[t.var_a].add(_clamp(t.sigma * v + F(t.shift), lo, hi))
                for v in list(cands[t.var_a]):
                    cands[t.var_b].add(t.sigma * (_clamp(v, lo, hi) - F(t.shift)))
    grids = [
        sorted(c for c in cs if box[i][0] <= c <= box[i][1])
        for i, cs in enumerate(cands)
    ]
    best = None
    for combo in itertools.product(*grids):
        val = evaluate_terms(terms, combo)
        if best is None or val < best:
            best = val
    return best


class TestPLFunction:
    def test_eval_and_minimum(self):
        f = PLFunction((F(0), F(2), F(5)), (F(4), F(0), F(6)))
        assert f(F(1)) == 2
        assert f(F(4)) == 4
        assert f.min_point() == (F(2), F(0))
        assert f.is_convex()

    def test_nonconvex_detected(self):
        w = PLFunction((F(0), F(1), F(2)), (F(0), F(1), F(0)))
        assert not w.is_convex()

    def test_min_prefers_lowest_knot_on_flat(self):
        f = PLFunction((F(0), F(1), F(3)), (F(2), F(0), F(0)))
        assert f.min_point() == (F(1), F(0))

    def test_single_knot(self):
        f = PLFunction((F(3),), (F(7),))
        assert f(F(3)) == 7
        assert f.min_point() == (F(3), F(7))

    def test_add_refines_knots(self):
        f = pl_abs(F(0), F(4), F(1))
        g = pl_abs(F(0), F(4), F(3))
        h = pl_add(f, g)
        assert h(F(2)) == 2
        assert h(F(1)) == 2
        assert h(F(0)) == 4
        assert h.min_point() == (F(1), F(2))

    def test_min2_inserts_crossing(self):
        up = pl_build(F(0), F(4), [], lambda x: x)
        down = pl_build(F(0), F(4), [], lambda x: 4 - x)
        m = pl_min2(up, down)
        assert F(2) in m.knots
        assert m(F(2)) == 2
        assert m(F(0)) == 0 and m(F(4)) == 0

    def test_compose_affine_reflection(self):
        f = pl_build(F(0), F(3), [F(1)], lambda x: abs(x - 1))
        g = pl_compose_affine(f, -1, F(3))  # g(x) = f(3 - x)
        assert (g.lo, g.hi) == (F(0), F(3))
        assert g(F(2)) == 0
        assert g(F(0)) == 2

    def test_inf_conv_keeps_shallow_v(self):
        f = pl_abs(F(0), F(10), F(3))
        g = pl_inf_conv_abs(f, F(0), F(10))
        for x in range(0, 11):
            assert g(F(x)) == abs(x - 3)

    def test_inf_conv_clips_steep_slopes(self):
        f = pl_build(F(0), F(6), [F(3)], lambda x: 2 * abs(x - 3))
        g = pl_inf_conv_abs(f, F(0), F(6))
        for x in range(0, 7):
            assert g(F(x)) == abs(x - 3)

    def test_inf_conv_extends_past_domain(self):
        f = pl_build(F(0), F(2), [], lambda x: 3 * x)
        g = pl_inf_conv_abs(f, F(-2), F(4))
        assert g(F(-2)) == 2
        assert g(F(0)) == 0
        assert g(F(4)) == 4


class TestMinimizeFrozen:
    def test_single_abs(self):
        arg, val = minimize_convex_pl([AbsAnchor(0, F(3))], [(F(0), F(10))])
        assert (arg, val) == ((F(3),), F(0))

    def test_affine_picks_corner(self):
        arg, val = minimize_convex_pl([Affine(0, F(2), F(1))], [(F(1), F(5))])
        assert (arg, val) == ((F(1),), F(3))
        arg, val = minimize_convex_pl([Affine(0, F(-2), F(0))], [(F(1), F(5))])
        assert (arg, val) == ((F(5),), F(-10))

    def test_separable(self):
        arg, val = minimize_convex_pl(
            [AbsAnchor(0, F(3)), AbsAnchor(1, F(5)), Const(F(2))],
            [(F(0), F(10)), (F(0), F(10))],
        )
        assert (arg, val) == ((F(3), F(5)), F(2))

    def test_diagonal_kink_not_a_stall(self):
        # coordinate descent from (0, 0) cannot improve either axis alone here
        terms = [PairAbs(0, 1, 1, F(0)), AbsAnchor(0, F(3)), AbsAnchor(1, F(3))]
        arg, val = minimize_convex_pl(terms, [(F(0), F(10))] * 2)
        assert (arg, val) == ((F(3), F(3)), F(0))

    def test_pair_abs_with_reflection(self):
        # |x + y - 4| with x pulled to 1: minimizers have y = 4 - x
        terms = [PairAbs(0, 1, -1, F(4)), AbsAnchor(0, F(1))]
        arg, val = minimize_convex_pl(terms, [(F(0), F(10))] * 2)
        assert val == 0
        assert arg[0] == F(1) and arg[1] == F(3)

    def test_tree_pair_flat_plateau(self):
        terms = [
            AbsAnchor(0, F(0)),
            AbsAnchor(1, F(0)),
            TreePair(0, 1, -1, F(2), F(1), F(2)),
        ]
        arg, val = minimize_convex_pl(terms, [(F(0), F(2))] * 2)
        assert val == 2
        assert evaluate_terms(terms, arg) == 2
        assert arg == (F(0), F(0))  # lowest point of the flat minimizer set

    def test_three_var_chain(self):
        # values pulled toward 0, 6, 0 with unit couplings along the chain
        terms = [
            AbsAnchor(0, F(0)),
            AbsAnchor(1, F(6)),
            AbsAnchor(2, F(0)),
            PairAbs(0, 1, 1, F(0)),
            PairAbs(1, 2, 1, F(0)),
        ]
        box = [(F(0), F(6))] * 3
        arg, val = minimize_convex_pl(terms, box)
        # staying at 0 everywhere beats dragging the chain toward 6
        assert val == grid_minimize(terms, box) == 6
        assert arg == (F(0), F(0), F(0))
        assert evaluate_terms(terms, arg) == val

    def test_no_terms(self):
        arg, val = minimize_convex_pl([], [(F(2), F(5)), (F(-1), F(3))])
        assert (arg, val) == ((F(2), F(-1)), F(0))


class TestStructureGuards:
    def test_cycle_rejected(self):
        terms = [PairAbs(0, 1, 1, F(0)), PairAbs(1, 2, 1, F(0)), PairAbs(0, 2, 1, F(0))]
        with pytest.raises(ObjectiveStructureError):
            minimize_convex_pl(terms, [(F(0), F(1))] * 3)

    def test_parallel_coupling_rejected(self):
        terms = [PairAbs(0, 1, 1, F(0)), PairAbs(0, 1, 1, F(1))]
        with pytest.raises(ObjectiveStructureError):
            minimize_convex_pl(terms, [(F(0), F(1))] * 2)

    def test_self_coupling_rejected(self):
        with pytest.raises(ObjectiveStructureError):
            minimize_convex_pl([PairAbs(0, 0, 1, F(0))], [(F(0), F(1))])

    def test_inverted_interval_trips_certificate(self):
        # an inside-out overlap interval makes the coupling non-convex
        terms = [TreePair(0, 1, 1, F(0), F(2), F(1))]
        with pytest.raises(NonConvexObjective):
            minimize_convex_pl(terms, [(F(0), F(4))] * 2)


def rationals(lo=-6, hi=6):
    return st.builds(F, st.integers(lo * 2, hi * 2), st.just(2))


@st.composite
def term_system(draw):
    n = draw(st.integers(1, 4))
    box = []
    for _ in range(n):
        a = draw(rationals())
        w = draw(st.builds(F, st.integers(1, 8), st.just(2)))
        box.append((a, a + w))
    terms = []
    for v in range(n):
        for _ in range(draw(st.integers(0, 2))):
            kind = draw(st.integers(0, 2))
            if kind == 0:
                terms.append(AbsAnchor(v, draw(rationals())))
            elif kind == 1:
                terms.append(Affine(v, draw(st.sampled_from([F(-1), F(1), F(2)])), F(0)))
            else:
                a = draw(rationals())
                b = a + draw(st.builds(F, st.integers(0, 4), st.just(1)))
                terms.append(IntervalDist(v, a, b))
    # couple consecutive variables along a random sub-chain: always a forest
    for v in range(n - 1):
        if not draw(st.booleans()):
            continue
        sig = draw(st.sampled_from([1, -1]))
        sh = draw(rationals())
        if draw(st.booleans()):
            terms.append(PairAbs(v, v + 1, sig, sh))
        else:
            lo = draw(rationals())
            hi = lo + draw(st.builds(F, st.integers(0, 5), st.just(1)))
            terms.append(TreePair(v, v + 1, sig, sh, lo, hi))
    return terms, box


class TestMinimizeAgainstOracle:
    @settings(max_examples=250, deadline=None)
    @given(term_system())
    def test_exact_agreement(self, tb):
        terms, box = tb
        arg, val = minimize_convex_pl(terms, box)
        assert evaluate_terms(terms, arg) == val
        for x, (lo, hi) in zip(arg, box):
            assert lo <= x <= hi
        assert val == grid_minimize(terms, box)

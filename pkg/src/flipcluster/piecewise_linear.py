"""Exact minimization of chain-structured convex piecewise-linear objectives.

Objectives are sums of small term types over finitely many rational
variables, each confined to a box interval.  Unary terms touch one
variable; pair terms couple two.  The couplings that arise from distances
in glued tree products form disjoint chains (every variable sits in at
most two pair terms, acyclically), so exact dynamic programming over
one-dimensional piecewise-linear value functions computes the global
minimum without search: messages are eliminated variable by variable and
an argmin is recovered by backtracking.  Plain coordinate descent is not
sound for these objectives - a diagonal kink such as |x - y| can make
every axis direction flat at a non-optimal point - which is why the
elimination route is used.

Everything is exact over Fraction.  A convexity certificate (slopes must
be nondecreasing) is checked on every intermediate value function; a
violation raises NonConvexObjective instead of returning a wrong minimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import NonConvexObjective, ObjectiveStructureError


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


# -- term types -------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Affine:
    """slope * x_var + intercept"""

    var: int
    slope: Fraction
    intercept: Fraction = Fraction(0)


@dataclass(frozen=True)
class AbsAnchor:
    """|x_var - anchor|"""

    var: int
    anchor: Fraction


@dataclass(frozen=True)
class IntervalDist:
    """distance from x_var to the interval [lo, hi]"""

    var: int
    lo: Fraction
    hi: Fraction


@dataclass(frozen=True)
class PairAbs:
    """|x_a - sigma * x_b - shift| with sigma in {1, -1}"""

    var_a: int
    var_b: int
    sigma: int
    shift: Fraction


@dataclass(frozen=True)
class TreePair:
    """Distance between points moving on two overlapping tree geodesics.

    With r = sigma * x_b + shift (the position of the second point in the
    first line's parameters, affinely extended past the overlap) and
    I = [lo, hi] the overlap in the first line's parameters, the value is

        |x_a - clamp_I(r)| + dist(r, I)

    which is exactly the tree distance between the two moving points and
    is jointly convex.
    """

    var_a: int
    var_b: int
    sigma: int
    shift: Fraction
    lo: Fraction
    hi: Fraction


Term = Const | Affine | AbsAnchor | IntervalDist | PairAbs | TreePair


def _clamp(x: Fraction, lo: Fraction, hi: Fraction) -> Fraction:
    return lo if x < lo else hi if x > hi else x


def _ivl_dist(x: Fraction, lo: Fraction, hi: Fraction) -> Fraction:
    if x < lo:
        return lo - x
    if x > hi:
        return x - hi
    return Fraction(0)


def evaluate_terms(terms: Sequence[Term], x: Sequence[Fraction]) -> Fraction:
    total = Fraction(0)
    for t in terms:
        if isinstance(t, Const):
            total += t.value
        elif isinstance(t, Affine):
            total += t.slope * x[t.var] + t.intercept
        elif isinstance(t, AbsAnchor):
            total += abs(x[t.var] - t.anchor)
        elif isinstance(t, IntervalDist):
            total += _ivl_dist(x[t.var], t.lo, t.hi)
        elif isinstance(t, PairAbs):
            total += abs(x[t.var_a] - t.sigma * x[t.var_b] - t.shift)
        elif isinstance(t, TreePair):
            r = t.sigma * x[t.var_b] + t.shift
            total += abs(x[t.var_a] - _clamp(r, t.lo, t.hi)) + _ivl_dist(r, t.lo, t.hi)
        else:
            raise TypeError(f"unknown term {t!r}")
    return total


# -- one-dimensional piecewise-linear functions ------------------------------


@dataclass(frozen=True)
class PLFunction:
    """A piecewise-linear function on a closed bounded interval.

    Stored as strictly increasing knots with their values; between knots
    the function interpolates linearly.  A single knot encodes a function
    on a degenerate (one point) domain.
    """

    knots: tuple[Fraction, ...]
    values: tuple[Fraction, ...]

    def __post_init__(self):
        if not self.knots or len(self.knots) != len(self.values):
            raise ValueError("knots/values mismatch")
        for a, b in zip(self.knots, self.knots[1:]):
            if not a < b:
                raise ValueError("knots must be strictly increasing")

    @property
    def lo(self) -> Fraction:
        return self.knots[0]

    @property
    def hi(self) -> Fraction:
        return self.knots[-1]

    def __call__(self, x: Fraction) -> Fraction:
        if x < self.lo or x > self.hi:
            raise ValueError(f"{x} outside domain [{self.lo}, {self.hi}]")
        ks = self.knots
        for i in range(len(ks) - 1):
            if ks[i] <= x <= ks[i + 1]:
                if x == ks[i]:
                    return self.values[i]
                t = (x - ks[i]) / (ks[i + 1] - ks[i])
                return self.values[i] + t * (self.values[i + 1] - self.values[i])
        return self.values[-1] if x == ks[-1] else self.values[0]

    def is_convex(self) -> bool:
        prev = None
        for i in range(len(self.knots) - 1):
            s = (self.values[i + 1] - self.values[i]) / (self.knots[i + 1] - self.knots[i])
            if prev is not None and s < prev:
                return False
            prev = s
        return True

    def min_point(self) -> tuple[Fraction, Fraction]:
        """(lowest argmin, minimum value).  Exact: PL minima sit on knots."""
        best = min(self.values)
        i = self.values.index(best)
        return self.knots[i], best

    def shift(self, c: Fraction) -> "PLFunction":
        return PLFunction(self.knots, tuple(v + c for v in self.values))


def pl_from_samples(points: list[tuple[Fraction, Fraction]]) -> PLFunction:
    points = sorted(set(points))
    ks = tuple(p[0] for p in points)
    vs = tuple(p[1] for p in points)
    return PLFunction(ks, vs)


def pl_build(lo: Fraction, hi: Fraction, interior: list[Fraction], fn) -> PLFunction:
    """Sample fn at lo, hi and the interior points that fall inside (lo, hi)."""
    if lo > hi:
        raise ValueError("empty domain")
    xs = {lo, hi}
    for p in interior:
        if lo < p < hi:
            xs.add(p)
    ks = tuple(sorted(xs))
    return PLFunction(ks, tuple(fn(x) for x in ks))


def pl_const(lo: Fraction, hi: Fraction, c: Fraction) -> PLFunction:
    return pl_build(lo, hi, [], lambda _x: c)


def pl_abs(lo: Fraction, hi: Fraction, anchor: Fraction) -> PLFunction:
    return pl_build(lo, hi, [anchor], lambda x: abs(x - anchor))


def pl_affine(lo: Fraction, hi: Fraction, slope: Fraction, intercept: Fraction) -> PLFunction:
    return pl_build(lo, hi, [], lambda x: slope * x + intercept)


def pl_interval_dist(lo: Fraction, hi: Fraction, a: Fraction, b: Fraction) -> PLFunction:
    return pl_build(lo, hi, [a, b], lambda x: _ivl_dist(x, a, b))


def pl_add(f: PLFunction, g: PLFunction) -> PLFunction:
    if (f.lo, f.hi) != (g.lo, g.hi):
        raise ValueError("domain mismatch in pl_add")
    ks = tuple(sorted(set(f.knots) | set(g.knots)))
    return PLFunction(ks, tuple(f(x) + g(x) for x in ks))


def pl_min2(f: PLFunction, g: PLFunction) -> PLFunction:
    """Exact pointwise minimum (adds crossing knots)."""
    if (f.lo, f.hi) != (g.lo, g.hi):
        raise ValueError("domain mismatch in pl_min2")
    ks = sorted(set(f.knots) | set(g.knots))
    refined: list[Fraction] = []
    for i, k in enumerate(ks):
        refined.append(k)
        if i + 1 < len(ks):
            k2 = ks[i + 1]
            d0 = f(k) - g(k)
            d1 = f(k2) - g(k2)
            if (d0 > 0 > d1) or (d0 < 0 < d1):
                t = d0 / (d0 - d1)
                refined.append(k + t * (k2 - k))
    out_ks = tuple(sorted(set(refined)))
    return PLFunction(out_ks, tuple(min(f(x), g(x)) for x in out_ks))


def pl_min_many(fs: list[PLFunction]) -> PLFunction:
    out = fs[0]
    for f in fs[1:]:
        out = pl_min2(out, f)
    return out


def pl_compose_affine(f: PLFunction, sigma: int, shift: Fraction) -> PLFunction:
    """g(x) = f(sigma * x + shift) on the pulled-back domain."""
    if sigma == 1:
        ks = tuple(k - shift for k in f.knots)
        return PLFunction(ks, f.values)
    ks = tuple(shift - k for k in reversed(f.knots))
    return PLFunction(ks, tuple(reversed(f.values)))


def pl_inf_conv_abs(f: PLFunction, out_lo: Fraction, out_hi: Fraction) -> PLFunction:
    """g(y) = min over x in dom(f) of f(x) + |x - y|, on [out_lo, out_hi].

    Works piece by piece: a linear piece of slope within [-1, 1] survives
    with unit-slope extensions, a steeper piece collapses to the cone at
    its cheap end.  The pointwise minimum of those simple functions is the
    exact inf-convolution, with no convexity assumption on f.
    """
    pieces: list[PLFunction] = []

    def cone(cx: Fraction, cv: Fraction) -> PLFunction:
        return pl_build(out_lo, out_hi, [cx], lambda y: cv + abs(y - cx))

    if len(f.knots) == 1:
        return cone(f.knots[0], f.values[0])
    for i in range(len(f.knots) - 1):
        x0, x1 = f.knots[i], f.knots[i + 1]
        v0, v1 = f.values[i], f.values[i + 1]
        s = (v1 - v0) / (x1 - x0)
        if s > 1:
            pieces.append(cone(x0, v0))
        elif s < -1:
            pieces.append(cone(x1, v1))
        else:
            def ext(y, x0=x0, x1=x1, v0=v0, v1=v1, s=s):
                if y < x0:
                    return v0 + (x0 - y)
                if y > x1:
                    return v1 + (y - x1)
                return v0 + s * (y - x0)

            pieces.append(pl_build(out_lo, out_hi, [x0, x1], ext))
    return pl_min_many(pieces)


# -- chain elimination --------------------------------------------------------


def _unary_pl(terms: list[Term], var: int, lo: Fraction, hi: Fraction) -> PLFunction:
    out = pl_const(lo, hi, Fraction(0))
    for t in terms:
        if isinstance(t, AbsAnchor) and t.var == var:
            out = pl_add(out, pl_abs(lo, hi, _frac(t.anchor)))
        elif isinstance(t, Affine) and t.var == var:
            out = pl_add(out, pl_affine(lo, hi, _frac(t.slope), _frac(t.intercept)))
        elif isinstance(t, IntervalDist) and t.var == var:
            out = pl_add(out, pl_interval_dist(lo, hi, _frac(t.lo), _frac(t.hi)))
    return out


def _pair_message(pair: Term, child_fn: PLFunction, child_var: int,
                  parent_lo: Fraction, parent_hi: Fraction) -> PLFunction:
    """min over the child variable of child_fn + pair(child, parent)."""
    if isinstance(pair, PairAbs):
        # rewrite so the child is the plain side: |c - (sig*p + sh)|
        if pair.var_a == child_var:
            sig, sh = pair.sigma, _frac(pair.shift)
        else:
            # |a - sig*b - sh| = |b - sig*(a - sh)| since sig*sig = 1
            sig, sh = pair.sigma, -pair.sigma * _frac(pair.shift)
        env = pl_inf_conv_abs(child_fn, min(sig * parent_lo + sh, sig * parent_hi + sh),
                              max(sig * parent_lo + sh, sig * parent_hi + sh))
        return pl_compose_affine(env, sig, sh)
    if isinstance(pair, TreePair):
        lo_i, hi_i = _frac(pair.lo), _frac(pair.hi)
        sig, sh = pair.sigma, _frac(pair.shift)
        if pair.var_a == child_var:
            # child moves on the plain side; parent enters through r = sig*p + sh
            env = pl_inf_conv_abs(child_fn, lo_i, hi_i)  # defined for s in I
            r_lo = min(sig * parent_lo + sh, sig * parent_hi + sh)
            r_hi = max(sig * parent_lo + sh, sig * parent_hi + sh)

            def fr(r):
                return env(_clamp(r, lo_i, hi_i)) + _ivl_dist(r, lo_i, hi_i)

            f_r = pl_build(r_lo, r_hi, [lo_i, hi_i, *env.knots], fr)
            return pl_compose_affine(f_r, sig, sh)
        # child is the clamped side: substitute r = sig*c + sh and minimize
        # W(r) = child_fn(child) + dist(r, I) over each clamp regime.
        g_r = pl_compose_affine(child_fn, sig, -sig * sh)  # child_fn as a function of r
        w = pl_add(g_r, pl_interval_dist(g_r.lo, g_r.hi, lo_i, hi_i))
        pieces: list[PLFunction] = []
        if w.lo < lo_i:
            # crossing pinned at the low end of the overlap
            end = min(w.hi, lo_i)
            m = pl_restrict(w, w.lo, end).min_point()[1]
            pieces.append(pl_build(parent_lo, parent_hi, [lo_i],
                                   lambda p, m=m: m + abs(p - lo_i)))
        if w.hi > hi_i:
            start = max(w.lo, hi_i)
            m = pl_restrict(w, start, w.hi).min_point()[1]
            pieces.append(pl_build(parent_lo, parent_hi, [hi_i],
                                   lambda p, m=m: m + abs(p - hi_i)))
        mid_lo, mid_hi = max(w.lo, lo_i), min(w.hi, hi_i)
        if mid_lo <= mid_hi:
            mid = pl_restrict(w, mid_lo, mid_hi)
            pieces.append(pl_inf_conv_abs(mid, parent_lo, parent_hi))
        if not pieces:
            raise AssertionError("empty pair message")
        return pl_min_many(pieces)
    raise TypeError(f"not a pair term: {pair!r}")


def _pair_fixed(pair: Term, fixed_var: int, fixed_value: Fraction,
                free_lo: Fraction, free_hi: Fraction) -> PLFunction:
    """The pair term as a function of its free variable, the other one fixed."""
    if isinstance(pair, PairAbs):
        if pair.var_a == fixed_var:
            # |fixed - sig*x - sh| = |x - sig*(fixed - sh)|
            return pl_abs(free_lo, free_hi, pair.sigma * (fixed_value - _frac(pair.shift)))
        return pl_abs(free_lo, free_hi, pair.sigma * fixed_value + _frac(pair.shift))
    if isinstance(pair, TreePair):
        lo_i, hi_i = _frac(pair.lo), _frac(pair.hi)
        sig, sh = pair.sigma, _frac(pair.shift)
        if pair.var_b == fixed_var:
            r = sig * fixed_value + sh
            base = _ivl_dist(r, lo_i, hi_i)
            return pl_abs(free_lo, free_hi, _clamp(r, lo_i, hi_i)).shift(base)

        def fb(x, a=fixed_value):
            r = sig * x + sh
            return abs(a - _clamp(r, lo_i, hi_i)) + _ivl_dist(r, lo_i, hi_i)

        anchors = [sig * (lo_i - sh), sig * (hi_i - sh), sig * (fixed_value - sh)]
        return pl_build(free_lo, free_hi, anchors, fb)
    raise TypeError(f"not a pair term: {pair!r}")


def pl_restrict(f: PLFunction, lo: Fraction, hi: Fraction) -> PLFunction:
    if lo < f.lo or hi > f.hi or lo > hi:
        raise ValueError("bad restriction")
    if lo == hi:
        return PLFunction((lo,), (f(lo),))
    ks = [lo] + [k for k in f.knots if lo < k < hi] + [hi]
    return PLFunction(tuple(ks), tuple(f(x) for x in ks))


def minimize_convex_pl(terms: Sequence[Term], box: Sequence[tuple[Fraction, Fraction]],
                       ) -> tuple[tuple[Fraction, ...], Fraction]:
    """Exact global minimum of a chain-coupled convex PL objective over a box.

    Returns (argmin, value); the argmin is canonical (lowest coordinates
    among minimizers under the elimination order).  Raises
    ObjectiveStructureError when pair couplings do not form a forest and
    NonConvexObjective when an intermediate value function fails the
    convexity certificate.
    """
    n = len(box)
    box_f = [(_frac(lo), _frac(hi)) for lo, hi in box]
    for i, (lo, hi) in enumerate(box_f):
        if lo > hi:
            raise ValueError(f"empty box for variable {i}")
    terms = list(terms)
    const_total = sum((t.value for t in terms if isinstance(t, Const)), Fraction(0))
    pair_terms = [t for t in terms if isinstance(t, (PairAbs, TreePair))]
    adj: dict[int, list[tuple[int, Term]]] = {i: [] for i in range(n)}
    for t in pair_terms:
        if t.var_a == t.var_b:
            raise ObjectiveStructureError("pair term couples a variable with itself")
        adj[t.var_a].append((t.var_b, t))
        adj[t.var_b].append((t.var_a, t))

    unary = {i: _unary_pl(terms, i, *box_f[i]) for i in range(n)}

    assign: dict[int, Fraction] = {}
    total = const_total
    seen: set[int] = set()
    for root in range(n):
        if root in seen:
            continue
        # collect the component and verify it is a tree of couplings
        comp: list[int] = []
        parent: dict[int, tuple[int, Term] | None] = {root: None}
        order = [root]
        seen.add(root)
        while order:
            v = order.pop()
            comp.append(v)
            for w, t in adj[v]:
                if w not in parent:
                    parent[w] = (v, t)
                    seen.add(w)
                    order.append(w)
                elif parent[v] is None or parent[v][0] != w or parent[v][1] is not t:
                    raise ObjectiveStructureError(
                        "pair couplings contain a cycle; chain elimination needs a forest"
                    )
        # children lists, processed leaves-first
        children: dict[int, list[tuple[int, Term]]] = {v: [] for v in comp}
        for v in comp:
            if parent[v] is not None:
                pv, t = parent[v]
                children[pv].append((v, t))
        post: list[int] = []
        stack = [root]
        while stack:
            v = stack.pop()
            post.append(v)
            for w, _ in children[v]:
                stack.append(w)
        post.reverse()

        msg: dict[int, PLFunction] = {}
        for v in post:
            fn = unary[v]
            for w, t in children[v]:
                m = _pair_message(t, msg[w], w, *box_f[v])
                if not m.is_convex():
                    raise NonConvexObjective(
                        f"message into variable {v} violates the convexity certificate"
                    )
                fn = pl_add(fn, m)
            if not fn.is_convex():
                raise NonConvexObjective(
                    f"value function of variable {v} violates the convexity certificate"
                )
            msg[v] = fn

        arg_root, val = msg[root].min_point()
        total += val
        assign[root] = arg_root
        # backtrack downward, fixing parents first
        down = [root]
        while down:
            v = down.pop()
            for w, t in children[v]:
                fixed = _pair_fixed(t, v, assign[v], *box_f[w])
                g = pl_add(msg[w], fixed)
                assign[w] = g.min_point()[0]
                down.append(w)

    return tuple(assign[i] for i in range(n)), total

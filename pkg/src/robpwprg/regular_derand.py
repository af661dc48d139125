"""Derandomization of regular programs with two-way labelings.

A labeled regular layer is a rotation map (u, x) -> (v, x') that is a
bijection on [w] x [2^s].  Programs here expose

    rot(layer, states, labels) -> (states', labels')
    layer_mean(layer), n, w, s, start, accept

with 0-based layers; layers at or beyond ``n`` act as the identity.

DerandWalk over a segment [l, r) treats it as a walk of N = 2^L layers
(identity past r).  Its seed is (x, e_1, ..., e_L), packed most significant
first, and after step i < N with t - 1 trailing zeros in i it rotates the
level-t vertex (x, e_1..e_{t-1}) of H_t along e_t, writing the returned
label back into e_t.  The result is the rotation map of the recursively
derandomized product, so the walk is a bijection on (state, seed).

Transition matrices of walks are exact: literal enumeration when the seed
space is small; otherwise levels with a complete H_t multiply their halves'
matrices, and the single level just above the enumerable ones is averaged
through the transition matrix of H_t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import robp as rb
from .error_reduction import SignedTerm, binary_splitting_terms
from .generators import SeedSpaceTooLarge, exact_segment, mgg_inw_family, onehot_rows
from .matrix import sv_approx_error
from .randomness import Complete, Expander
from .wpr import Reduction, as_fraction, compose_chain, uniform_value

ENUM_BITS = 22


# labeled graphs

@dataclass(frozen=True)
class RotGraph:
    """d-regular bigraph U -> V given by rotation tables (``lab`` None for one-way labels)."""

    to_v: np.ndarray
    lab: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.to_v.shape[1]

    def transition(self, n_right: int | None = None) -> np.ndarray:
        u, d = self.to_v.shape
        nr = int(self.to_v.max()) + 1 if n_right is None else n_right
        out = np.zeros((u, nr))
        np.add.at(out, (np.repeat(np.arange(u), d), self.to_v.ravel()), 1.0 / d)
        return out

    def is_two_way(self) -> bool:
        if self.lab is None:
            return False
        code = self.to_v * self.d + self.lab
        return len(np.unique(code)) == code.size


def layer_graph(robp: rb.Robp, i: int) -> RotGraph:
    """Layer i (1-based) of a labeled program as a rotation graph."""
    f = rb.labeled(robp)
    return RotGraph(f.trans[i - 1].copy(), f.labels[i - 1].copy())


def derandomized_product(g1: RotGraph, g2: RotGraph, h: Expander) -> RotGraph:
    """Label (i0, j0) -> i0 * c + j0.  Two-way when g1, g2 (and h) are."""
    d = g1.d
    if g2.d != d or h.D != d:
        raise ValueError("degree mismatch between the graphs and the expander's vertex set")
    if g1.lab is None:
        raise ValueError("the first graph needs a two-way labeling")
    c = h.c
    U = g1.to_v.shape[0]
    v0 = np.repeat(np.arange(U), d * c)
    i0 = np.tile(np.repeat(np.arange(d), c), U)
    j0 = np.tile(np.arange(c), U * d)
    v1, i1 = g1.to_v[v0, i0], g1.lab[v0, i0]
    i2, j1 = h.rot(i1, j0)
    v2 = g2.to_v[v1, i2]
    lab = None if g2.lab is None else (g2.lab[v1, i2] * c + j1).reshape(U, d * c)
    return RotGraph(v2.reshape(U, d * c), lab)


# programs

class LabeledProgram:
    """Rotation view of a Robp carrying a two-way labeling."""

    def __init__(self, robp: rb.Robp):
        f = rb.labeled(robp)
        self.robp = f
        self.n, self.w, self.s = f.n, f.w, f.s
        self.start, self.accept = f.start, f.accept

    def rot(self, layer, states, labels):
        return self.robp.trans[layer][states, labels], self.robp.labels[layer][states, labels]

    def step(self, layer, states, symbols):
        return self.robp.trans[layer][states, symbols]

    def layer_mean(self, layer):
        return self.robp.layer_mean(layer)


def as_rot_program(f):
    return LabeledProgram(f) if isinstance(f, rb.Robp) else f


def family_bits(family: Sequence[Expander]) -> list[int]:
    return [h.log_c for h in family]


def _rot_layer(f, layer, v, x):
    if layer >= f.n:
        return v, x
    return f.rot(layer, v, x)


def derand_walk(f, l: int, r: int, u, seed, family: Sequence[Expander],
                trace: Callable | None = None):
    """Rot of the derandomized walk over [l, r) padded to 2^len(family) layers.

    ``u`` and ``seed`` may be arrays (broadcast together).  The seed packs
    (x, e_1, ..., e_L) most significant first; with ``trace`` every step is
    reported as (layer, state, seed).
    """
    f = as_rot_program(f)
    L = len(family)
    N = 1 << L
    if not 0 <= l < r <= l + N:
        raise ValueError("invalid segment for this family")
    eb = family_bits(family)
    total = f.s + sum(eb)
    if total > 62:
        raise SeedSpaceTooLarge("walk seeds wider than 62 bits are only handled through matrices")
    low = [sum(eb[t:]) for t in range(L + 1)]  # bits below e_t's block end
    v = np.array(u, dtype=np.int64)
    seed = np.array(seed, dtype=np.int64)
    v, seed = np.broadcast_arrays(v, seed)
    v, seed = v.copy(), seed.copy()
    if (seed < 0).any() or (seed >> total).any():
        raise ValueError("seed out of range")
    for i in range(1, N + 1):
        layer = l + i - 1
        if layer < r:
            x = seed >> low[0]
            v, x2 = _rot_layer(f, layer, v, x)
            seed = (x2 << low[0]) | (seed & ((1 << low[0]) - 1))
        if trace is not None:
            trace(layer, v, seed)
        if i < N:
            t = (i & -i).bit_length()  # trailing zeros + 1
            hi_shift = low[t]
            vert = seed >> (hi_shift + eb[t - 1])
            e = (seed >> hi_shift) & ((1 << eb[t - 1]) - 1)
            vert2, e2 = family[t - 1].rot(vert, e)
            seed = (((vert2 << eb[t - 1]) | e2) << hi_shift) | (seed & ((1 << hi_shift) - 1))
    return v, seed


def walk_bijection_check(f, l: int, r: int, family: Sequence[Expander]) -> bool:
    f = as_rot_program(f)
    bits = f.s + sum(family_bits(family))
    if bits + math.ceil(math.log2(max(f.w, 2))) > ENUM_BITS + 4:
        raise SeedSpaceTooLarge("walk space too large to check exhaustively")
    u = np.repeat(np.arange(f.w), 1 << bits)
    sd = np.tile(np.arange(1 << bits, dtype=np.int64), f.w)
    v, s2 = derand_walk(f, l, r, u, sd, family)
    return len(np.unique(v * (1 << bits) + s2)) == u.size


def _enum_matrix(f, l, r, family, exact: bool):
    bits = f.s + sum(family_bits(family))
    u = np.repeat(np.arange(f.w), 1 << bits)
    sd = np.tile(np.arange(1 << bits, dtype=np.int64), f.w)
    v, _ = derand_walk(f, l, r, u, sd, family)
    counts = np.zeros((f.w, f.w), dtype=np.int64)
    np.add.at(counts, (u, v), 1)
    if exact:
        return [[Fraction(int(c), 1 << bits) for c in row] for row in counts]
    return counts / float(1 << bits)


def _walk_matrix(f, l, r, family, exact: bool):
    L = len(family)
    bits = f.s + sum(family_bits(family))
    enumerable = bits + math.ceil(math.log2(max(f.w, 2))) <= ENUM_BITS
    if exact:
        if not enumerable:
            raise SeedSpaceTooLarge("exact rational matrices need an enumerable seed space")
        return _enum_matrix(f, l, r, family, True)
    if l >= r or l >= f.n:
        return np.eye(f.w)
    if L == 0:
        return f.layer_mean(l)
    if enumerable:
        return _enum_matrix(f, l, r, family, False)
    half = 1 << (L - 1)
    h = family[-1]
    left = _walk_matrix(f, l, min(r, l + half), family[:-1], False)
    if r <= l + half:
        return left
    if isinstance(h, Complete):
        return left @ _walk_matrix(f, l + half, r, family[:-1], False)
    lower = f.s + sum(family_bits(family[:-1]))
    if lower + math.ceil(math.log2(max(f.w, 2))) > ENUM_BITS:
        raise SeedSpaceTooLarge("only the top mixing level may be non-enumerable")
    S = 1 << lower
    u = np.repeat(np.arange(f.w), S)
    sd = np.tile(np.arange(S, dtype=np.int64), f.w)
    v1, s1 = derand_walk(f, l, l + half, u, sd, family[:-1])
    v2, _ = derand_walk(f, l + half, r, u, sd, family[:-1])
    right = onehot_rows(v2.reshape(f.w, S), f.w)  # [v, seed'', v2]
    mixed = np.einsum("ab,vbz->vaz", h.transition(), right)  # [v, seed', v2]
    rows = mixed[v1, s1].reshape(f.w, S, f.w)
    return rows.mean(axis=1)


def derand_walk_matrix(f, l: int, r: int, family: Sequence[Expander], exact: bool = False):
    """Transition matrix of the derandomized walk over [l, r) (Fractions if ``exact``)."""
    f = as_rot_program(f)
    if not 0 <= l < r <= l + (1 << len(family)):
        raise ValueError("invalid segment for this family")
    return _walk_matrix(f, l, r, family, exact)


def segment_sv_bound(lam: float, l: int, r: int) -> float:
    return 11.0 * lam * max(0, math.ceil(math.log2(r - l))) if r - l > 1 else 0.0


def segment_sv_error(f, l: int, r: int, family: Sequence[Expander]) -> float:
    f = as_rot_program(f)
    return sv_approx_error(derand_walk_matrix(f, l, r, family), exact_segment(f, l, r))


class DerandProgram:
    """Concatenation of derandomized walks over the parent's segments."""

    def __init__(self, parent, segments: Sequence[tuple], family: Sequence[Expander], cache: dict):
        self.parent, self.segments, self.family = parent, list(segments), list(family)
        self.n, self.w = len(self.segments), parent.w
        self.s = parent.s + sum(family_bits(family))
        self.start, self.accept = parent.start, parent.accept
        self._cache = cache
        cache.setdefault(("keepalive", id(parent)), parent)

    def rot(self, layer, states, labels):
        a, b = self.segments[layer]
        if a == b or a >= self.parent.n:
            st, lb = np.broadcast_arrays(np.asarray(states), np.asarray(labels))
            return st.copy(), lb.copy()
        return derand_walk(self.parent, a, b, states, labels, self.family)

    def step(self, layer, states, symbols):
        return self.rot(layer, states, symbols)[0]

    def layer_mean(self, layer):
        a, b = self.segments[layer]
        if a == b or a >= self.parent.n:
            return np.eye(self.w)
        key = (id(self.parent), "walk", a, b)
        if key not in self._cache:
            self._cache[key] = derand_walk_matrix(self.parent, a, b, self.family)
        return self._cache[key]


class DerandReduction(Reduction):
    """One level: index = binary-splitting term, layer t = derandomized walk over factor t."""

    name = "derand-level"

    def __init__(self, n: int, s: int, w: int, k: int, family: Sequence[Expander], eps):
        L = len(family)
        N = 1 << L
        if N < n:
            raise ValueError("family too short for the program length")
        self.family = list(family)
        terms = binary_splitting_terms(N, k).materialize()
        self.term_count = len(terms)
        self.d = (len(terms) - 1).bit_length()
        self.terms = terms + [SignedTerm(0, terms[0].breakpoints)] * ((1 << self.d) - len(terms))
        self.length = max(len(t.factors()) for t in terms)
        self.K, self.eps = Fraction(1 << self.d), as_fraction(eps)
        self.src, self.tgt, self.w = (n, s), (self.length, s + sum(family_bits(family))), w
        self.N, self.k = N, k
        self.measured = {}

    def segments(self, i):
        segs = self.terms[i].factors()
        last = segs[-1][1] if segs else 0
        return segs + [(last, last)] * (self.length - len(segs))

    def weight(self, i):
        return self.terms[i].sign * self.K

    def reduce(self, i, x):
        raise NotImplementedError("regular reductions act through rotations, not input maps")

    def reduced(self, prog, i, cache=None):
        return DerandProgram(as_rot_program(prog), self.segments(i), self.family, {} if cache is None else cache)


@dataclass
class DerandLevel:
    """One level of the regular estimator.

    family "mgg": complete lower levels and a powered MGG on top with lambda
    at most ``lam`` (or chosen so the certified tau is at most ``tau``);
    family "complete": exact mixing.  ``k`` defaults to
    ceil(log_{1/tau}(2/eps_p)).
    """

    k: int | None = None
    family: str = "mgg"
    lam: float | None = None
    tau: float = 0.1
    # filled in when built
    p: int = 0
    lam_measured: float = 0.0
    tau_cert: float = 0.0
    n: int = 0
    K: int = 0
    eps: float = 0.0
    degrees: list = field(default_factory=list)

    def record(self) -> dict:
        return {"kind": "derand-level", "k": self.k, "family": self.family, "lambda": self.lam,
                "tau": self.tau}

    @classmethod
    def from_record(cls, r: dict) -> "DerandLevel":
        if r.get("kind", "derand-level") != "derand-level":
            raise ValueError(f"not a derand-level stage: {r}")
        return cls(r.get("k"), r.get("family", "mgg"), r.get("lambda"), r.get("tau", 0.1))


def tau_certified(lam: float, N: int) -> float:
    """10 log N times the per-segment sv bound 11 lambda log N."""
    L = max(1, (N - 1).bit_length())
    return 10 * L * 11 * lam * L


def build_level(level: DerandLevel, n: int, s: int, w: int, eps_p: float) -> DerandReduction:
    L = max(1, (n - 1).bit_length())
    N = 1 << L
    if level.family == "complete":
        fam, lam = [Complete(1 << (s << t)) for t in range(L)], 0.0
    elif level.family == "mgg":
        target = level.lam if level.lam is not None else level.tau / (110 * L * L)
        fam = mgg_inw_family(s, L, target)
        lam = max(h.lam for h in fam if not isinstance(h, Complete))
    else:
        raise ValueError(f"unknown family {level.family!r}")
    tau = tau_certified(lam, N)
    if level.k is not None:
        k = level.k
    elif tau == 0:
        k = 0
    elif tau >= 1:
        raise ValueError(f"certified tau {tau:.3g} is not below 1; pass k explicitly")
    else:
        k = max(0, math.ceil(math.log(2 / eps_p) / math.log(1 / tau)))
    declared = w * tau ** k if tau > 0 else 0.0
    red = DerandReduction(n, s, w, k, fam, declared)
    level.k, level.p, level.lam_measured, level.tau_cert = k, L, lam, tau
    level.n, level.K, level.eps = red.length, red.term_count, declared
    level.degrees = [h.c.bit_length() - 1 for h in fam]
    red.measured = {"lambda": lam, "tau_cert": tau, "k": k, "padded_n": N, "budget": eps_p,
                    "terms": red.term_count}
    return red


def regular_chain(n: int, s: int, w: int, eps: float, schedule: Sequence[DerandLevel]) -> Reduction | None:
    """Compose the levels; level 1 gets eps/(2w), level p >= 2 shares eps/(2w) over the prior weights."""
    if not schedule:
        return None
    reds, shape = [], (n, s)
    pref = Fraction(1)
    for p, lv in enumerate(schedule):
        budget = eps / (2 * w) if p == 0 else eps / (2 * w * (len(schedule) - 1) * float(pref))
        red = build_level(lv, shape[0], shape[1], w, budget)
        reds.append(red)
        pref *= red.K
        shape = red.tgt
    chain = compose_chain(reds)
    chain.measured = {"levels": [r.summary() | {"measured": r.measured} for r in reds]}
    return chain


@dataclass
class RegularResult:
    value: float
    declared: float
    exact: float
    chain: Reduction | None


def _literal_value(g, cap: int) -> Fraction:
    """Walk every input of g through its rotations."""
    bits = g.n * g.s
    if bits > 62 or (1 << bits) > cap:
        raise SeedSpaceTooLarge(f"2^{bits} final inputs exceed cap {cap}")
    ys = np.arange(1 << bits, dtype=np.int64)
    u = np.full(ys.shape, g.start, dtype=np.int64)
    for t in range(g.n):
        sym = (ys >> ((g.n - 1 - t) * g.s)) & ((1 << g.s) - 1)
        u, _ = g.rot(t, u, sym)
    hits = int(np.isin(u, list(g.accept)).sum())
    return Fraction(hits, 1 << bits)


def regular_estimator(f: rb.Robp, eps: float, schedule: Sequence[DerandLevel], mode: str = "exact",
                      cap: int = 1 << 22) -> RegularResult:
    """Sum over index tuples of sign products times E_y f_{i_1..i_l}(y).

    ``exact`` evaluates E_y through exact walk matrices; ``exhaustive``
    enumerates the final inputs and walks them through nested rotations.
    """
    if rb.classify(f) == rb.RobpClass.GENERAL:
        raise ValueError("program is not regular")
    f = rb.labeled(f)
    prog = LabeledProgram(f)
    chain = regular_chain(f.n, f.s, f.w, eps, schedule)
    exact = float(rb.exact_expectation(f))
    if chain is None:
        val = _literal_value(prog, cap) if mode == "exhaustive" else uniform_value(prog)
        return RegularResult(float(val), 0.0, exact, None)
    if mode == "exact":
        val = chain.weighted_value(prog)
    elif mode == "exhaustive":
        cache: dict = {}
        acc = Fraction(0)
        for i in range(chain.n_index):
            wt = chain.weight(i)
            if wt != 0:
                acc += as_fraction(wt) * _literal_value(chain.reduced(prog, i, cache), cap)
        val = float(acc / chain.n_index)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return RegularResult(float(val), float(chain.eps), exact, chain)

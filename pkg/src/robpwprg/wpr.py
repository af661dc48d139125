"""Weighted pseudorandom reductions and weighted generators.

A reduction with index bits d, weight bound K and error eps claims, for every
program f of its source class,

    | E f  -  2^-d sum_i weight(i) E_x f(reduce(i, x)) |  <=  eps.

Declared K and eps are kept as Fractions so that composition metadata
(d1 + d2, K1 K2, eps1 + K1 eps2) is exact.

Reduced programs are lazy: they expose ``n, w, s, start, accept``,
``step(layer, states, symbols)`` and ``layer_mean(layer)`` (0-based layers),
and may carry ``layer_keys`` so that per-layer work can be shared between
indices.  ``reduced_robp`` materializes one when the alphabet is small.

Estimation modes:

* ``exhaustive`` walks every seed literally (subject to a cap);
* ``exact`` uses linearity: the inner input is uniform (or a generator whose
  segment means are exact), so E_x f(reduce(i, x)) is a product of exact
  layer means of the reduced program;
* ``montecarlo`` samples seeds and reports a standard error.  It certifies
  nothing.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from . import robp as rb
from .error_reduction import (SignedTerm, TermSet, binary_splitting_terms, richardson_bound,
                              richardson_terms)
from .generators import (NZ, Generator, Padded, SeedSpaceTooLarge, Uniform, exact_segment,
                         onehot_rows, run)
from .matrix import inf_norm
from .randomness import ExtractorSpec, SamplerSpec


class ReductionRefused(ValueError):
    """A stage's error hypothesis is not met by the measured quantities."""


def as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def accept_vector(prog) -> np.ndarray:
    v = np.zeros(prog.w)
    for a in prog.accept:
        v[a] = 1.0
    return v


def uniform_matrix(prog) -> np.ndarray:
    """Exact transition matrix of the whole program under uniform input."""
    return exact_segment(prog, 0, prog.n)


def uniform_value(prog) -> float:
    """E_x prog(x) for uniform x, by exact layer means."""
    v = np.zeros(prog.w)
    v[prog.start] = 1.0
    for j in range(prog.n):
        v = v @ prog.layer_mean(j)
    return float(v @ accept_vector(prog))


def run_from(prog, seqs: np.ndarray, offset: int, starts: np.ndarray) -> np.ndarray:
    states = np.asarray(starts, dtype=np.int64).copy()
    for j in range(seqs.shape[1]):
        states = prog.step(offset + j, states, seqs[:, j])
    return states


def _split_bits(value: int, widths: Sequence[int]) -> list[int]:
    out = []
    shift = sum(widths)
    for wd in widths:
        shift -= wd
        out.append((value >> shift) & ((1 << wd) - 1))
    return out


def _join_bits(values: Sequence[int], width: int) -> int:
    acc = 0
    for v in values:
        acc = (acc << width) | int(v)
    return acc


class Reduction:
    """Base class; subclasses set the metadata fields and the four hooks."""

    d: int
    K: Fraction
    eps: Fraction
    src: tuple
    tgt: tuple
    w: int
    name: str = "reduction"
    measured: dict

    @property
    def n_index(self) -> int:
        return 1 << self.d

    def reduce(self, i: int, x: Sequence[int]) -> tuple:
        raise NotImplementedError

    def weight(self, i: int):
        raise NotImplementedError

    def reduced(self, prog, i: int, cache: dict | None = None):
        raise NotImplementedError

    def weighted_value(self, prog, terminal: Callable = uniform_value, cache: dict | None = None) -> float:
        """2^-d sum_i weight(i) terminal(reduced(prog, i))."""
        cache = {} if cache is None else cache
        acc = 0.0
        for i in range(self.n_index):
            wt = self.weight(i)
            if wt == 0:
                continue
            acc += float(wt) * terminal(self.reduced(prog, i, cache))
        return acc / self.n_index

    def check_source(self, prog):
        n0, s0 = self.src
        if prog.n != n0 or (self.w is not None and prog.w != self.w) or prog.s != s0:
            raise ValueError(f"program shape ({prog.n}, {prog.s}, {prog.w}) does not match "
                             f"reduction source ({n0}, {s0}, {self.w})")

    def summary(self) -> dict:
        return {"name": self.name, "index_bits": self.d, "K": str(self.K), "eps": float(self.eps),
                "src": list(self.src), "tgt": list(self.tgt), "w": self.w}


class IdentityReduction(Reduction):
    name = "identity"

    def __init__(self, n: int, s: int, w: int):
        self.d, self.K, self.eps = 0, Fraction(1), Fraction(0)
        self.src = self.tgt = (n, s)
        self.w = w
        self.measured = {}

    def reduce(self, i, x):
        return tuple(x)

    def weight(self, i):
        return Fraction(1)

    def reduced(self, prog, i, cache=None):
        return prog


class ComposedReduction(Reduction):
    """Index (i1, i2) is i1 * 2^d2 + i2; weights multiply."""

    name = "compose"

    def __init__(self, r1: Reduction, r2: Reduction):
        if tuple(r1.tgt) != tuple(r2.src) or r1.w != r2.w:
            raise ValueError(f"shape mismatch: {r1.tgt} -> {r2.src}")
        self.r1, self.r2 = r1, r2
        self.d = r1.d + r2.d
        self.K = as_fraction(r1.K) * as_fraction(r2.K)
        self.eps = as_fraction(r1.eps) + as_fraction(r1.K) * as_fraction(r2.eps)
        self.src, self.tgt, self.w = r1.src, r2.tgt, r1.w
        self.measured = {}

    def stages(self) -> list[Reduction]:
        out = []
        for r in (self.r1, self.r2):
            out.extend(r.stages() if isinstance(r, ComposedReduction) else [r])
        return out

    def _split(self, i):
        return i >> self.r2.d, i & ((1 << self.r2.d) - 1)

    def reduce(self, i, x):
        i1, i2 = self._split(i)
        return self.r1.reduce(i1, self.r2.reduce(i2, x))

    def weight(self, i):
        i1, i2 = self._split(i)
        return self.r1.weight(i1) * self.r2.weight(i2)

    def reduced(self, prog, i, cache=None):
        i1, i2 = self._split(i)
        return self.r2.reduced(self.r1.reduced(prog, i1, cache), i2, cache)

    def weighted_value(self, prog, terminal=uniform_value, cache=None):
        cache = {} if cache is None else cache
        acc = 0.0
        for i1 in range(self.r1.n_index):
            wt = self.r1.weight(i1)
            if wt == 0:
                continue
            inner = self.r1.reduced(prog, i1, cache)
            acc += float(wt) * self.r2.weighted_value(inner, terminal, cache)
        return acc / self.r1.n_index


def compose(r1: Reduction, r2: Reduction) -> Reduction:
    return ComposedReduction(r1, r2)


def compose_chain(reductions: Sequence[Reduction]) -> Reduction:
    if not reductions:
        raise ValueError("empty chain")
    out = reductions[0]
    for r in reductions[1:]:
        out = compose(out, r)
    return out


def chain_error(Ks: Sequence, epss: Sequence) -> Fraction:
    """sum_i (prod_{j<i} K_j) eps_i."""
    total, pref = Fraction(0), Fraction(1)
    for K, e in zip(Ks, epss):
        total += pref * as_fraction(e)
        pref *= as_fraction(K)
    return total


# programs produced by segment reductions

class SegmentProgram:
    """Layer t reads one base seed and runs the parent over segment t with G(seed)_len."""

    def __init__(self, parent, segments: Sequence[tuple], base: Generator, cache: dict):
        self.parent, self.segments, self.base = parent, list(segments), base
        self.n, self.w, self.s = len(self.segments), parent.w, base.seed_bits
        self.start, self.accept = parent.start, parent.accept
        self.layer_keys = [(id(parent), "seg", a, b) for a, b in self.segments]
        self._cache = cache
        cache.setdefault(("keepalive", id(parent)), parent)

    def _table(self, a, b):
        """State maps for every prefix seed of the segment, when there are few of them."""
        key = (id(self.parent), "tab", a, b)
        if key not in self._cache:
            bits = self.base.prefix_bits(b - a)
            if bits > 20:
                self._cache[key] = None
            else:
                seqs = self.base.eval_prefix_many(np.arange(1 << bits, dtype=np.int64), b - a)
                self._cache[key] = run(self.parent, seqs, a)
        return self._cache[key]

    def step(self, layer, states, symbols):
        a, b = self.segments[layer]
        states = np.asarray(states, dtype=np.int64)
        symbols = np.asarray(symbols, dtype=np.int64)
        shape = np.broadcast(states, symbols).shape
        if a == b:
            return np.broadcast_to(states, shape).copy()
        shift = self.s - self.base.prefix_bits(b - a)
        tab = self._table(a, b)
        if tab is not None:
            return tab[symbols >> shift, states]
        st, sy = np.broadcast_to(states, shape).ravel(), np.broadcast_to(symbols, shape).ravel()
        seqs = self.base.eval_prefix_many(sy >> shift, b - a)
        return run_from(self.parent, seqs, a, st).reshape(shape)

    def layer_mean(self, layer):
        a, b = self.segments[layer]
        if a == b:
            return np.eye(self.w)
        key = (id(self.parent), "mean", a, b)
        if key not in self._cache:
            self._cache[key] = self.base.segment_mean(self.parent, a, b - a)
        return self._cache[key]


class SegmentReduction(Reduction):
    """Index i selects a signed breakpoint term; x_j seeds the base on segment j."""

    def __init__(self, terms: Sequence[SignedTerm], base: Generator, n: int, s: int, w: int,
                 eps, name: str, length: int | None = None, source_n: int | None = None):
        if base.s != s or base.n < n:
            raise ValueError("base generator must output at least n symbols over s bits")
        self.source_n = n if source_n is None else source_n
        count = len(terms)
        self.d = max(0, math.ceil(math.log2(count))) if count > 1 else 0
        self.terms = list(terms) + [SignedTerm(0, terms[0].breakpoints)] * ((1 << self.d) - count)
        self.term_count = count
        self.base = base
        self.length = length if length is not None else max(len(t.breakpoints) for t in terms)
        self.K = Fraction(1 << self.d)
        self.eps = as_fraction(eps)
        self.src, self.tgt, self.w = (self.source_n, s), (self.length, base.seed_bits), w
        self.name = name
        self.n_padded = n
        self.measured = {}

    def segments(self, i: int) -> list[tuple]:
        segs = self.terms[i].factors()
        last = segs[-1][1] if segs else 0
        return segs + [(last, last)] * (self.length - len(segs))

    def weight(self, i):
        return self.terms[i].sign * self.K

    def reduce(self, i, x):
        if len(x) != self.length:
            raise ValueError("inner input has the wrong length")
        out = []
        for (a, b), z in zip(self.segments(i), x):
            if b > a:
                shift = self.base.seed_bits - self.base.prefix_bits(b - a)
                out.extend(int(v) for v in self.base.eval_prefix_many(np.array([z >> shift]), b - a)[0])
        return tuple(out[:self.source_n])

    def reduced(self, prog, i, cache=None):
        cache = {} if cache is None else cache
        if self.n_padded > self.source_n:
            key = ("padded", id(prog), self.n_padded)
            if key not in cache:
                cache[("keepalive", id(prog))] = prog
                cache[key] = Padded(prog, 0, self.source_n, self.n_padded)
            prog = cache[key]
        return SegmentProgram(prog, self.segments(i), self.base, cache)


def segment_errors(base: Generator, prog, n: int, pairs=None) -> dict:
    """Infinity-norm error of the base's segment means on every (a, b), b > a + 1."""
    out = {}
    pairs = pairs if pairs is not None else [(a, b) for a in range(n) for b in range(a + 2, n + 1)]
    for a, b in pairs:
        out[(a, b)] = inf_norm(base.segment_mean(prog, a, b - a) - exact_segment(prog, a, b))
    return out


def measure_base_error(base: Generator, programs: Sequence, n: int) -> float:
    return max((max(segment_errors(base, f, n).values(), default=0.0) for f in programs), default=0.0)


def length_reduction(base: Generator, n: int, s: int, w: int, k: int, eps_base: float,
                     eps: float | None = None) -> SegmentReduction:
    """Richardson length reduction over a base generator.

    ``eps_base`` is the measured infinity-norm error of the base on segments
    of length >= 2; it must be at most eps / (2 (n + 1)).  With ``eps``
    omitted the smallest admissible value is used.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be odd")
    eps = 2 * (n + 1) * as_fraction(eps_base) if eps is None else as_fraction(eps)
    if as_fraction(eps_base) > eps / (2 * (n + 1)):
        raise ReductionRefused(f"base error {float(eps_base):.3g} exceeds eps/(2(n+1)) = "
                               f"{float(eps / (2 * (n + 1))):.3g}")
    terms = richardson_terms(n, k).materialize()
    declared = eps ** ((k + 1) // 2) * (n + 1)
    red = SegmentReduction(terms, base, n, s, w, declared, "length", length=k)
    red.measured = {"eps_base": float(eps_base), "eps": float(eps)}
    return red


# alphabet reduction

class ExtProgram:
    """prog with every symbol y replaced by Ext(x, y) for a fixed source x."""

    def __init__(self, parent, ext: ExtractorSpec, x: int):
        self.parent, self.ext, self.x = parent, ext, x
        self.n, self.w, self.s = parent.n, parent.w, ext.d_ext
        self.start, self.accept = parent.start, parent.accept

    def step(self, layer, states, symbols):
        return self.parent.step(layer, states, self.ext.eval(self.x, symbols))

    def layer_mean(self, layer):
        ys = np.arange(1 << self.ext.d_ext)
        tgt = self.step(layer, np.arange(self.w)[:, None], ys[None, :])
        return onehot_rows(tgt, self.w).mean(axis=1)


class AlphabetReduction(Reduction):
    name = "alphabet"

    def __init__(self, ext: ExtractorSpec, n: int, s: int, w: int, eps):
        self.ext = ext
        self.d, self.K, self.eps = ext.n_src, Fraction(1), as_fraction(eps)
        self.src, self.tgt, self.w = (n, s), (n, ext.d_ext), w
        self.measured = {}

    def weight(self, i):
        return Fraction(1)

    def reduce(self, i, x):
        return tuple(int(v) for v in self.ext.eval(i, np.asarray(x, dtype=np.int64)))

    def reduced(self, prog, i, cache=None):
        return ExtProgram(prog, self.ext, i)

    def source_layer_means(self, prog, layer: int, cache: dict) -> np.ndarray:
        """(2^n_src, w, w): exact layer mean of ExtProgram(prog, ., x) for every x."""
        keys = getattr(prog, "layer_keys", None)
        key = (keys[layer], "ext", id(self.ext)) if keys else None
        if key is not None and key in cache:
            return cache[key]
        tab = cache.get(("ext-table", id(self.ext)))
        if tab is None:
            tab = cache[("ext-table", id(self.ext))] = self.ext.table()
            cache[("keepalive", id(self.ext))] = self.ext
        w = prog.w
        out = np.zeros((tab.shape[0], w, w))
        for u in range(w):
            tgt = prog.step(layer, np.full(tab.shape, u, dtype=np.int64), tab)
            for v in range(w):
                out[:, u, v] = (tgt == v).mean(axis=1)
        if key is not None:
            cache[key] = out
        return out

    def weighted_value(self, prog, terminal=uniform_value, cache=None):
        if terminal is not uniform_value:
            return super().weighted_value(prog, terminal, cache)
        cache = {} if cache is None else cache
        vec = np.zeros((1 << self.d, prog.w))
        vec[:, prog.start] = 1.0
        for j in range(prog.n):
            vec = np.einsum("xu,xuv->xv", vec, self.source_layer_means(prog, j, cache))
        return float((vec @ accept_vector(prog)).mean())


def alphabet_reduction(ext: ExtractorSpec, n: int, s: int, w: int, eps: float | None = None) -> AlphabetReduction:
    """NZ alphabet reduction: index = source x, symbol y -> Ext(x, y), weight 1.

    The extractor's certified error must hold at min-entropy n_src - ceil(log2 w)
    and be at most eps / (3 n).
    """
    if ext.m_out != s:
        raise ValueError("extractor output must equal the alphabet bits")
    need_k = ext.n_src - math.ceil(math.log2(w)) if w > 1 else ext.n_src
    if ext.k_min > need_k:
        raise ReductionRefused(f"extractor certified at k={ext.k_min}, but only {need_k} bits of "
                               "entropy survive conditioning on the state")
    eps = 3 * n * as_fraction(ext.eps_ext) if eps is None else as_fraction(eps)
    if as_fraction(ext.eps_ext) > eps / (3 * n):
        raise ReductionRefused(f"extractor error {ext.eps_ext:.3g} exceeds eps/(3n) = {float(eps / (3 * n)):.3g}")
    red = AlphabetReduction(ext, n, s, w, eps)
    red.measured = {"eps_ext": ext.eps_ext, "eps_method": ext.eps_method}
    return red


# materialization and measurement

def reduced_robp(robp, red: Reduction, i: int, cap: int = 1 << 16) -> rb.Robp:
    """The reduced program for index i as an explicit Robp (alphabet at most ``cap``)."""
    red.check_source(robp)
    g = red.reduced(robp, i, {})
    n1, s1 = red.tgt
    if (1 << s1) > cap:
        raise SeedSpaceTooLarge(f"reduced alphabet 2^{s1} exceeds cap {cap}")
    syms = np.arange(1 << s1, dtype=np.int64)
    states = np.arange(robp.w, dtype=np.int64)
    trans = np.stack([g.step(j, states[:, None], syms[None, :]) for j in range(n1)])
    return rb.Robp(trans, s1, robp.start, robp.accept)


def reduction_error(red: Reduction, prog) -> float:
    """Measured |E f - 2^-d sum_i weight(i) E_x f(R_i(x))|, exact by linearity."""
    return abs(uniform_value(prog) - red.weighted_value(prog))


def reduction_error_exhaustive(red: Reduction, robp: rb.Robp, cap: int = 1 << 18) -> float:
    """The same quantity by walking every (i, x) through ``reduce``."""
    n1, s1 = red.tgt
    total_bits = red.d + n1 * s1
    if total_bits > 62 or (1 << total_bits) > cap:
        raise SeedSpaceTooLarge(f"2^{total_bits} (index, input) pairs exceed cap {cap}")
    acc = Fraction(0)
    inner = Uniform(n1, s1)
    xs = inner.eval_many(np.arange(1 << (n1 * s1), dtype=np.int64)) if n1 * s1 else np.zeros((1, 0), dtype=np.int64)
    for i in range(red.n_index):
        wt = red.weight(i)
        if wt == 0:
            continue
        hits = sum(rb.evaluate(robp, red.reduce(i, tuple(x))) for x in xs)
        acc += as_fraction(wt) * Fraction(hits, len(xs))
    est = acc / red.n_index
    return float(abs(rb.exact_expectation(robp, "rational") - est))


# weighted generators

class Wprg:
    seed_bits: int
    W: Fraction
    eps: Fraction
    n: int
    s: int

    def eval(self, seed: int) -> tuple[tuple, Any]:
        raise NotImplementedError

    def exact_estimate(self, prog) -> float:
        raise NotImplementedError


class ReductionWprg(Wprg):
    """Seed = (index bits | tail seed); output reduce(i, tail(seed')) with weight(i)."""

    def __init__(self, red: Reduction, tail: Generator | None = None, tail_eps=0):
        n1, s1 = red.tgt
        self.red = red
        self.tail = Uniform(n1, s1) if tail is None else tail
        if self.tail.n != n1 or self.tail.s != s1:
            raise ValueError("tail generator shape does not match the reduction target")
        self.tail_eps = as_fraction(tail_eps)
        self.seed_bits = red.d + self.tail.seed_bits
        self.W = as_fraction(red.K)
        self.eps = as_fraction(red.eps) + as_fraction(red.K) * self.tail_eps
        self.n, self.s = red.src

    def eval(self, seed):
        tb = self.tail.seed_bits
        i, z = seed >> tb, seed & ((1 << tb) - 1)
        inner = self.tail.eval(z) if tb else ()
        return self.red.reduce(i, inner), self.red.weight(i)

    def _terminal(self, prog) -> float:
        if isinstance(self.tail, Uniform):
            return uniform_value(prog)
        v = np.zeros(prog.w)
        v[prog.start] = 1.0
        return float(v @ self.tail.segment_mean(prog, 0, prog.n) @ accept_vector(prog))

    def exact_estimate(self, prog):
        self.red.check_source(prog)
        term = uniform_value if isinstance(self.tail, Uniform) else self._terminal
        return self.red.weighted_value(prog, term)


def wprg_from_reduction(red: Reduction, tail: Generator | None = None, tail_eps=0) -> ReductionWprg:
    return ReductionWprg(red, tail, tail_eps)


@dataclass
class Estimate:
    value: float
    mode: str
    certified: bool
    stderr: float = 0.0
    seeds: int = 0


def estimate(wprg: Wprg, robp, mode: str = "exact", cap: int = 1 << 20, samples: int = 4096,
             rng: np.random.Generator | None = None, rational: bool = False) -> Estimate:
    if mode == "exact":
        return Estimate(wprg.exact_estimate(robp), mode, True)
    if mode == "exhaustive":
        if wprg.seed_bits > 62 or (1 << wprg.seed_bits) > cap:
            raise SeedSpaceTooLarge(f"2^{wprg.seed_bits} seeds exceed cap {cap}")
        acc = Fraction(0) if rational else 0.0
        for seed in range(1 << wprg.seed_bits):
            x, wt = wprg.eval(seed)
            if wt != 0 and rb.evaluate(robp, x):
                acc += as_fraction(wt) if rational else float(wt)
        val = acc / (1 << wprg.seed_bits)
        return Estimate(val if rational else float(val), mode, True, seeds=1 << wprg.seed_bits)
    if mode == "montecarlo":
        if rng is None:
            raise ValueError("montecarlo mode needs an explicit rng")
        nbytes = (wprg.seed_bits + 7) // 8
        vals = np.empty(samples)
        for t in range(samples):
            seed = int.from_bytes(rng.bytes(nbytes), "big") & ((1 << wprg.seed_bits) - 1) if nbytes else 0
            x, wt = wprg.eval(seed)
            vals[t] = float(wt) * rb.evaluate(robp, x)
        return Estimate(float(vals.mean()), mode, False, float(vals.std(ddof=1) / math.sqrt(samples)), samples)
    raise ValueError(f"unknown mode {mode!r}")


# pipelines

def build_stage(stage: dict, n: int, s: int, w: int, corpus: Sequence | None = None) -> Reduction:
    """One schedule record -> reduction on shape (n, s, w)."""
    from .generators import generator_from_descriptor
    from .randomness import make_extractor

    kind = stage["kind"]
    if kind == "length":
        gdesc = dict(stage["generator"])
        if gdesc["kind"] == "nz":
            e = gdesc["ext"]
            ext = make_extractor(e["n_src"], e["d_ext"], s, e.get("k_min", e["n_src"] - math.ceil(math.log2(max(w, 2)))))
            base = NZ(ext, n)
        else:
            base = generator_from_descriptor(gdesc)
        if "eps_base" in stage:
            eps_base = stage["eps_base"]
        elif corpus is not None:
            eps_base = measure_base_error(base, corpus, n)
        else:
            raise ReductionRefused("length stage needs a measured base error or a corpus to measure it on")
        return length_reduction(base, n, s, w, stage.get("k", 1), eps_base, stage.get("epsilon"))
    if kind == "alphabet":
        e = stage["extractor"]
        need_k = e["n_src"] - math.ceil(math.log2(w)) if w > 1 else e["n_src"]
        ext = make_extractor(e["n_src"], e["d_ext"], s, e.get("k_min", need_k))
        return alphabet_reduction(ext, n, s, w, stage.get("epsilon"))
    if kind == "identity":
        return IdentityReduction(n, s, w)
    raise ValueError(f"unknown stage kind {kind!r}")


def main_reduction_pipeline(n: int, s: int, w: int, schedule: Sequence[dict],
                            corpus: Sequence | None = None) -> Reduction:
    """Compose the schedule's stages in order; only the first stage sees ``corpus``."""
    stages, shape = [], (n, s)
    for idx, st in enumerate(schedule):
        r = build_stage(st, shape[0], shape[1], w, corpus if idx == 0 else None)
        stages.append(r)
        shape = r.tgt
    red = compose_chain(stages)
    red.measured = {"stages": [r.summary() | {"measured": r.measured} for r in stages]}
    return red


# sampler amplification

def richardson_degree_for(n: int, w: int, eps: float) -> int:
    k = max(1, math.ceil(math.log(n / eps) / math.log(n * w)))
    return k if k % 2 else k + 1


@dataclass
class SamplerParams:
    k: int
    alpha: float
    gamma: float


def sampler_parameters(n: int, w: int, eps: float, W: float) -> SamplerParams:
    """k = log(n/eps)/log(nw) (rounded up to odd), alpha = 1/(W w^2 (n+1)^2),
    gamma = eps / (2 (2n)^k W^(k+1) w^2)."""
    k = richardson_degree_for(n, w, eps)
    alpha = 1.0 / (W * w * w * (n + 1) ** 2)
    gamma = eps / (2 * (2 * n) ** k * W ** (k + 1) * w * w)
    return SamplerParams(k, alpha, gamma)


class SamplerWprg(Wprg):
    """G(x, y_1..y_k, i) = G_0(Samp(x, y_1))_{len_1}, ..., G_0(Samp(x, y_k))_{len_k},
    weight sigma_i K prod_j sigma_0(Samp(x, y_j)).

    Seed layout: | x : r | y_1 : p | ... | y_k : p | i : index bits |.
    """

    def __init__(self, base: Wprg, samp: SamplerSpec, k: int, n: int, w: int, eps):
        if samp.q != base.seed_bits:
            raise ValueError("sampler output must be a base seed")
        self.base, self.samp, self.k = base, samp, k
        self.n, self.s, self.w = n, base.s, w
        terms = richardson_terms(n, k).materialize()
        self.index_bits = max(0, math.ceil(math.log2(len(terms)))) if len(terms) > 1 else 0
        self.terms = terms + [SignedTerm(0, terms[0].breakpoints)] * ((1 << self.index_bits) - len(terms))
        self.K = Fraction(1 << self.index_bits)
        self.seed_length = samp.r + k * samp.p
        self.seed_bits = self.seed_length + self.index_bits
        self.W = self.K * as_fraction(base.W) ** k
        self.eps = as_fraction(eps)

    def _base_table(self):
        if not hasattr(self, "_tab"):
            outs, wts = [], []
            for z in range(1 << self.base.seed_bits):
                x, wt = self.base.eval(z)
                outs.append(x)
                wts.append(float(wt))
            self._tab = (np.array(outs, dtype=np.int64), np.array(wts))
        return self._tab

    def eval(self, seed):
        p, k = self.samp.p, self.k
        i = seed & ((1 << self.index_bits) - 1)
        rest = seed >> self.index_bits
        parts = _split_bits(rest, [self.samp.r] + [p] * k)
        x, ys = parts[0], parts[1:]
        outs, wts = self._base_table()
        term = self.terms[i]
        seq, wt = [], Fraction(term.sign) * self.K
        for (a, b), y in zip(term.factors(), ys):
            z = int(self.samp.eval(np.array([x]), np.array([y]))[0])
            seq.extend(int(v) for v in outs[z, :b - a])
            wt *= as_fraction(wts[z])
        return tuple(seq), wt

    def sampled_tables(self, prog) -> dict:
        """B^x_{a,b} for every x at once, shape (2^r, w, w), exact through the sampler's averaging matrix."""
        outs, wts = self._base_table()
        avg = self.samp.averaging_matrix()
        tables = {}
        for a in range(self.n + 1):
            for b in range(a + 1, self.n + 1):
                maps = run(prog, outs[:, :b - a], a)
                mats = onehot_rows(maps, prog.w) * wts[:, None, None]
                tables[(a, b)] = (avg @ mats.reshape(mats.shape[0], -1)).reshape(-1, prog.w, prog.w)
        return tables

    def exact_estimate(self, prog):
        tables = self.sampled_tables(prog)
        nx = 1 << self.samp.r
        v0 = np.zeros((nx, prog.w))
        v0[:, prog.start] = 1.0
        acc = np.zeros(nx)
        acc_vec = accept_vector(prog)
        for t in self.terms:
            if t.sign == 0:
                continue
            v = v0
            for a, b in t.factors():
                if b > a:
                    v = np.einsum("xu,xuv->xv", v, tables[(a, b)])
            acc += t.sign * (v @ acc_vec)
        return float(acc.mean())


def sampler_amplified_wprg(base: Wprg, samp: SamplerSpec, k: int, n: int, w: int, eps,
                           base_error: float) -> SamplerWprg:
    """Refuses unless the measured base error is at most 1/(2 w (n+1)^2)."""
    if base_error > 1.0 / (2 * w * (n + 1) ** 2):
        raise ReductionRefused(f"base error {base_error:.3g} exceeds 1/(2w(n+1)^2)")
    return SamplerWprg(base, samp, k, n, w, eps)


def timed(fn, *args, **kwargs):
    t = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, (time.perf_counter() - t) * 1000.0

"""Seeded symbol-sequence generators and their error oracles.

Seeds are integers read most significant bit first.  Every generator here
has the prefix property: the first ``m`` output symbols depend only on the
top ``prefix_bits(m)`` bits of the seed, and equal the output of the same
construction at length ``m`` on those bits.

INW seed layout (T = log2 n levels, c_t = degree of H_t)::

    | x : s bits | y_1 : log c_1 | y_2 : log c_2 | ... | y_T : log c_T |

so the level-t seed is the top s + sum_{j<=t} log c_j bits and
INW_t(v * c_t + y) = INW_{t-1}(v) ++ INW_{t-1}(H_t[v, y]).

NZ seed layout::

    | x : n_src bits | y_1 : d_ext | ... | y_n : d_ext |

Any object with ``n``, ``w``, ``step(layer, states, symbols)`` and
``layer_mean(layer)`` (0-based layers) can be measured; ``Robp`` qualifies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import robp as rb
from .matrix import entrywise_max, sv_approx_error
from .randomness import Complete, Expander, ExtractorSpec, expander_from_descriptor, make_extractor

DEFAULT_CAP = 1 << 24


class SeedSpaceTooLarge(ValueError):
    pass


def _check_cap(bits: int, cap: int):
    if bits > 62 or (1 << bits) > cap:
        raise SeedSpaceTooLarge(f"2^{bits} seeds exceed the enumeration cap {cap}")


def onehot_rows(maps: np.ndarray, w: int) -> np.ndarray:
    """(..., w) state maps -> (..., w, w) 0/1 transition matrices."""
    out = np.zeros(maps.shape + (w,))
    np.put_along_axis(out, maps[..., None], 1.0, axis=-1)
    return out


class Padded:
    """View of ``prog`` layers [offset, offset+m) extended by identity layers to ``total``."""

    def __init__(self, prog, offset: int, m: int, total: int):
        self.prog, self.offset, self.m, self.n = prog, offset, m, total
        self.w = prog.w
        self.s = getattr(prog, "s", None)
        self.start = getattr(prog, "start", 0)
        self.accept = getattr(prog, "accept", frozenset())

    def step(self, layer, states, symbols):
        if layer < self.m:
            return self.prog.step(self.offset + layer, states, symbols)
        return np.broadcast_to(states, np.broadcast(states, symbols).shape).copy()

    def layer_mean(self, layer):
        if layer < self.m:
            return self.prog.layer_mean(self.offset + layer)
        return np.eye(self.w)


def exact_segment(prog, lo: int, hi: int) -> np.ndarray:
    m = np.eye(prog.w)
    for i in range(lo, hi):
        m = m @ prog.layer_mean(i)
    return m


def run(prog, seqs: np.ndarray, offset: int = 0, start=None) -> np.ndarray:
    """Final states after feeding each row of ``seqs`` from layer ``offset``.

    With ``start=None`` every state is started, giving an (N, w) array of maps.
    """
    seqs = np.asarray(seqs, dtype=np.int64)
    if start is None:
        states = np.broadcast_to(np.arange(prog.w), (seqs.shape[0], prog.w)).copy()
        for j in range(seqs.shape[1]):
            states = prog.step(offset + j, states, seqs[:, j:j + 1])
        return states
    states = np.full(seqs.shape[0], start, dtype=np.int64)
    for j in range(seqs.shape[1]):
        states = prog.step(offset + j, states, seqs[:, j])
    return states


class Generator:
    seed_bits: int
    n: int
    s: int

    def eval_many(self, seeds) -> np.ndarray:
        raise NotImplementedError

    def eval(self, seed: int) -> tuple:
        if not 0 <= seed < 1 << self.seed_bits:
            raise ValueError("seed out of range")
        return tuple(int(x) for x in self.eval_many(np.array([seed]))[0])

    def prefix_bits(self, m: int) -> int:
        raise NotImplementedError

    def eval_prefix_many(self, prefixes, m: int) -> np.ndarray:
        """Outputs truncated to m symbols, indexed by the top prefix_bits(m) seed bits."""
        raise NotImplementedError

    def segment_mean(self, prog, offset: int, m: int) -> np.ndarray:
        """E over seeds of the transition matrix of layers [offset, offset+m) on G(seed)_m."""
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError


class Uniform(Generator):
    """True randomness: the seed is the input itself."""

    def __init__(self, n: int, s: int):
        self.n, self.s, self.seed_bits = n, s, n * s

    def eval_many(self, seeds):
        seeds = np.asarray(seeds, dtype=np.int64)
        shifts = self.s * np.arange(self.n - 1, -1, -1)
        return (seeds[:, None] >> shifts) & ((1 << self.s) - 1)

    def prefix_bits(self, m):
        return m * self.s

    def eval_prefix_many(self, prefixes, m):
        return Uniform(m, self.s).eval_many(prefixes)

    def segment_mean(self, prog, offset, m):
        return exact_segment(prog, offset, offset + m)

    def descriptor(self):
        return {"kind": "uniform", "n": self.n, "s": self.s}


class INW(Generator):
    def __init__(self, family: Sequence[Expander], s: int):
        self.family, self.s = list(family), s
        self.levels = len(self.family)
        self.n = 1 << self.levels
        size = 1 << s
        for t, h in enumerate(self.family, 1):
            if h.D != size:
                raise ValueError(f"H_{t} has {h.D} vertices, expected {size}")
            size *= h.c
        self.bits = [s]
        for h in self.family:
            self.bits.append(self.bits[-1] + h.log_c)
        self.seed_bits = self.bits[-1]

    def level_for(self, m: int) -> int:
        if not 1 <= m <= self.n:
            raise ValueError("prefix length out of range")
        return (m - 1).bit_length()

    def prefix_bits(self, m):
        return self.bits[self.level_for(m)]

    def _level_eval(self, t: int, v: np.ndarray) -> np.ndarray:
        if t == 0:
            return v[:, None]
        h = self.family[t - 1]
        hi, y = v // h.c, v % h.c
        return np.concatenate([self._level_eval(t - 1, hi),
                               self._level_eval(t - 1, h.rot(hi, y)[0])], axis=1)

    def eval_many(self, seeds):
        if self.seed_bits > 62:
            raise SeedSpaceTooLarge("seeds wider than 62 bits are only measured through transition matrices")
        return self._level_eval(self.levels, np.asarray(seeds, dtype=np.int64))

    def eval_prefix_many(self, prefixes, m):
        t = self.level_for(m)
        if self.bits[t] > 62:
            raise SeedSpaceTooLarge("prefix seed wider than 62 bits")
        return self._level_eval(t, np.asarray(prefixes, dtype=np.int64))[:, :m]

    def seed_maps(self, prog, offset: int, t: int, cap: int = DEFAULT_CAP) -> np.ndarray:
        """(S_t, w) array: state map of layers [offset, offset+2^t) for every level-t seed."""
        if (1 << self.bits[t]) * prog.w > cap:
            raise SeedSpaceTooLarge(f"level {t} has 2^{self.bits[t]} seeds")
        if t == 0:
            x = np.arange(1 << self.s)
            return prog.step(offset, np.arange(prog.w)[None, :], x[:, None])
        h = self.family[t - 1]
        left = self.seed_maps(prog, offset, t - 1, cap)
        right = self.seed_maps(prog, offset + (1 << (t - 1)), t - 1, cap)
        v = np.repeat(np.arange(left.shape[0]), h.c)
        y = np.tile(np.arange(h.c), left.shape[0])
        nb = h.rot(v, y)[0]
        return np.take_along_axis(right[nb], left[v], axis=1)

    def level_mean(self, prog, offset: int, t: int, cap: int = DEFAULT_CAP) -> np.ndarray:
        """Exact E over level-t seeds of the segment matrix at ``offset``.

        Complete levels mix perfectly, so their mean is the product of the
        two halves' means.  Otherwise the right half is averaged through the
        transition matrix of H_t, which needs per-seed maps one level down.
        """
        if t == 0:
            return prog.layer_mean(offset)
        h = self.family[t - 1]
        half = 1 << (t - 1)
        if isinstance(h, Complete):
            return self.level_mean(prog, offset, t - 1, cap) @ self.level_mean(prog, offset + half, t - 1, cap)
        left = self.seed_maps(prog, offset, t - 1, cap)
        right = onehot_rows(self.seed_maps(prog, offset + half, t - 1, cap), prog.w)
        mixed = (h.transition() @ right.reshape(right.shape[0], -1)).reshape(right.shape)
        rows = mixed[np.arange(left.shape[0])[:, None], left]
        return rows.mean(axis=0)

    def segment_mean(self, prog, offset, m, cap: int = DEFAULT_CAP):
        t = self.level_for(m)
        view = prog if m == 1 << t else Padded(prog, offset, m, 1 << t)
        return self.level_mean(view, offset if view is prog else 0, t, cap)

    def descriptor(self):
        return {"kind": "inw", "s": self.s, "family": [h.descriptor() for h in self.family]}


class NZ(Generator):
    """NZ(x, y_1..y_n) = Ext(x, y_1), ..., Ext(x, y_n)."""

    def __init__(self, ext: ExtractorSpec, n: int):
        if n < 1:
            raise ValueError("n must be positive")
        self.ext, self.n, self.s = ext, n, ext.m_out
        self.seed_bits = ext.n_src + n * ext.d_ext

    def prefix_bits(self, m):
        if not 1 <= m <= self.n:
            raise ValueError("prefix length out of range")
        return self.ext.n_src + m * self.ext.d_ext

    def eval_prefix_many(self, prefixes, m):
        if self.prefix_bits(m) > 62:
            raise SeedSpaceTooLarge("prefix seed wider than 62 bits")
        prefixes = np.asarray(prefixes, dtype=np.int64)
        d = self.ext.d_ext
        x = prefixes >> (m * d)
        shifts = d * np.arange(m - 1, -1, -1)
        y = (prefixes[:, None] >> shifts) & ((1 << d) - 1)
        return self.ext.eval(x[:, None], y)

    def eval_many(self, seeds):
        return self.eval_prefix_many(seeds, self.n)

    def source_means(self, prog, offset: int, m: int) -> np.ndarray:
        """(2^n_src, w, w): for each fixed source x, the exact segment matrix over the y's."""
        tab = self.ext.table()
        nx = tab.shape[0]
        w = prog.w
        acc = np.broadcast_to(np.eye(w), (nx, w, w)).copy()
        states = np.arange(w)
        for j in range(m):
            tgt = prog.step(offset + j, states[None, :, None], tab[:, None, :])
            step = np.zeros((nx, w, w))
            xi = np.repeat(np.arange(nx), w * tab.shape[1])
            ui = np.tile(np.repeat(states, tab.shape[1]), nx)
            np.add.at(step, (xi, ui, tgt.ravel()), 1.0 / tab.shape[1])
            acc = acc @ step
        return acc

    def segment_mean(self, prog, offset, m):
        return self.source_means(prog, offset, m).mean(axis=0)

    def descriptor(self):
        return {"kind": "nz", "n": self.n, "ext": self.ext.descriptor()}


def inw_build(family: Sequence[Expander], s: int) -> INW:
    return INW(family, s)


def inw_eval(gen: INW, seed: int) -> tuple:
    return gen.eval(seed)


def nz_build(ext: ExtractorSpec, n: int) -> NZ:
    return NZ(ext, n)


def nz_eval(gen: NZ, seed: int) -> tuple:
    return gen.eval(seed)


def generator_from_descriptor(desc: dict) -> Generator:
    kind = desc["kind"]
    if kind == "uniform":
        return Uniform(desc["n"], desc["s"])
    if kind == "inw":
        return INW([expander_from_descriptor(h) for h in desc["family"]], desc["s"])
    if kind == "nz":
        e = desc["ext"]
        return NZ(make_extractor(e["n_src"], e["d_ext"], e["m_out"], e.get("k_min")), desc["n"])
    raise ValueError(f"unknown generator kind {kind!r}")


def enumerate_mean(gen: Generator, prog, offset: int = 0, m: int | None = None,
                   cap: int = DEFAULT_CAP, chunk: int = 1 << 16) -> np.ndarray:
    """Literal average of the segment matrix over every prefix seed."""
    m = gen.n if m is None else m
    bits = gen.prefix_bits(m)
    _check_cap(bits, cap)
    w = prog.w
    counts = np.zeros((w, w))
    total = 1 << bits
    for lo in range(0, total, chunk):
        seeds = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        maps = run(prog, gen.eval_prefix_many(seeds, m), offset)
        np.add.at(counts, (np.tile(np.arange(w), len(seeds)), maps.ravel()), 1.0)
    return counts / total


def generated_mean(gen: Generator, prog, cap: int = DEFAULT_CAP, method: str = "auto") -> np.ndarray:
    if method == "enumerate" or (method == "auto" and gen.seed_bits <= 62 and (1 << gen.seed_bits) <= cap):
        return enumerate_mean(gen, prog, cap=cap)
    if method in ("auto", "structured"):
        return gen.segment_mean(prog, 0, gen.n)
    raise ValueError(f"unknown method {method!r}")


def gen_entrywise_error(gen: Generator, robp, cap: int = DEFAULT_CAP, method: str = "auto") -> float:
    if gen.n != robp.n or gen.s != robp.s:
        raise ValueError("generator shape does not match the program")
    return entrywise_max(generated_mean(gen, robp, cap, method) - exact_segment(robp, 0, robp.n))


def gen_sv_error(gen: Generator, robp: rb.Robp, cap: int = DEFAULT_CAP, method: str = "auto") -> float:
    if rb.classify(robp) != rb.RobpClass.PERMUTATION:
        raise ValueError("sv error is defined here for permutation programs only")
    if gen.n != robp.n or gen.s != robp.s:
        raise ValueError("generator shape does not match the program")
    return sv_approx_error(generated_mean(gen, robp, cap, method), exact_segment(robp, 0, robp.n))


def mgg_inw_family(s: int, levels: int, lam_target: float | None = None,
                   power: int | None = None, mixing_levels: int = 1) -> list:
    """INW family whose top ``mixing_levels`` levels are powered MGG graphs
    (tensored with K_2 on odd bit counts) and whose lower levels are complete.

    The power is either given or the least one whose measured lambda is at
    most ``lam_target``.
    """
    from .randomness import cube_expander, lambda_measure, power_expander

    fam, bits = [], s
    for t in range(1, levels + 1):
        if t <= levels - mixing_levels:
            fam.append(Complete(1 << bits))
            bits *= 2
            continue
        base = cube_expander(bits)
        p = power
        if p is None:
            lam = lambda_measure(base)
            p = 1 if lam <= lam_target else math.ceil(math.log(lam_target) / math.log(lam))
            while lambda_measure(power_expander(base, p)) > lam_target:
                p += 1
        fam.append(power_expander(base, p))
        bits += base.log_c * p
    return fam

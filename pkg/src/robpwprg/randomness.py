"""Explicit randomness primitives: a hash extractor over GF(2^n), expander
rotation maps (Margulis-Gabber-Galil, complete, tensor, power), and an
expander-neighbour averaging sampler.

Bit strings are handled as non-negative integers, most significant bit first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .matrix import spectral_gap_norm


# GF(2^n) arithmetic on Python ints and int64 arrays

def _pdeg(p: int) -> int:
    return p.bit_length() - 1


def _pmod(a: int, f: int) -> int:
    df = _pdeg(f)
    while a and _pdeg(a) >= df:
        a ^= f << (_pdeg(a) - df)
    return a


def _pmulmod(a: int, b: int, f: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a = _pmod(a << 1, f)
    return _pmod(r, f)


def _pgcd(a: int, b: int) -> int:
    while b:
        a, b = b, _pmod(a, b)
    return a


def is_irreducible(f: int) -> bool:
    """Ben-Or test: f has no factor of degree <= deg(f)/2."""
    n = _pdeg(f)
    if n < 1:
        return False
    xp = 2  # the polynomial x
    for _ in range(n // 2):
        xp = _pmulmod(xp, xp, f)
        if _pgcd(f, xp ^ 2) != 1:
            return False
    return True


def irreducible_poly(n: int) -> int:
    """Least irreducible polynomial of degree n (bit i = coefficient of x^i)."""
    if not 1 <= n <= 31:
        raise ValueError("field degree must lie in [1, 31]")
    for f in range((1 << n) + 1, 1 << (n + 1), 2 if n > 1 else 1):
        if is_irreducible(f):
            return f
    raise AssertionError("unreachable")


def gf_mul(a, x, n: int, poly: int):
    """Product in GF(2^n); ``a`` and ``x`` broadcast as int64 arrays."""
    a = np.asarray(a, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    res = np.zeros(np.broadcast(a, x).shape, dtype=np.int64)
    for i in range(n):
        res ^= np.where((a >> i) & 1, x << i, 0)
    for deg in range(2 * n - 2, n - 1, -1):
        res ^= ((res >> deg) & 1) * (poly << (deg - n))
    return res


# extractor

class ExtractorTooWeak(ValueError):
    pass


@dataclass(frozen=True)
class ExtractorSpec:
    """Ext(x, y) = top ``m_out`` bits of a_y * x in GF(2^n_src), a_y = 1 + (y mod (2^n_src - 1)).

    ``eps_ext`` is a certified error for flat sources of min-entropy
    ``k_min``; ``eps_method`` records how it was obtained.
    """

    n_src: int
    d_ext: int
    m_out: int
    k_min: int
    eps_ext: float
    eps_method: str = "exact"
    poly: int = 0

    def __post_init__(self):
        if not (1 <= self.n_src <= 31 and 0 <= self.d_ext <= self.n_src):
            raise ValueError("need 1 <= n_src <= 31 and 0 <= d_ext <= n_src")
        if not 0 <= self.m_out <= self.n_src or not 0 <= self.k_min <= self.n_src:
            raise ValueError("m_out and k_min must lie in [0, n_src]")
        if self.poly == 0:
            object.__setattr__(self, "poly", irreducible_poly(self.n_src))

    def multipliers(self) -> np.ndarray:
        y = np.arange(1 << self.d_ext, dtype=np.int64)
        return 1 + y % ((1 << self.n_src) - 1) if self.n_src > 1 else np.ones_like(y)

    def eval(self, x, y):
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        if (x < 0).any() or (x >> self.n_src).any() or (y < 0).any() or (y >> self.d_ext).any():
            raise ValueError("extractor input out of range")
        a = self.multipliers()[y]
        return gf_mul(a, x, self.n_src, self.poly) >> (self.n_src - self.m_out)

    def table(self) -> np.ndarray:
        """Ext over the full domain, shape (2^n_src, 2^d_ext)."""
        x = np.arange(1 << self.n_src, dtype=np.int64)[:, None]
        return gf_mul(self.multipliers()[None, :], x, self.n_src, self.poly) >> (self.n_src - self.m_out)

    def descriptor(self) -> dict:
        return {"kind": "ext", "n_src": self.n_src, "d_ext": self.d_ext, "m_out": self.m_out,
                "k_min": self.k_min}


def _histogram(spec: ExtractorSpec) -> np.ndarray:
    tab = spec.table()
    m = 1 << spec.m_out
    counts = np.zeros((tab.shape[0], m), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(tab.shape[0]), tab.shape[1]), tab.ravel()), 1)
    return counts


def worst_flat_error(spec: ExtractorSpec, k: int, cap: int = 1 << 24) -> float:
    """max over flat sources X with |supp X| = 2^k of TV(Ext(X, U), U_m).

    For a test set T of outputs, the worst source puts its mass on the 2^k
    inputs x with the largest Pr_y[Ext(x, y) in T].  Enumerates every T.
    """
    nt = 1 << (1 << spec.m_out)
    if (1 << spec.n_src) * nt > cap or (1 << (spec.n_src + spec.d_ext)) > cap:
        raise ValueError("exact worst-case computation exceeds cap")
    counts = _histogram(spec) / (1 << spec.d_ext)
    masks = (np.arange(nt)[None, :] >> np.arange(1 << spec.m_out)[:, None]) & 1
    vals = counts @ masks
    size = 1 << k
    top = -np.partition(-vals, size - 1, axis=0)[:size]
    gap = top.mean(axis=0) - masks.sum(axis=0) / (1 << spec.m_out)
    return float(max(gap.max(), 0.0))


def collision_bound(spec: ExtractorSpec, cap: int = 1 << 24) -> float:
    """kappa = max over delta != 0 of Pr_y[Ext(delta, y) = 0]."""
    if (1 << (spec.n_src + spec.d_ext)) <= cap:
        tab = spec.table()[1:]
        return float((tab == 0).mean(axis=1).max())
    # a -> a * delta is injective, so at most 2^(n-m) multipliers hit the zero bucket
    distinct = min(1 << spec.d_ext, (1 << spec.n_src) - 1)
    return min(1.0, (1 << (spec.n_src - spec.m_out)) / distinct)


def lhl_bound(spec: ExtractorSpec, k: int, kappa: float | None = None) -> float:
    kappa = collision_bound(spec) if kappa is None else kappa
    inner = (2.0 ** spec.m_out) * (2.0 ** -k + kappa) - 1.0
    return 0.5 * math.sqrt(max(inner, 0.0))


def make_extractor(n_src: int, d_ext: int, m_out: int, k_min: int | None = None,
                   exact_cap: int = 1 << 24) -> ExtractorSpec:
    """Build the extractor and certify its error at ``k_min`` (default n_src).

    The exact worst case over flat sources is used when enumerable, the
    collision-probability bound otherwise.
    """
    k_min = n_src if k_min is None else k_min
    probe = ExtractorSpec(n_src, d_ext, m_out, k_min, 1.0)
    try:
        eps, how = worst_flat_error(probe, k_min, exact_cap), "exact"
    except ValueError:
        eps, how = lhl_bound(probe, k_min), "lhl"
    return ExtractorSpec(n_src, d_ext, m_out, k_min, eps, how, probe.poly)


def extractor_tv_oracle(spec: ExtractorSpec, source, strong: bool = False,
                        cap: int = 1 << 24) -> float:
    """Exact TV distance of Ext(X, U_d) (or (U_d, Ext(X, U_d)) if strong) from uniform.

    ``source`` is a probability vector over [0, 2^n_src).
    """
    p = np.asarray(source, dtype=float)
    if p.shape != (1 << spec.n_src,):
        raise ValueError("source must be a vector over the whole source domain")
    if (1 << (spec.n_src + spec.d_ext)) > cap:
        raise ValueError("support too large for the oracle")
    m = 1 << spec.m_out
    tab = spec.table()
    if strong:
        dist = np.zeros((tab.shape[1], m))
        for y in range(tab.shape[1]):
            dist[y] = np.bincount(tab[:, y], weights=p, minlength=m)
        dist /= tab.shape[1]
        return 0.5 * float(np.abs(dist - 1.0 / (m * tab.shape[1])).sum())
    dist = (_histogram(spec).T @ p) / tab.shape[1]
    return 0.5 * float(np.abs(dist - 1.0 / m).sum())


# expanders

class Expander:
    """Regular graph on ``D`` vertices with degree ``c`` and an involutive rotation map."""

    D: int
    c: int
    name: str = "expander"

    def rot(self, v, l):
        raise NotImplementedError

    @property
    def log_c(self) -> int:
        lc = self.c.bit_length() - 1
        if 1 << lc != self.c:
            raise ValueError("degree is not a power of two")
        return lc

    def transition(self) -> np.ndarray:
        """W[u, v] = (# labels from u to v) / c."""
        if self.D * self.c > 1 << 24:
            raise ValueError("graph too large to expand edge by edge")
        v = np.repeat(np.arange(self.D), self.c)
        l = np.tile(np.arange(self.c), self.D)
        tgt, _ = self.rot(v, l)
        w = np.zeros((self.D, self.D))
        np.add.at(w, (v, tgt), 1.0 / self.c)
        return w

    def rot_table(self) -> tuple[np.ndarray, np.ndarray]:
        v = np.repeat(np.arange(self.D), self.c)
        l = np.tile(np.arange(self.c), self.D)
        t, j = self.rot(v, l)
        return t.reshape(self.D, self.c), j.reshape(self.D, self.c)

    def descriptor(self) -> dict:
        return {"kind": self.name, "D": self.D, "c": self.c}

    @cached_property
    def lam(self) -> float:
        return lambda_measure(self)


class MGG(Expander):
    # vertex x*m + y on Z_m^2; label pairs (2j, 2j+1) are mutually inverse maps:
    # 0: (x+y, y)    1: (x-y, y)    2: (x+y+1, y)  3: (x-y-1, y)
    # 4: (x, y+x)    5: (x, y-x)    6: (x, y+x+1)  7: (x, y-x-1)
    name = "mgg"

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("side length must be positive")
        self.m, self.D, self.c = m, m * m, 8

    def rot(self, v, l):
        v = np.asarray(v, dtype=np.int64)
        l = np.asarray(l, dtype=np.int64)
        m = self.m
        x, y = v // m, v % m
        sgn = np.where(l & 1, -1, 1)
        off = np.where(l & 2, sgn, 0)
        first = l < 4
        nx = np.where(first, x + sgn * y + off, x) % m
        ny = np.where(first, y, y + sgn * x + off) % m
        return nx * m + ny, l ^ 1

    def descriptor(self):
        return {"kind": "mgg", "m": self.m}


class Complete(Expander):
    """K_D with loops: rot(v, l) = (l, v), W = J."""

    name = "complete"

    def __init__(self, D: int):
        self.D = self.c = D

    def rot(self, v, l):
        return np.asarray(l, dtype=np.int64), np.asarray(v, dtype=np.int64)

    def descriptor(self):
        return {"kind": "complete", "D": self.D}


class Identity(Expander):
    """Every vertex carries ``c`` self-loops."""

    name = "identity"

    def __init__(self, D: int, c: int):
        self.D, self.c = D, c

    def rot(self, v, l):
        return np.asarray(v, dtype=np.int64), np.asarray(l, dtype=np.int64)

    def descriptor(self):
        return {"kind": "identity", "D": self.D, "c": self.c}


class Tensor(Expander):
    name = "tensor"

    def __init__(self, h1: Expander, h2: Expander):
        self.h1, self.h2 = h1, h2
        self.D, self.c = h1.D * h2.D, h1.c * h2.c

    def rot(self, v, l):
        v = np.asarray(v, dtype=np.int64)
        l = np.asarray(l, dtype=np.int64)
        a, ja = self.h1.rot(v // self.h2.D, l // self.h2.c)
        b, jb = self.h2.rot(v % self.h2.D, l % self.h2.c)
        return a * self.h2.D + b, ja * self.h2.c + jb

    def transition(self):
        return np.kron(self.h1.transition(), self.h2.transition())

    def descriptor(self):
        return {"kind": "tensor", "parts": [self.h1.descriptor(), self.h2.descriptor()]}


class Power(Expander):
    """t-step walks; label (l_1..l_t) is read most significant first and the
    incoming label lists the reverse walk's labels, so rot stays an involution."""

    name = "power"

    def __init__(self, h: Expander, t: int):
        if t < 1:
            raise ValueError("power must be at least 1")
        self.h, self.t = h, t
        self.D, self.c = h.D, h.c ** t

    def rot(self, v, l):
        v = np.asarray(v, dtype=np.int64)
        l = np.asarray(l, dtype=np.int64)
        c, t = self.h.c, self.t
        back = np.zeros_like(l)
        for i in range(t):
            li = (l // c ** (t - 1 - i)) % c
            v, j = self.h.rot(v, li)
            back = back + j * c ** i
        return v, back

    def transition(self):
        return np.linalg.matrix_power(self.h.transition(), self.t)

    def descriptor(self):
        return {"kind": "power", "t": self.t, "base": self.h.descriptor()}


def power_expander(h: Expander, t: int) -> Expander:
    return h if t == 1 else Power(h, t)


def cube_expander(q: int) -> Expander:
    """Degree-8 or degree-16 expander on 2^q vertices built from MGG."""
    if q < 0:
        raise ValueError("q must be non-negative")
    if q % 2 == 0:
        return MGG(1 << (q // 2))
    return Tensor(MGG(1 << (q // 2)), Complete(2))


def lambda_measure(h: Expander, cap: int = 4096) -> float:
    if h.D > cap:
        raise ValueError(f"{h.D} vertices exceed the dense SVD cap {cap}")
    return spectral_gap_norm(h.transition())


def expander_from_descriptor(desc: dict) -> Expander:
    kind = desc["kind"]
    if kind == "mgg":
        return MGG(desc["m"])
    if kind == "complete":
        return Complete(desc["D"])
    if kind == "identity":
        return Identity(desc["D"], desc["c"])
    if kind == "tensor":
        return Tensor(*(expander_from_descriptor(p) for p in desc["parts"]))
    if kind == "power":
        return Power(expander_from_descriptor(desc["base"]), desc["t"])
    raise ValueError(f"unknown expander kind {kind!r}")


# sampler

class SamplerInfeasible(ValueError):
    pass


@dataclass(frozen=True)
class SamplerSpec:
    """Samp(x, y) = the y-th neighbour of x in a power of an expander on 2^q vertices.

    For f into [0, 1], the deviation vector W^t f - E f has squared norm at
    most lam^(2t) 2^q, so a deviation of alpha or more happens at no more
    than a (lam^t / alpha)^2 fraction of the x's.
    """

    q: int
    t: int
    alpha: float
    gamma: float
    lam: float
    base: Expander = field(compare=False, repr=False)

    @property
    def r(self) -> int:
        return self.q

    @property
    def p(self) -> int:
        return self.t * self.base.log_c

    @cached_property
    def graph(self) -> Expander:
        return power_expander(self.base, self.t)

    def eval(self, x, y):
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        if (x < 0).any() or (x >> self.r).any() or (y < 0).any() or (y >> self.p).any():
            raise ValueError("sampler input out of range")
        return self.graph.rot(x, y)[0]

    def averaging_matrix(self) -> np.ndarray:
        """Row x holds the distribution of Samp(x, U_p)."""
        return np.linalg.matrix_power(self.base.transition(), self.t)


def make_sampler(q: int, alpha: float, gamma: float, t_cap: int = 64) -> SamplerSpec:
    if not (0 < alpha < 1 and 0 < gamma < 1):
        raise ValueError("alpha and gamma must lie in (0, 1)")
    base = cube_expander(q)
    lam = lambda_measure(base)
    for t in range(1, t_cap + 1):
        if (lam ** t / alpha) ** 2 <= gamma:
            return SamplerSpec(q, t, alpha, (lam ** t / alpha) ** 2, lam, base)
    raise SamplerInfeasible(
        f"q={q}: lambda={lam:.4f} needs more than {t_cap} steps for alpha={alpha}, gamma={gamma}")


def sampler_deviations(spec: SamplerSpec, f) -> np.ndarray:
    """|2^-p sum_y f(Samp(x, y)) - E f| for every x."""
    f = np.asarray(f, dtype=float)
    return np.abs(spec.averaging_matrix() @ f - f.mean())

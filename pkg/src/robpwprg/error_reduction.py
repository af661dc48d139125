"""Error-reduction polynomials as explicit signed term sets.

A term is a sign and a nondecreasing breakpoint list ``0 <= b_1 <= ... <= b_t = n``;
its value on a table B is B[0, b_1] B[b_1, b_2] ... B[b_{t-1}, b_t] with
B[i, i] = I.  Two families are produced:

* Richardson: with E = I - B L on the block upper-triangular layout,
  the block (0, n) of sum_{i <= (k-1)/2} E^i B is
  B_{0,n} + sum_j sum_{0 < r_1 < ... < r_j <= n} D_{0,r_1} ... D_{r_{j-1},r_j} B_{r_j,n}
  with D_{a,b} = B_{a,b-1} B_{b-1,b} - B_{a,b}.  Expanding every D gives the
  terms; lists are padded to length k by repeating n.
* Binary splitting over dyadic intervals: M^(k)_{l..r} = M_r when r = l + 1,
  the base B_{l,r} when k = 0, and otherwise
  sum_{i+j=k} M^(i)_{l..m} M^(j)_{m..r} - sum_{i+j=k-1} M^(i)_{l..m} M^(j)_{m..r}.
  Equal factor lists are merged into integer coefficients before expansion
  into +-1 terms.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np


@dataclass(frozen=True)
class SignedTerm:
    sign: int
    breakpoints: tuple

    def factors(self) -> list[tuple[int, int]]:
        out, prev = [], 0
        for b in self.breakpoints:
            out.append((prev, b))
            prev = b
        return out


@dataclass(frozen=True)
class TermSet:
    n: int
    k: int
    flavor: str
    _make: Callable[[], Iterable[SignedTerm]]
    count: int

    def __iter__(self) -> Iterator[SignedTerm]:
        return iter(self._make())

    def __len__(self) -> int:
        return self.count

    def materialize(self) -> list[SignedTerm]:
        return list(self)

    @property
    def index_bits(self) -> int:
        return max(0, math.ceil(math.log2(self.count))) if self.count > 1 else 0

    def padded(self) -> list[SignedTerm]:
        """Terms followed by zero-sign fillers up to 2^index_bits entries."""
        terms = self.materialize()
        if not terms:
            return terms
        filler = SignedTerm(0, terms[0].breakpoints)
        return terms + [filler] * ((1 << self.index_bits) - len(terms))

    @property
    def max_factors(self) -> int:
        return max(len(t.breakpoints) for t in self)

    def dumps(self) -> str:
        head = f"# {self.flavor} n={self.n} k={self.k} terms={self.count}\n"
        return head + "".join(f"{t.sign:+d} " + " ".join(map(str, t.breakpoints)) + "\n" for t in self)


def loads_terms(text: str) -> list[SignedTerm]:
    out = []
    for ln in text.splitlines():
        if ln.strip() and not ln.startswith("#"):
            parts = ln.split()
            out.append(SignedTerm(int(parts[0]), tuple(int(x) for x in parts[1:])))
    return out


# Richardson

def richardson_count(n: int, k: int) -> int:
    return sum(math.comb(n, j) * 2 ** j for j in range((k - 1) // 2 + 1))


def _richardson_iter(n: int, k: int) -> Iterator[SignedTerm]:
    m = (k - 1) // 2
    for j in range(m + 1):
        for rs in itertools.combinations(range(1, n + 1), j):
            for picks in itertools.product((1, -1), repeat=j):
                bps = []
                for b, p in zip(rs, picks):
                    bps.extend((b - 1, b) if p == 1 else (b,))
                bps.append(n)
                bps.extend([n] * (k - len(bps)))
                sign = 1 if picks.count(-1) % 2 == 0 else -1
                yield SignedTerm(sign, tuple(bps))


def richardson_terms(n: int, k: int) -> TermSet:
    if n < 1:
        raise ValueError("n must be positive")
    if k < 1 or k % 2 == 0:
        raise ValueError("Richardson degree k must be odd and positive")
    return TermSet(n, k, "richardson", lambda: _richardson_iter(n, k), richardson_count(n, k))


def term_product(term: SignedTerm, table: Mapping | Callable, w: int | None = None, exact: bool = False):
    get = table if callable(table) else table.__getitem__
    out = None
    for a, b in term.factors():
        if a == b:
            continue
        try:
            f = get((a, b))
        except KeyError as e:
            raise KeyError(f"table has no entry for {(a, b)}") from e
        out = f if out is None else out @ f
    if out is None:
        if w is None:
            raise ValueError("width needed for an all-identity term")
        out = identity(w, exact)
    return out


def identity(w: int, exact: bool = False):
    if exact:
        m = np.full((w, w), Fraction(0), dtype=object)
        for i in range(w):
            m[i, i] = Fraction(1)
        return m
    return np.eye(w)


def evaluate_terms(terms: Iterable[SignedTerm], table, w: int, exact: bool = False):
    acc = None
    for t in terms:
        if t.sign == 0:
            continue
        val = term_product(t, table, w, exact)
        acc = (val if t.sign > 0 else -val) if acc is None else (acc + val if t.sign > 0 else acc - val)
    if acc is None:
        return identity(w, exact) * 0
    return acc


def richardson_eval(terms: TermSet, table, w: int) -> np.ndarray:
    return evaluate_terms(terms, table, w)


def richardson_block(steps: list, table: Mapping, k: int) -> np.ndarray:
    """Block (0, n) of sum_{i <= (k-1)/2} (I - BL)^i B on the (n+1) w block layout.

    ``steps[i-1]`` is A_i and ``table[(a, b)]`` is B_{a,b} for a < b.
    """
    n = len(steps)
    w = steps[0].shape[0]
    size = (n + 1) * w
    big_l = np.eye(size)
    big_b = np.zeros((size, size))
    for a in range(n + 1):
        big_b[a * w:(a + 1) * w, a * w:(a + 1) * w] = np.eye(w)
        if a >= 1:
            big_l[(a - 1) * w:a * w, a * w:(a + 1) * w] = -steps[a - 1]
        for b in range(a + 1, n + 1):
            big_b[a * w:(a + 1) * w, b * w:(b + 1) * w] = table[(a, b)]
    e = np.eye(size) - big_b @ big_l
    acc, cur = big_b.copy(), big_b.copy()
    for _ in range((k - 1) // 2):
        cur = e @ cur
        acc += cur
    return acc[:w, n * w:]


def richardson_bound(eps: float, n: int, k: int) -> float:
    return eps ** ((k + 1) / 2) * (n + 1)


def richardson_envelope(delta: float, n: int, k: int) -> float:
    """Infinity-norm bound from a measured maximal block error ``delta``.

    With ||A_i|| <= 1, the block norm of L is at most 2 and that of L^{-1}
    at most n + 1, so the error is at most (n + 1)(2 n delta)^((k+1)/2).
    """
    return (n + 1) * (2 * n * delta) ** ((k + 1) / 2)


# binary splitting

def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def dyadic_intervals(n: int) -> list[tuple[int, int]]:
    """The set BS_n of intervals [i 2^j, (i+1) 2^j]."""
    if not is_power_of_two(n):
        raise ValueError("n must be a power of two")
    out, size = [], 1
    while size <= n:
        out.extend((l, l + size) for l in range(0, n, size))
        size *= 2
    return out


@lru_cache(maxsize=None)
def _bs_poly(l: int, r: int, k: int) -> tuple:
    """Binary-splitting polynomial as a sorted tuple of (factor intervals, coefficient)."""
    if r == l + 1 or k == 0:
        return ((((l, r),), 1),)
    m = (l + r) // 2
    acc: dict = {}
    for kk, sgn in ((k, 1), (k - 1, -1)):
        for i in range(kk + 1):
            for fa, ca in _bs_poly(l, m, i):
                for fb, cb in _bs_poly(m, r, kk - i):
                    key = fa + fb
                    acc[key] = acc.get(key, 0) + sgn * ca * cb
    return tuple(sorted((f, c) for f, c in acc.items() if c != 0))


def binary_splitting_poly(n: int, k: int) -> list[tuple[tuple, int]]:
    if not is_power_of_two(n):
        raise ValueError("n must be a power of two")
    if k < 0:
        raise ValueError("k must be non-negative")
    return list(_bs_poly(0, n, k))


def _bs_iter(n: int, k: int) -> Iterator[SignedTerm]:
    for factors, coef in binary_splitting_poly(n, k):
        bps = tuple(b for _, b in factors)
        sign = 1 if coef > 0 else -1
        for _ in range(abs(coef)):
            yield SignedTerm(sign, bps)


def binary_splitting_terms(n: int, k: int) -> TermSet:
    count = sum(abs(c) for _, c in binary_splitting_poly(n, k))
    return TermSet(n, k, "binary-splitting", lambda: _bs_iter(n, k), count)


def binary_splitting_eval(terms: TermSet, table, w: int, exact: bool = False):
    return evaluate_terms(terms, table, w, exact)


def binary_splitting_direct(table, n: int, k: int, exact: bool = False):
    """M^(k)_{0..n} by the recursion itself, without term expansion.

    ``table[(l, r)]`` holds M_r for unit intervals and the base for longer ones.
    """
    get = table if callable(table) else table.__getitem__

    @lru_cache(maxsize=None)
    def rec(l, r, kk):
        if r == l + 1 or kk == 0:
            return get((l, r))
        m = (l + r) // 2
        acc = None
        for k2, sgn in ((kk, 1), (kk - 1, -1)):
            for i in range(k2 + 1):
                p = rec(l, m, i) @ rec(m, r, k2 - i)
                p = p if sgn > 0 else -p
                acc = p if acc is None else acc + p
        return acc

    return rec(0, n, k)


def lemma45_bound(tau: float, n: int, k: int) -> float:
    return (4 * math.sqrt(tau) * math.log2(n)) ** (k + 1)


def sv_recursion_bound(tau: float, k: int) -> float:
    return tau ** k


def weighted_bound_regular(eps: float, n: int, k: int) -> float:
    return (30 * eps * math.log2(n)) ** k


# weight-relative errors

def layer_weight_rows(steps: list, i: int, r: int) -> np.ndarray:
    """Rows a with W(f, l, r, y) = sum_{i=l+1}^r sum |a^T y| split per layer i.

    ``steps[i-1]`` is the (w, d) target table of layer i.  For every edge
    (u, x) of layer i the row is e_u^T M_{i-1..i} M_{i..r} - e_v^T M_{i..r}.
    """
    tab = steps[i - 1]
    w, d = tab.shape
    tail = np.eye(w)
    for j in range(i + 1, r + 1):
        tail = tail @ _mean(steps[j - 1])
    head = _mean(tab) @ tail
    rows = head[np.repeat(np.arange(w), d)] - tail[tab.ravel()]
    return rows


def _mean(tab: np.ndarray) -> np.ndarray:
    w, d = tab.shape
    m = np.zeros((w, w))
    np.add.at(m, (np.repeat(np.arange(w), d), tab.ravel()), 1.0 / d)
    return m


def weight_rows(steps: list, l: int, r: int) -> np.ndarray:
    return np.concatenate([layer_weight_rows(steps, i, r) for i in range(l + 1, r + 1)])


def weight_relative_error(delta: np.ndarray, rows: np.ndarray, total_weight: float) -> float:
    """sup_y ||delta y||_inf / (sum_j |rows_j . y| / total_weight), by linear programming."""
    from scipy.optimize import linprog

    w = delta.shape[1]
    nr = rows.shape[0]
    best = 0.0
    # variables (y, t): maximise c.y subject to -t <= rows y <= t, sum t <= 1
    a_ub = np.block([[rows, -np.eye(nr)], [-rows, -np.eye(nr)], [np.zeros((1, w)), np.ones((1, nr))]])
    b_ub = np.concatenate([np.zeros(2 * nr), [1.0]])
    bounds = [(None, None)] * w + [(0, None)] * nr
    for row in delta:
        if not np.any(np.abs(row) > 1e-15):
            continue
        for sgn in (1.0, -1.0):
            c = np.concatenate([-sgn * row, np.zeros(nr)])
            res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
            if res.status == 3:
                return float("inf")
            if res.status != 0:
                raise RuntimeError(f"linear program failed: {res.message}")
            best = max(best, -res.fun)
    return best * total_weight

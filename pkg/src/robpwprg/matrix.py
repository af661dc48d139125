"""Dense matrix helpers and singular-value approximation certificates.

``sv_approx_error`` returns the least eps with

    |y^T (Wt - W) x| <= (eps/4) (x^T (I - W^T W) x + y^T (I - W W^T) y)

for all real x, y.  Writing P = I - W W^T, Q = I - W^T W and D = Wt - W,
the inequality for every (x, y) and both signs of y is the same as asking
that the symmetric matrices

    [[ (eps/4) P,   +-D/2    ],
     [ +-D^T/2,    (eps/4) Q ]]

be positive semidefinite: the quadratic form at (y, x) is exactly
(eps/4)(y'Py + x'Qx) +- y'Dx.  The set of feasible eps is an up-set, so
bisection on the smallest eigenvalue finds its infimum.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

TOL = 1e-9


def _square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def inf_norm(m) -> float:
    m = np.asarray(m, dtype=float)
    return float(np.abs(m).sum(axis=1).max()) if m.size else 0.0


def entrywise_max(m) -> float:
    m = np.asarray(m, dtype=float)
    return float(np.abs(m).max()) if m.size else 0.0


def product(ms: Sequence) -> np.ndarray:
    if not ms:
        raise ValueError("empty product")
    out = _square(ms[0])
    for m in ms[1:]:
        m = _square(m)
        if m.shape != out.shape:
            raise ValueError("dimension mismatch")
        out = out @ m
    return out


def is_row_stochastic(m, tol: float = TOL) -> bool:
    m = _square(m)
    return bool((m >= -tol).all() and np.allclose(m.sum(axis=1), 1.0, atol=tol, rtol=0))


def is_doubly_stochastic(m, tol: float = TOL) -> bool:
    m = _square(m)
    return is_row_stochastic(m, tol) and bool(np.allclose(m.sum(axis=0), 1.0, atol=tol, rtol=0))


def psd_norm_sq(x, a) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ np.asarray(a, dtype=float) @ x)


def _min_eig(eps: float, p, q, half_d) -> float:
    w = p.shape[0]
    blk = np.empty((2 * w, 2 * w))
    blk[:w, :w] = eps / 4 * p
    blk[w:, w:] = eps / 4 * q
    worst = np.inf
    for sgn in (1.0, -1.0):
        blk[:w, w:] = sgn * half_d
        blk[w:, :w] = sgn * half_d.T
        worst = min(worst, float(np.linalg.eigvalsh(blk)[0]))
    return worst


def sv_approx_error(wt, w, tol: float = 1e-6, eig_tol: float = TOL,
                    check: bool = True) -> float:
    """Least eps certifying that ``wt`` sv-approximates ``w``; +inf if none does."""
    wt, w = _square(wt), _square(w)
    if wt.shape != w.shape:
        raise ValueError("dimension mismatch")
    if check and not (is_doubly_stochastic(wt, 1e-7) and is_doubly_stochastic(w, 1e-7)):
        raise ValueError("inputs must be doubly stochastic")
    eye = np.eye(w.shape[0])
    p = eye - w @ w.T
    q = eye - w.T @ w
    half_d = (wt - w) / 2
    if _min_eig(0.0, p, q, half_d) >= -eig_tol:
        return 0.0
    hi = 1.0
    while _min_eig(hi, p, q, half_d) < -eig_tol:
        hi *= 2
        if hi > 1e12:
            # D reaches into a common null direction of P and Q
            return float("inf")
    lo = 0.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if _min_eig(mid, p, q, half_d) >= -eig_tol:
            hi = mid
        else:
            lo = mid
    return hi


def spectral_gap_norm(w) -> float:
    """Largest singular value of W - J, the spectral expansion of a regular graph."""
    w = _square(w)
    j = np.full_like(w, 1.0 / w.shape[0])
    return float(np.linalg.norm(w - j, 2))

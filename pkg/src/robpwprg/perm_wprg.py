"""Weighted generator for permutation programs with a single accept node.

One level replaces a permutation program of length n (padded to a power of
two) by the binary-splitting expansion over an INW generator: index i picks
a signed term, and its j-th factor B_{a,b} is realized by INW(x_j)_{b-a}.
Every reduced program is again a permutation program (each layer is a
composition of permutation layers) with the same single accept node.

The generator never looks at the width: the INW family depends on (n, s,
lambda) only.

Budget at one level, with L = log2 n:

    tau  <=  min(eps^(2/(k+1)) / (16 L^2), 1/(64 L^2))
    tau_cert = 11 * lambda_measured * L          (INW sv bound)
    declared = (4 sqrt(tau_cert) L)^(k+1)        (< eps when tau_cert fits)

The paper-scale level threshold (n_l = 32768) is replaced by ``threshold``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .error_reduction import binary_splitting_terms, dyadic_intervals, lemma45_bound
from .generators import INW, exact_segment, mgg_inw_family
from .matrix import sv_approx_error
from .randomness import Complete
from .wpr import (Reduction, ReductionRefused, ReductionWprg, SegmentReduction, as_fraction,
                  compose_chain, estimate, wprg_from_reduction)

PAPER_THRESHOLD = 32768


def _log2_ceil(n: int) -> int:
    return max(0, (n - 1).bit_length())


def tau_budget(n: int, k: int, eps: float) -> float:
    L = max(1, _log2_ceil(n))
    return min(eps ** (2.0 / (k + 1)) / (16 * L * L), 1.0 / (64 * L * L))


def complete_family(s: int, levels: int) -> list:
    fam, bits = [], s
    for _ in range(levels):
        fam.append(Complete(1 << bits))
        bits *= 2
    return fam


def measured_tau(base: INW, programs: Sequence, n: int) -> float:
    """Largest sv error of the base's segment means over every dyadic interval."""
    worst = 0.0
    for f in programs:
        for a, b in dyadic_intervals(n):
            if b - a < 2:
                continue
            worst = max(worst, sv_approx_error(base.segment_mean(f, a, b - a), exact_segment(f, a, b)))
    return worst


def perm_one_level(n: int, s: int, k: int, eps: float, family: str = "mgg",
                   lam: float | None = None, corpus: Sequence | None = None) -> SegmentReduction:
    """Binary-splitting reduction over INW for permutation programs of length n.

    ``family`` is "mgg" (complete lower levels, powered MGG on top, lambda chosen
    to meet the tau budget unless ``lam`` is given) or "complete" (exact
    mixing, tau = 0).  Programs in ``corpus`` (of length n) are used to measure
    tau; the reduction refuses if either the certified or the measured value
    exceeds the budget.
    """
    N = 1 << _log2_ceil(n)
    L = _log2_ceil(N)
    if L == 0:
        raise ValueError("nothing to reduce at length 1")
    budget = tau_budget(N, k, eps)
    if family == "complete":
        fam, lam_meas = complete_family(s, L), 0.0
    elif family == "mgg":
        target = lam if lam is not None else min(budget / (11 * L), 0.99 / (6 * L * L))
        fam = mgg_inw_family(s, L, target)
        lam_meas = max(h.lam for h in fam if not isinstance(h, Complete))
    else:
        raise ValueError(f"unknown family {family!r}")
    base = INW(fam, s)
    tau_cert = 11 * lam_meas * L
    tau_meas = measured_tau(base, corpus, N) if corpus else None
    if tau_cert > budget:
        raise ReductionRefused(f"certified tau {tau_cert:.3g} exceeds budget {budget:.3g}")
    if tau_meas is not None and tau_meas > budget:
        raise ReductionRefused(f"measured tau {tau_meas:.3g} exceeds budget {budget:.3g}")
    terms = binary_splitting_terms(N, k).materialize()
    declared = lemma45_bound(tau_cert, N, k) if tau_cert > 0 else 0.0
    red = SegmentReduction(terms, base, N, s, None, declared, "perm-level", source_n=n)
    red.measured = {"tau_budget": budget, "tau_cert": tau_cert, "tau_measured": tau_meas,
                    "lambda": lam_meas, "k": k, "n": n, "padded_n": N}
    return red


@dataclass
class PermLevel:
    k: int
    family: str = "mgg"
    lam: float | None = None

    def record(self) -> dict:
        out = {"kind": "perm-level", "k": self.k, "family": self.family}
        if self.lam is not None:
            out["lambda"] = self.lam
        return out


@dataclass
class PermSchedule:
    levels: list = field(default_factory=list)
    threshold: int = 4

    @classmethod
    def from_records(cls, records: Sequence[dict], threshold: int = 4) -> "PermSchedule":
        levels = []
        for r in records:
            if r.get("kind", "perm-level") != "perm-level":
                raise ValueError(f"not a perm-level stage: {r}")
            levels.append(PermLevel(r["k"], r.get("family", "mgg"), r.get("lambda")))
        return cls(levels, threshold)

    def records(self) -> list[dict]:
        return [lv.record() for lv in self.levels]


def default_perm_schedule(n: int, eps: float, threshold: int = 4) -> PermSchedule:
    """Two levels: a mixing level with k about sqrt(log 1/eps), then an exact level."""
    k1 = max(1, round(math.sqrt(math.log2(1 / eps))))
    return PermSchedule([PermLevel(k1, "mgg"), PermLevel(0, "complete")], threshold)


def level_budgets(eps: float, Ks: Sequence) -> list:
    """eps/2 for the first level; the rest share eps/2, each divided by the weight before it."""
    L = len(Ks)
    out = [as_fraction(eps) / 2]
    pref = Fraction(1)
    for p in range(1, L):
        pref *= as_fraction(Ks[p - 1])
        out.append(as_fraction(eps) / (2 * (L - 1) * pref))
    return out


def perm_chain(n: int, s: int, eps: float, schedule: PermSchedule,
               corpus: Sequence | None = None) -> Reduction:
    """Compose one-level reductions; only level 1 sees ``corpus``.

    Level 1 gets eps/2; level p >= 2 gets eps / (2 (levels-1) K_1...K_{p-1}),
    which for two levels is eps / (2 K_0) with K_0 the first level's weight.
    """
    if not schedule.levels:
        raise ValueError("schedule has no levels")
    reds, length, bits = [], n, s
    pref = Fraction(1)
    L = len(schedule.levels)
    for p, lv in enumerate(schedule.levels):
        target = as_fraction(eps) / 2 if p == 0 else as_fraction(eps) / (2 * (L - 1) * pref)
        red = perm_one_level(length, bits, lv.k, float(target), lv.family, lv.lam,
                             corpus if p == 0 else None)
        red.measured["budget"] = float(target)
        reds.append(red)
        pref *= red.K
        length, bits = red.tgt
        if length <= schedule.threshold:
            break
    chain = compose_chain(reds)
    chain.measured = {"levels": [r.summary() | {"measured": r.measured} for r in reds],
                      "final_length": length, "final_bits": bits}
    return chain


def perm_wprg(n: int, s: int, eps: float, schedule: PermSchedule | None = None,
              corpus: Sequence | None = None) -> ReductionWprg:
    schedule = default_perm_schedule(n, eps) if schedule is None else schedule
    return wprg_from_reduction(perm_chain(n, s, eps, schedule, corpus))


def multi_accept_estimate(robp, eps: float, schedule: PermSchedule | None = None,
                          wprg: ReductionWprg | None = None) -> tuple[float, float]:
    """Sum of single-accept estimates, each from a generator with error eps/w.

    Returns (estimate, declared error).  The generator may be passed in when
    it was already built for (n, s, eps/w).
    """
    g = perm_wprg(robp.n, robp.s, eps / robp.w, schedule) if wprg is None else wprg
    total = 0.0
    for a in sorted(robp.accept):
        total += estimate(g, robp.with_accept((a,)), "exact").value
    return total, float(g.eps) * robp.w

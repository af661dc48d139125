from fractions import Fraction

import numpy as np
import pytest

from conftest import family, one
from robpwprg import robp as rb
from robpwprg.perm_wprg import (PermLevel, PermSchedule, default_perm_schedule, level_budgets,
                                multi_accept_estimate, perm_chain, perm_one_level, perm_wprg, tau_budget)
from robpwprg.wpr import ReductionRefused, estimate, reduced_robp

SCHEDULE = PermSchedule([PermLevel(2, "mgg"), PermLevel(0, "complete")])


@pytest.fixture(scope="module")
def gen16():
    return perm_wprg(16, 1, 0.1, SCHEDULE)


def test_k_zero_is_single_term():
    red = perm_one_level(8, 1, 0, 0.1, "complete")
    assert red.term_count == 1 and red.d == 0 and red.K == 1
    assert red.tgt == (1, red.base.seed_bits)


def test_reduced_programs_are_single_accept_permutations():
    red = perm_one_level(4, 1, 1, 0.1, "complete")
    assert red.term_count == 3
    for f in family("permutation", 4, 3, 1, 5, seed=1, accept="single"):
        for i in range(red.n_index):
            g = reduced_robp(f, red, i)
            assert rb.classify(g) == rb.RobpClass.PERMUTATION
            assert g.accept == f.accept and g.start == f.start


def test_alphabet_growth_bookkeeping(gen16):
    levels = gen16.red.measured["levels"]
    first = levels[0]
    assert first["src"] == [16, 1]
    assert levels[1]["src"] == first["tgt"]
    assert gen16.red.tgt == tuple(levels[-1]["tgt"])
    assert gen16.W == np.prod([Fraction(lv["K"]) for lv in levels])
    assert gen16.seed_bits == gen16.red.d + gen16.red.tgt[0] * gen16.red.tgt[1]


def test_width_oblivious(gen16):
    # one generator, built without a width, serves every width
    for w in range(2, 7):
        for f in family("permutation", 16, w, 1, 5, seed=w, accept="single"):
            est = estimate(gen16, f, "exact").value
            assert abs(est - float(rb.exact_expectation(f))) <= float(gen16.eps)


def test_accept_all_and_none(gen16):
    f = one("permutation", 16, 4, 1, seed=3, accept="single")
    assert estimate(gen16, f.with_accept(()), "exact").value == 0.0
    assert estimate(gen16, f.with_accept(range(4)), "exact").value == pytest.approx(1.0, abs=1e-12)


def test_multi_accept_sum():
    f = one("permutation", 16, 5, 1, seed=4, accept="random")
    g = perm_wprg(16, 1, 0.1 / 5, SCHEDULE)
    total, declared = multi_accept_estimate(f, 0.1, SCHEDULE, g)
    assert declared == pytest.approx(float(g.eps) * 5)
    assert abs(total - float(rb.exact_expectation(f))) <= declared


def test_budgets():
    assert tau_budget(16, 1, 0.01) == pytest.approx(min(0.01 / (16 * 16), 1 / (64 * 16)))
    b = level_budgets(Fraction(1, 10), [8, 4])
    assert b == [Fraction(1, 20), Fraction(1, 160)]


def test_refuses_large_lambda():
    with pytest.raises(ReductionRefused):
        perm_one_level(16, 1, 1, 0.01, "mgg", lam=0.5)


def test_schedule_records_round_trip():
    s = default_perm_schedule(64, 1e-3)
    assert PermSchedule.from_records(s.records()).levels == s.levels
    with pytest.raises(ValueError):
        PermSchedule.from_records([{"kind": "length", "k": 1}])


def test_chain_declared_error_within_target():
    chain = perm_chain(16, 1, 0.1, SCHEDULE)
    assert float(chain.eps) <= 0.1

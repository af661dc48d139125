from fractions import Fraction

import numpy as np
import pytest

from conftest import family, one
from robpwprg import robp as rb
from robpwprg.generators import NZ, Uniform
from robpwprg.randomness import make_extractor, make_sampler
from robpwprg.rng import make_rng
from robpwprg.wpr import (IdentityReduction, ReductionRefused, SamplerWprg, alphabet_reduction,
                          chain_error, compose, compose_chain, estimate, length_reduction,
                          main_reduction_pipeline, measure_base_error, reduced_robp, reduction_error,
                          reduction_error_exhaustive, sampler_amplified_wprg, wprg_from_reduction)


def fake(n, s, w, K, eps, d=0):
    r = IdentityReduction(n, s, w)
    r.K, r.eps, r.d = Fraction(K), Fraction(eps), d
    return r


def small_length(seed=0, cls="general", w=2, k=3):
    """Richardson over NZ on n = 2 programs; small enough to walk every (index, input)."""
    progs = family(cls, 2, w, 1, 5, seed=seed)
    base = NZ(make_extractor(2, 1, 1), 2)
    red = length_reduction(base, 2, 1, w, k, measure_base_error(base, progs, 2))
    return red, progs


def small_alphabet(w=2):
    return alphabet_reduction(make_extractor(4, 2, 1, 3), 3, 1, w)


def test_compose_with_identity():
    red, progs = small_length()
    for c in (compose(IdentityReduction(2, 1, 2), red), compose(red, IdentityReduction(*red.tgt, 2))):
        assert (c.d, c.K, c.eps) == (red.d, red.K, red.eps)
        for f in progs:
            assert c.weighted_value(f) == pytest.approx(red.weighted_value(f), abs=1e-12)


def test_composition_metadata_exact():
    r1, r2 = fake(4, 1, 2, 3, Fraction(1, 7), d=2), fake(4, 1, 2, 5, Fraction(2, 9), d=3)
    c = compose(r1, r2)
    assert c.d == 5 and c.K == 15
    assert c.eps == Fraction(1, 7) + 3 * Fraction(2, 9)
    r3 = fake(4, 1, 2, 2, Fraction(1, 11), d=1)
    chain = compose_chain([r1, r2, r3])
    assert chain.eps == Fraction(1, 7) + 3 * Fraction(2, 9) + 15 * Fraction(1, 11)
    assert chain.eps == chain_error([3, 5, 2], [Fraction(1, 7), Fraction(2, 9), Fraction(1, 11)])
    assert chain.K == 30 and chain.d == 6


def test_compose_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        compose(IdentityReduction(4, 1, 2), IdentityReduction(3, 1, 2))


def test_alphabet_reduction_shape_and_weights():
    red = small_alphabet()
    assert red.d == 4 and red.tgt == (3, 2) and red.src == (3, 1)
    assert all(red.weight(i) == 1 for i in range(red.n_index))
    assert red.K == 1


def test_length_reduction_shape_and_weights():
    red, _ = small_length()
    assert red.tgt == (3, 4) and red.d == 3
    assert all(abs(red.weight(i)) <= red.K for i in range(red.n_index))
    assert red.eps == Fraction(red.measured["eps"]) ** 2 * 3


@pytest.mark.parametrize("which", ["length", "alphabet"])
def test_exhaustive_matches_linearity(which):
    red, progs = small_length(1) if which == "length" else (small_alphabet(), family("general", 3, 2, 1, 5, 2))
    for f in progs:
        ex = reduction_error_exhaustive(red, f)
        assert reduction_error(red, f) == pytest.approx(ex, abs=1e-12)
        assert ex <= float(red.eps) + 1e-12


@pytest.mark.parametrize("which", ["length", "alphabet"])
def test_reduced_program_agrees_with_reduce(which):
    red, progs = small_length(2, k=1) if which == "length" else (small_alphabet(), family("general", 3, 2, 1, 2, 3))
    n1, s1 = red.tgt
    xs = Uniform(n1, s1).eval_many(np.arange(1 << (n1 * s1)))
    for f in progs[:2]:
        for i in range(red.n_index):
            g = reduced_robp(f, red, i)
            for x in xs:
                assert rb.evaluate(g, tuple(x)) == rb.evaluate(f, red.reduce(i, tuple(x)))


def test_reductions_preserve_permutation_class():
    red, progs = small_length(4, cls="permutation", w=3)
    for f in progs:
        for i in range(red.n_index):
            assert rb.classify(reduced_robp(f, red, i)) == rb.RobpClass.PERMUTATION
    a = small_alphabet(w=2)
    for f in family("permutation", 3, 2, 1, 5, 5):
        for i in range(0, a.n_index, 3):
            assert rb.classify(reduced_robp(f, a, i)) == rb.RobpClass.PERMUTATION


def test_identity_wprg_is_exact():
    g = wprg_from_reduction(IdentityReduction(4, 1, 3))
    for f in family("general", 4, 3, 1, 5, 6):
        got = estimate(g, f, "exhaustive", rational=True).value
        assert got == rb.exact_expectation(f, "rational")
        assert isinstance(got, Fraction)


def test_wprg_modes_agree_and_weights_bounded():
    red, progs = small_length(7)
    g = wprg_from_reduction(red)
    assert all(abs(g.eval(z)[1]) <= g.W for z in range(0, 1 << g.seed_bits, 97))
    f = progs[0]
    exact = estimate(g, f, "exact").value
    assert estimate(g, f, "exhaustive").value == pytest.approx(exact, abs=1e-12)
    mc = estimate(g, f, "montecarlo", samples=4000, rng=make_rng(17))
    assert not mc.certified
    assert abs(mc.value - exact) <= 3 * mc.stderr
    with pytest.raises(ValueError):
        estimate(g, f, "montecarlo")


def test_tail_generator_composition():
    red = small_alphabet()
    ext = make_extractor(4, 2, 2, 4)
    tail = NZ(ext, 3)
    g = wprg_from_reduction(red, tail, tail_eps=0.25)
    assert g.eps == red.eps + red.K * Fraction(1, 4)
    f = one("general", 3, 2, 1, seed=8)
    lit = estimate(g, f, "exhaustive").value
    assert g.exact_estimate(f) == pytest.approx(lit, abs=1e-12)


def test_sampler_literal_matches_structured():
    base = wprg_from_reduction(IdentityReduction(2, 1, 2))
    samp = make_sampler(2, 0.5, 0.5)
    g = SamplerWprg(base, samp, 1, 2, 2, 0.5)
    assert g.seed_length == samp.r + samp.p
    for f in family("general", 2, 2, 1, 5, 9):
        assert estimate(g, f, "exhaustive").value == pytest.approx(g.exact_estimate(f), abs=1e-12)


def test_refusals():
    base = NZ(make_extractor(2, 1, 1), 2)
    with pytest.raises(ReductionRefused):
        length_reduction(base, 2, 1, 2, 1, 0.1, eps=0.1)
    with pytest.raises(ValueError):
        length_reduction(base, 2, 1, 2, 2, 0.0)
    with pytest.raises(ReductionRefused):
        alphabet_reduction(make_extractor(4, 2, 1, 4), 3, 1, 2)
    with pytest.raises(ReductionRefused):
        alphabet_reduction(make_extractor(4, 2, 1, 3), 3, 1, 2, eps=1e-6)
    b = wprg_from_reduction(IdentityReduction(2, 1, 2))
    with pytest.raises(ReductionRefused):
        sampler_amplified_wprg(b, make_sampler(2, 0.5, 0.5), 1, 2, 2, 0.5, base_error=0.1)
    with pytest.raises(ReductionRefused):
        main_reduction_pipeline(4, 1, 2, [{"kind": "length", "k": 1, "generator": {"kind": "uniform", "n": 4, "s": 1}}])


def test_pipeline_with_uniform_base_is_exact():
    progs = family("general", 4, 3, 1, 5, 10)
    red = main_reduction_pipeline(4, 1, 3, [{"kind": "length", "k": 3,
                                             "generator": {"kind": "uniform", "n": 4, "s": 1}}], progs)
    assert red.eps == 0
    for f in progs:
        assert reduction_error(red, f) <= 1e-12

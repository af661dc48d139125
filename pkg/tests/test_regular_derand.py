from fractions import Fraction

import numpy as np
import pytest

from conftest import family, one
from robpwprg import robp as rb
from robpwprg.generators import exact_segment, mgg_inw_family
from robpwprg.harness import walk_family
from robpwprg.perm_wprg import PermLevel, PermSchedule, multi_accept_estimate, perm_wprg
from robpwprg.randomness import MGG, Complete
from robpwprg.regular_derand import (DerandLevel, LabeledProgram, derand_walk, derand_walk_matrix,
                                     derandomized_product, layer_graph, regular_estimator,
                                     segment_sv_bound, segment_sv_error, walk_bijection_check)


def complete_family(s, L):
    return [Complete(1 << (s << t)) for t in range(L)]


def regular(n, w, s, seed):
    return rb.labeled(one("regular", n, w, s, seed=seed))


def test_complete_family_gives_exact_product():
    for s in (1, 2):
        f = regular(8, 4, s, seed=s)
        fam = complete_family(s, 3)
        for l, r in ((0, 8), (0, 5), (2, 4), (3, 4)):
            L = max(0, (r - l - 1).bit_length())
            got = derand_walk_matrix(f, l, r, fam[:L])
            assert np.allclose(got, exact_segment(f, l, r), atol=1e-12)


def test_unit_segment_is_the_layer():
    f = regular(4, 3, 1, seed=3)
    for l in range(4):
        assert np.allclose(derand_walk_matrix(f, l, l + 1, []), f.layer_mean(l))


def test_derandomized_product_two_way():
    f = regular(2, 4, 1, seed=4)
    g1, g2 = layer_graph(f, 1), layer_graph(f, 2)
    assert g1.is_two_way() and g2.is_two_way()
    p = derandomized_product(g1, g2, Complete(2))
    assert p.is_two_way() and p.d == 4
    assert np.allclose(p.transition(4), g1.transition(4) @ g2.transition(4))
    with pytest.raises(ValueError):
        derandomized_product(g1, g2, Complete(4))


@pytest.mark.parametrize("s", [1, 2])
def test_walk_is_a_bijection(s):
    fam = walk_family(s, 3, power=1, mixing_levels=3)
    for f in family("regular", 8, 4, s, 3, seed=10 + s):
        assert walk_bijection_check(f, 0, 8, fam)
        assert walk_bijection_check(f, 1, 6, fam)


def test_walk_splits_into_halves():
    fam = walk_family(1, 2, power=1, mixing_levels=2)
    f = LabeledProgram(regular(4, 3, 1, seed=5))
    top = fam[-1]
    eb = top.log_c
    total = 1 + sum(h.log_c for h in fam)
    rng = np.random.default_rng(0)
    for _ in range(50):
        u, seed = int(rng.integers(3)), int(rng.integers(1 << total))
        steps = []
        v, out = derand_walk(f, 0, 4, u, seed, fam, trace=lambda layer, vv, sd: steps.append((layer, int(vv))))
        assert [t[0] for t in steps] == [0, 1, 2, 3]
        v1, s1 = derand_walk(f, 0, 2, u, seed >> eb, fam[:-1])
        assert steps[1][1] == int(v1)
        vert, e = top.rot(np.array([int(s1)]), np.array([seed & ((1 << eb) - 1)]))
        v2, s2 = derand_walk(f, 2, 4, int(v1), int(vert[0]), fam[:-1])
        assert int(v) == int(v2)
        assert int(out) == (int(s2) << eb) | int(e[0])


def test_rational_walk_matrix_doubly_stochastic():
    fam = walk_family(1, 3, power=1, mixing_levels=3)
    for f in family("regular", 8, 4, 1, 3, seed=6):
        m = derand_walk_matrix(f, 0, 8, fam, exact=True)
        assert all(sum(row) == 1 for row in m)
        assert all(sum(m[i][j] for i in range(4)) == 1 for j in range(4))
        assert isinstance(m[0][0], Fraction)


def test_segment_sv_error_within_bound():
    fam = mgg_inw_family(1, 3, lam_target=0.02)
    lam = max(h.lam for h in fam if not isinstance(h, Complete))
    for f in family("regular", 8, 4, 1, 5, seed=7):
        for l, r in ((0, 8), (0, 4), (4, 8), (1, 7)):
            L = max(0, (r - l - 1).bit_length())
            assert segment_sv_error(f, l, r, fam[:L] if L < 3 else fam) <= segment_sv_bound(lam, l, r) + 1e-9


def test_zero_levels_is_exact():
    for f in family("regular", 6, 3, 1, 5, seed=8):
        res = regular_estimator(f, 0.1, [])
        assert res.value == pytest.approx(res.exact, abs=1e-15)
        assert res.declared == 0.0
        assert regular_estimator(f, 0.1, [], mode="exhaustive").value == res.value


@pytest.mark.parametrize("kw", [{"k": 1, "family": "complete"}, {"k": 1, "family": "mgg", "lam": 0.99}])
def test_exhaustive_matches_exact(kw):
    for f in family("regular", 4, 2, 1, 3, seed=9):
        a = regular_estimator(f, 0.1, [DerandLevel(**kw)])
        b = regular_estimator(f, 0.1, [DerandLevel(**kw)], mode="exhaustive")
        assert a.value == pytest.approx(b.value, abs=1e-12)


def test_estimator_within_declared_error():
    for f in family("regular", 8, 4, 1, 5, seed=11):
        res = regular_estimator(f, 0.05, [DerandLevel(family="mgg", tau=0.1)])
        assert res.declared <= 0.05
        assert abs(res.value - res.exact) <= res.declared + 1e-12


def test_rejects_general_programs():
    with pytest.raises(ValueError):
        regular_estimator(one("general", 4, 3, 1, seed=1), 0.1, [])


def test_cross_pipeline_with_transform_and_perm_route():
    sched = PermSchedule([PermLevel(2, "mgg"), PermLevel(0, "complete")])
    for f in family("regular", 16, 4, 1, 3, seed=12):
        p = rb.regular_to_permutation_binary(f)
        assert rb.exact_expectation(p, "rational") == rb.exact_expectation(f, "rational")
        g = perm_wprg(16, 1, 0.1 / p.w, sched)
        via_perm, dec_perm = multi_accept_estimate(p, 0.1, sched, g)
        via_reg = regular_estimator(f, 0.05, [DerandLevel(family="mgg", tau=0.1)])
        assert abs(via_perm - via_reg.value) <= dec_perm + via_reg.declared + 1e-12

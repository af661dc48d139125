import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robpwprg import robp as rb
from robpwprg.instances import random_robp
from robpwprg.rng import make_rng

from conftest import family, one


def trace_oracle(f, x):
    """Follow the explicit edge list (i, u, x) -> v."""
    edges = {(i, u, a): int(f.trans[i, u, a]) for i in range(f.n) for u in range(f.w) for a in range(f.d)}
    u = f.start
    for i, a in enumerate(x):
        u = edges[(i, u, a)]
    return int(u in f.accept)


def test_single_state_accepts():
    f = rb.Robp(np.zeros((1, 1, 2), dtype=int), 1, 0, {0})
    assert rb.evaluate(f, (0,)) == 1 and rb.evaluate(f, (1,)) == 1


def test_identity_program_accepts_everything():
    f = rb.identity_robp(2, 3, 1, start=1, accept=(1,))
    assert all(rb.evaluate(f, x) == 1 for x in itertools.product(range(2), repeat=2))


def test_evaluate_matches_path_trace():
    f = one("general", 3, 4, 2, seed=3)
    for x in itertools.product(range(4), repeat=3):
        assert rb.evaluate(f, x) == trace_oracle(f, x)


def test_evaluate_errors():
    f = one("general", 3, 2, 1)
    with pytest.raises(rb.RobpError):
        rb.evaluate(f, (0, 1))
    with pytest.raises(rb.RobpError):
        rb.evaluate(f, (0, 1, 2))


def test_construction_invariants():
    with pytest.raises(rb.RobpError):
        rb.Robp(np.zeros((0, 1, 2), dtype=int), 1, 0, {0})
    with pytest.raises(rb.RobpError):
        rb.Robp(np.full((1, 2, 2), 2), 1, 0, {0})
    with pytest.raises(rb.RobpError):
        rb.Robp(np.zeros((1, 2, 3), dtype=int), 1, 0, {0})


def test_transition_matrix_base_and_product():
    f = one("general", 4, 3, 1, seed=5)
    m = rb.transition_matrix(f, 1, 2, (1,))
    expect = np.zeros((3, 3), dtype=int)
    expect[np.arange(3), f.trans[1, :, 1]] = 1
    assert (m == expect).all()
    x, y = (0, 1), (1, 1)
    assert (rb.transition_matrix(f, 0, 4, x + y) == rb.transition_matrix(f, 0, 2, x) @ rb.transition_matrix(f, 2, 4, y)).all()
    with pytest.raises(rb.RobpError):
        rb.transition_matrix(f, 2, 2, ())


def test_permutation_transition_is_permutation():
    f = one("permutation", 5, 4, 1, seed=2)
    for x in itertools.product(range(2), repeat=5):
        m = rb.transition_matrix(f, 0, 5, x)
        assert (m.sum(axis=0) == 1).all() and (m.sum(axis=1) == 1).all()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 4), w=st.integers(1, 4), s=st.integers(1, 2),
       cls=st.sampled_from(["general", "regular", "permutation"]))
def test_transition_matrix_agrees_with_evaluate(seed, n, w, s, cls):
    f = random_robp(make_rng(seed), cls, n, w, s)
    rng = make_rng(seed, 1)
    x = tuple(int(v) for v in rng.integers(0, 1 << s, size=n))
    m = rb.transition_matrix(f, 0, n, x)
    assert int(m[f.start] @ f.accept_vector) == rb.evaluate(f, x)


def test_exact_expectation_examples():
    assert rb.exact_expectation(rb.identity_robp(3, 2, 1, accept=(0, 1))) == 1.0
    f = rb.Robp(np.array([[[0, 1], [1, 1]]]), 1, 0, {0})
    assert rb.exact_expectation(f, "rational") == Fraction(1, 2)
    assert rb.exact_expectation(f) == 0.5


def test_expectation_modes_agree():
    for f in family("general", 3, 4, 2, 10, seed=9):
        r = rb.exact_expectation(f, "rational")
        assert rb.exact_expectation(f, "enumerate") == r
        assert abs(rb.exact_expectation(f) - float(r)) < 1e-12
    with pytest.raises(rb.RobpError):
        rb.exact_expectation(one("general", 12, 2, 2), "enumerate", cap=1000)


def test_classify_examples():
    assert rb.classify(one("permutation", 4, 5, 2)) == rb.RobpClass.PERMUTATION
    regs = family("regular", 4, 5, 2, 200, seed=4)
    classes = [rb.classify(f) for f in regs]
    assert all(c != rb.RobpClass.GENERAL for c in classes)
    assert rb.RobpClass.REGULAR in classes
    f = rb.Robp(np.array([[[0, 0], [1, 0]]]), 1, 0, {0})
    assert rb.classify(f) == rb.RobpClass.GENERAL


def test_labeling_examples():
    f = one("permutation", 3, 4, 1, seed=6)
    lab = rb.assign_two_way_labeling(f)
    g = f.with_labels(lab)
    rb.check_labeling(g)
    assert (rb.assign_two_way_labeling(f) == lab).all()
    one_state = rb.identity_robp(2, 1, 2)
    lab1 = rb.assign_two_way_labeling(one_state)
    assert (lab1[:, 0, :] == np.arange(4)).all()
    with pytest.raises(rb.RobpError):
        rb.assign_two_way_labeling(rb.Robp(np.array([[[0, 0], [1, 0]]]), 1, 0, {0}))


def test_rotation_step_bijection():
    f = rb.labeled(one("regular", 3, 5, 2, seed=8))
    for i in range(1, 4):
        outs = {rb.rotation_step(f, i, u, x) for u in range(5) for x in range(4)}
        assert len(outs) == 20
        for u in range(5):
            for x in range(4):
                assert rb.rotation_step(f, i, u, x)[0] == f.trans[i - 1, u, x]
    ident = rb.labeled(rb.identity_robp(1, 3, 1))
    assert rb.rotation_step(ident, 1, 2, 1) == (2, 1)


def test_transform_on_permutation_is_identity():
    f = one("permutation", 5, 6, 1, seed=1)
    assert rb.regular_to_permutation_binary(f) == f


def test_transform_self_loop_layer():
    f = rb.Robp(np.array([[[0, 0], [1, 1]], [[0, 1], [1, 0]]]), 1, 0, {1})
    g = rb.regular_to_permutation_binary(f)
    assert rb.classify(g) == rb.RobpClass.PERMUTATION
    assert rb.exact_expectation(g, "rational") == rb.exact_expectation(f, "rational") == Fraction(1, 2)


def test_transform_batch_and_fast_path():
    rng = make_rng(77)
    for _ in range(100):
        n, w = int(rng.integers(1, 7)), int(rng.integers(1, 9))
        f = random_robp(rng, "regular", n, w, 1)
        g = rb.regular_to_permutation_binary(f)
        assert rb.classify(g) == rb.RobpClass.PERMUTATION
        assert rb.exact_expectation(g, "rational") == rb.exact_expectation(f, "rational")
        assert rb.regular_to_permutation_binary(f, rewalk=False) == g


def test_transform_errors():
    with pytest.raises(rb.RobpError):
        rb.regular_to_permutation_binary(one("permutation", 2, 3, 2))
    with pytest.raises(rb.RobpError):
        rb.regular_to_permutation_binary(rb.Robp(np.array([[[0, 0], [1, 0]]]), 1, 0, {0}))


def test_weight_examples():
    assert rb.robp_weight(rb.identity_robp(3, 2, 1, accept=(0, 1))) == 0.0
    # layer 1: 0 -x-> 0 or 1; layer 2 identity; accept {1}
    f = rb.Robp(np.array([[[0, 1], [1, 1]], [[0, 0], [1, 1]]]), 1, 0, {1})
    # q_2 = (0, 1), q_1 = (0, 1), q_0 = (1/2, 1)
    # layer 1 edges: 0->0 |0-1/2|, 0->1 |1-1/2|, 1->1 twice 0; layer 2: all 0
    assert rb.robp_weight(f) == pytest.approx(1.0)


def test_weight_envelope_binary_regular():
    rng = make_rng(31)
    worst = 0.0
    for _ in range(60):
        n, w = int(rng.integers(1, 7)), int(rng.integers(1, 5))
        f = random_robp(rng, "regular", n, w, 1)
        worst = max(worst, rb.robp_weight(f) / (w * w))
    assert worst <= 4.0


def test_text_round_trip():
    for f in [one("general", 3, 4, 2), rb.labeled(one("regular", 2, 3, 1, seed=2))]:
        g = rb.loads(rb.dumps(f))
        assert g == f and rb.dumps(g) == rb.dumps(f)
        if f.labels is not None:
            assert (g.labels == f.labels).all()

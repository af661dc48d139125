"""Acceptance run: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import os
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))
from conftest import family  # noqa: E402
from robpwprg import harness as H  # noqa: E402
from robpwprg import robp as rb  # noqa: E402
from robpwprg.generators import NZ, Uniform, run  # noqa: E402
from robpwprg.randomness import make_extractor  # noqa: E402
from robpwprg.wpr import (alphabet_reduction, compose_chain, length_reduction,  # noqa: E402
                          main_reduction_pipeline, measure_base_error, reduced_robp)

CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs", "acceptance.json")

# criterion -> (suites, runtime limit in seconds or None)
CRITERIA = {
    1: ("Richardson envelope", ["richardson"], 60),
    2: ("binary-splitting recursion equivalence", ["binary-splitting"], 10),
    3: ("INW sv-fooling", ["inw-sv"], 300),
    4: ("binary-splitting envelope over INW", ["inw-sv"], None),
    5: ("one-level NZ", ["nz"], 120),
    6: ("reduction calculus", ["length-reduction", "alphabet-reduction"], None),
    7: ("end-to-end WPRG", ["end-to-end"], 600),
    8: ("permutation pipeline", ["perm", "multi-accept"], None),
    9: ("regular to permutation transform", ["transform"], 60),
    10: ("derandomized walk", ["derand-walk", "regular"], 600),
    11: ("sampler amplification", ["sampler"], None),
}


def run_per_suite(config):
    out = {}
    for suite in H.suites_of(config):
        t = time.perf_counter()
        rep = H.run_suite({"name": config["name"], "mode": config["mode"], "caps": config["caps"],
                           "suites": [suite]})
        out[suite["name"]] = (rep, time.perf_counter() - t)
    return out


@pytest.fixture(scope="module")
def config():
    return H.load_config(CONFIG)


@pytest.fixture(scope="module")
def results(config):
    return run_per_suite(config)


def line(ok: bool, num: int, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'} criterion {num:2d} {CRITERIA[num][0] if num in CRITERIA else 'determinism'}: {detail}"


def judge(results, num, pipelines=None):
    _, suites, limit = CRITERIA[num]
    recs, checks, secs = [], [], 0.0
    for s in suites:
        rep, t = results[s]
        recs += [r for r in rep.records if pipelines is None or r.pipeline in pipelines]
        checks += rep.checks
        secs += t
    if num == 4:
        checks = []
    elif num == 3:
        checks = [c for c in checks if c.name.startswith("inw-sv")]
    viol = [r for r in recs if r.violated]
    bad = [c.name for c in checks if not c.ok]
    timed_ok = limit is None or secs < limit
    ok = bool(recs) and not viol and not bad and timed_ok
    detail = (f"{len(recs)} records, {len(viol)} violations, max ratio {max((r.ratio for r in recs), default=0):.3g}, "
              f"{len(checks)} checks ({len(bad)} failed), {secs:.1f} s" + (f" (limit {limit} s)" if limit else ""))
    return ok, detail, recs, bad


def report(capsys, text):
    with capsys.disabled():
        print("\n" + text)


def test_criterion_01_richardson(results, capsys):
    ok, detail, _, _ = judge(results, 1)
    report(capsys, line(ok, 1, detail))
    assert ok


def test_criterion_02_binary_splitting(results, capsys):
    ok, detail, _, _ = judge(results, 2)
    report(capsys, line(ok, 2, detail))
    assert ok


def test_criterion_03_inw_sv(results, capsys):
    ok, detail, recs, _ = judge(results, 3, {"verify-inw-sv"})
    ok = ok and len(recs) == 50
    report(capsys, line(ok, 3, detail))
    assert ok


def test_criterion_04_lemma45(results, capsys):
    ok, detail, recs, _ = judge(results, 4, {"verify-lemma45"})
    ok = ok and len(recs) == 100
    report(capsys, line(ok, 4, detail))
    assert ok


def test_criterion_05_nz(results, capsys):
    ok, detail, _, _ = judge(results, 5)
    report(capsys, line(ok, 5, detail))
    assert ok


def _exhaustive_reduced_equal(red, progs) -> bool:
    n1, s1 = red.tgt
    xs = Uniform(n1, s1).eval_many(np.arange(1 << (n1 * s1)))
    for f in progs:
        acc = f.accept_vector
        for i in range(red.n_index):
            g = reduced_robp(f, red, i)
            direct = np.array([rb.evaluate(f, red.reduce(i, tuple(x))) for x in xs])
            if not (acc[run(g, xs)[:, f.start]] == direct).all():
                return False
    return True


def test_criterion_06_reduction_calculus(results, config, capsys):
    ok, detail, _, _ = judge(results, 6)
    # composition metadata of the end-to-end chain, exactly
    suite = next(s for s in config["suites"] if s["name"] == "end-to-end")
    fam = suite["family"]
    corpus = H.gen_instances(fam)
    chain = main_reduction_pipeline(fam["n"], fam["s"], fam["w"], suite["pipeline"]["schedule"], corpus)
    r1, r2 = chain.stages()
    meta_ok = (chain.d == r1.d + r2.d and chain.K == r1.K * r2.K
               and chain.eps == Fraction(r1.eps) + Fraction(r1.K) * Fraction(r2.eps)
               and compose_chain([r1, r2]).eps == chain.eps)
    # reduced programs agree with reduce() on every (index, input)
    progs_a = family("general", 3, 2, 1, 50, seed=601)
    alpha = alphabet_reduction(make_extractor(4, 2, 1, 3), 3, 1, 2)
    progs_l = family("general", 2, 2, 1, 10, seed=602)
    base = NZ(make_extractor(2, 1, 1), 2)
    length = length_reduction(base, 2, 1, 2, 3, measure_base_error(base, progs_l, 2))
    func_ok = _exhaustive_reduced_equal(alpha, progs_a) and _exhaustive_reduced_equal(length, progs_l)
    ok = ok and meta_ok and func_ok
    report(capsys, line(ok, 6, f"{detail}; compose metadata exact: {meta_ok}; "
                               f"reduced_robp equal on all inputs (60 programs): {func_ok}"))
    assert ok


def test_criterion_07_end_to_end(results, capsys):
    ok, detail, recs, _ = judge(results, 7)
    vacuous = sum(r.declared_eps >= 1 for r in recs)
    report(capsys, line(ok, 7, f"{detail}; declared bound >= 1 on {vacuous}/{len(recs)} instances "
                               f"(max measured {max(r.measured_err for r in recs):.3g})"))
    assert ok


def test_criterion_08_permutation(results, capsys):
    ok, detail, recs, _ = judge(results, 8)
    kinds = {r.pipeline for r in recs}
    ok = ok and kinds == {"perm", "multi-accept"}
    report(capsys, line(ok, 8, detail))
    assert ok


def test_criterion_09_transform(results, capsys):
    ok, detail, recs, _ = judge(results, 9)
    ok = ok and len(recs) == 200 and all(r.measured_err == 0.0 for r in recs)
    report(capsys, line(ok, 9, detail + "; all equalities exact"))
    assert ok


def test_criterion_10_derand_walk(results, capsys):
    ok, detail, recs, _ = judge(results, 10)
    ok = ok and {r.pipeline for r in recs} == {"verify-derand-walk", "regular"}
    report(capsys, line(ok, 10, detail))
    assert ok


def test_criterion_11_sampler(results, capsys):
    ok, detail, recs, bad = judge(results, 11)
    rep, _ = results["sampler"]
    seed_ok = any(c.name.endswith("seed-length") and c.ok for c in rep.checks)
    ex = recs[0].extra
    ok = ok and seed_ok
    report(capsys, line(ok, 11, f"{detail}; seed length {ex['seed_length']} = r {ex['r']} + k {ex['k']} * p {ex['p']}"))
    assert ok


def test_criterion_12_determinism(results, config, capsys):
    first = H.Report(config["name"], config["mode"])
    for rep, _ in results.values():
        first.extend(rep)
    second = H.run_suite(config)
    ok = (H.report_csv(first) == H.report_csv(second) and H.report_json(first) == H.report_json(second))
    report(capsys, line(ok, 12, f"two reproducible runs, {len(second.records)} records, "
                                f"csv and json byte-identical: {ok}"))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))

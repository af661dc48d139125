"""Experiment orchestration: configs, instance corpora, suites and reports.

A config is a JSON object:

    {"name": "...", "mode": "reproducible", "caps": {"seeds": 1048576},
     "suites": [{"name": "...", "family": {...}, "pipeline": {...}}, ...]}

A config with top-level ``family``/``pipeline`` keys is a single suite.
``family`` holds class, n, w (int or list, cycled per instance), s, count,
seed and accept ("random", "single", "all", "none" or a list).  Every
instance j draws from its own stream ``make_rng(seed, j)``.

``pipeline.kind`` selects an estimator (reduction, perm, multi-accept,
regular, sampler) or ``verify`` with ``check`` naming an oracle suite.
In reproducible mode instances run serially and wall times are written as
0, so two runs of one config give byte-identical reports.  Fast mode runs
instances on a thread pool and records wall times; per-instance arithmetic
is unchanged, so measured values agree with reproducible mode.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import robp as rb
from .error_reduction import (binary_splitting_direct, binary_splitting_terms, dyadic_intervals,
                              evaluate_terms, lemma45_bound, richardson_block, richardson_bound,
                              richardson_terms)
from .generators import INW, NZ, exact_segment, gen_sv_error, mgg_inw_family
from .instances import CLASSES, random_robp
from .matrix import entrywise_max, inf_norm, sv_approx_error
from .perm_wprg import PermSchedule, default_perm_schedule, multi_accept_estimate, perm_wprg
from .randomness import Complete, make_extractor, make_sampler
from .regular_derand import (DerandLevel, LabeledProgram, derand_walk_matrix, regular_estimator,
                             segment_sv_bound, walk_bijection_check)
from .rng import make_rng
from .wpr import (IdentityReduction, estimate, main_reduction_pipeline, sampler_amplified_wprg,
                  sampler_parameters, wprg_from_reduction)

COLUMNS = ("instance_id", "class", "n", "w", "s", "pipeline", "declared_eps", "measured_err",
           "ratio", "seed_bits", "weight_bound", "wall_ms")
VIOLATION_TOL = 1e-12
DEFAULT_SEED_CAP = 1 << 20


@dataclass
class Record:
    instance_id: str
    cls: str
    n: int
    w: int
    s: int
    pipeline: str
    declared_eps: float
    measured_err: float
    seed_bits: int = 0
    weight_bound: float = 1.0
    wall_ms: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.declared_eps > 0:
            return self.measured_err / self.declared_eps
        return 0.0 if self.measured_err <= VIOLATION_TOL else math.inf

    @property
    def violated(self) -> bool:
        return not self.measured_err <= self.declared_eps + VIOLATION_TOL

    def row(self) -> dict:
        return {"instance_id": self.instance_id, "class": self.cls, "n": self.n, "w": self.w,
                "s": self.s, "pipeline": self.pipeline, "declared_eps": self.declared_eps,
                "measured_err": self.measured_err, "ratio": self.ratio, "seed_bits": self.seed_bits,
                "weight_bound": self.weight_bound, "wall_ms": self.wall_ms}


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class Report:
    name: str = ""
    mode: str = "reproducible"
    records: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        return [r for r in self.records if r.violated]

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.records), default=0.0)

    @property
    def passed(self) -> bool:
        return not self.violations and all(c.ok for c in self.checks)

    def summary(self) -> dict:
        return {"records": len(self.records), "violations": len(self.violations),
                "max_ratio": self.max_ratio, "failed_checks": [c.name for c in self.checks if not c.ok],
                "passed": self.passed}

    def extend(self, other: "Report"):
        self.records.extend(other.records)
        self.checks.extend(other.checks)


# config and instances

def load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def suites_of(config: dict) -> list[dict]:
    if "suites" in config:
        return list(config["suites"])
    if "pipeline" in config or "family" in config:
        return [{k: config[k] for k in ("name", "family", "pipeline") if k in config}]
    return []


def _pick(v, j: int):
    return v[j % len(v)] if isinstance(v, (list, tuple)) else v


def gen_instances(family: dict) -> list[rb.Robp]:
    if "seed" not in family:
        raise ValueError("family needs an explicit rng seed")
    cls = family.get("class", "permutation")
    if cls not in CLASSES:
        raise ValueError(f"unknown class {cls!r}")
    out = []
    for j in range(family.get("count", 1)):
        n, w, s = (int(_pick(family[key], j)) for key in ("n", "w", "s"))
        if n < 1 or w < 1 or s < 1:
            raise ValueError("invalid shape")
        acc = family.get("accept", "random")
        rng = make_rng(int(family["seed"]), j)
        if acc == "all":
            f = random_robp(rng, cls, n, w, s, tuple(range(w)))
        elif acc == "none":
            f = random_robp(rng, cls, n, w, s, ())
        else:
            f = random_robp(rng, cls, n, w, s, tuple(acc) if isinstance(acc, list) else acc)
        out.append(f)
    return out


# estimator pipelines: prepare(programs, pipeline, caps) -> per-program function

def _estimate_fields(g, f, value: float) -> dict:
    exact = float(rb.exact_expectation(f))
    return {"declared": float(g.eps), "measured": abs(value - exact), "seed_bits": g.seed_bits,
            "weight": float(g.W)}


def _prep_reduction(programs, pipe, caps):
    by_shape = {}

    def build(f):
        key = (f.n, f.s, f.w)
        if key not in by_shape:
            corpus = [g for g in programs if (g.n, g.s, g.w) == key]
            red = main_reduction_pipeline(f.n, f.s, f.w, pipe["schedule"], corpus)
            by_shape[key] = wprg_from_reduction(red)
        return by_shape[key]

    for f in programs:
        build(f)

    def run(f):
        g = build(f)
        return _estimate_fields(g, f, estimate(g, f, pipe.get("estimate", "exact"), caps["seeds"]).value)
    return run


def _perm_schedule(pipe, n, eps):
    if "schedule" in pipe:
        return PermSchedule.from_records(pipe["schedule"], pipe.get("threshold", 4))
    return default_perm_schedule(n, eps, pipe.get("threshold", 4))


def _prep_perm(programs, pipe, caps):
    eps = pipe["epsilon"]
    built = {}
    for f in programs:
        if len(f.accept) != 1:
            raise ValueError("the permutation pipeline needs single-accept programs")
        key = (f.n, f.s)
        if key not in built:
            corpus = [g for g in programs if (g.n, g.s) == key] if pipe.get("measure_tau", True) else None
            built[key] = perm_wprg(f.n, f.s, eps, _perm_schedule(pipe, f.n, eps), corpus)

    def run(f):
        g = built[(f.n, f.s)]
        return _estimate_fields(g, f, estimate(g, f, "exact").value)
    return run


def _prep_multi_accept(programs, pipe, caps):
    eps = pipe["epsilon"]
    built = {}
    for f in programs:
        key = (f.n, f.s, f.w)
        if key not in built:
            built[key] = perm_wprg(f.n, f.s, eps / f.w, _perm_schedule(pipe, f.n, eps / f.w))

    def run(f):
        g = built[(f.n, f.s, f.w)]
        val, declared = multi_accept_estimate(f, eps, wprg=g)
        exact = float(rb.exact_expectation(f))
        return {"declared": declared, "measured": abs(val - exact), "seed_bits": g.seed_bits,
                "weight": float(g.W)}
    return run


def _prep_regular(programs, pipe, caps):
    eps = pipe["epsilon"]
    records = pipe.get("schedule", [])
    mode = pipe.get("estimate", "exact")

    def run(f):
        sched = [DerandLevel.from_record(r) for r in records]
        res = regular_estimator(f, eps, sched, mode, caps["seeds"])
        if res.chain is None:
            bits, weight = f.n * f.s, 1.0
        else:
            bits, weight = res.chain.d + res.chain.tgt[0] * res.chain.tgt[1], float(res.chain.K)
        return {"declared": res.declared, "measured": abs(res.value - res.exact), "seed_bits": bits,
                "weight": weight, "extra": {"levels": [lv.k for lv in sched]}}
    return run


def _prep_sampler(programs, pipe, caps):
    f0 = programs[0]
    n, s = f0.n, f0.s
    w = max(f.w for f in programs)
    eps = pipe["epsilon"]
    base = wprg_from_reduction(IdentityReduction(n, s, w))
    base_error = max(abs(base.exact_estimate(f) - float(rb.exact_expectation(f))) for f in programs)
    sp = sampler_parameters(n, w, eps, float(base.W))
    samp = make_sampler(base.seed_bits, sp.alpha, sp.gamma)
    g = sampler_amplified_wprg(base, samp, sp.k, n, w, eps, base_error)

    def run(f):
        out = _estimate_fields(g, f, g.exact_estimate(f))
        out["extra"] = {"seed_length": g.seed_length, "r": samp.r, "p": samp.p, "k": sp.k,
                        "index_bits": g.index_bits}
        return out
    run.wprg = g
    return run


PIPELINES: dict[str, Callable] = {
    "reduction": _prep_reduction,
    "perm": _prep_perm,
    "multi-accept": _prep_multi_accept,
    "regular": _prep_regular,
    "sampler": _prep_sampler,
}


def _class_name(f: rb.Robp, family: dict) -> str:
    return family.get("class", rb.classify(f).value)


def _run_pipeline(suite: dict, caps: dict, mode: str) -> Report:
    family, pipe = suite["family"], suite["pipeline"]
    programs = gen_instances(family)
    report = Report()
    if not programs:
        return report
    run = PIPELINES[pipe["kind"]](programs, pipe, caps)
    label = suite.get("name", pipe["kind"])

    def one(j):
        t = time.perf_counter()
        out = run(programs[j])
        ms = (time.perf_counter() - t) * 1000.0
        f = programs[j]
        return Record(f"{label}:{j}", _class_name(f, family), f.n, f.w, f.s, pipe["kind"],
                      float(out["declared"]), float(out["measured"]), int(out["seed_bits"]),
                      float(out["weight"]), 0.0 if mode == "reproducible" else round(ms, 3),
                      out.get("extra", {}))

    idx = range(len(programs))
    if mode == "fast":
        with ThreadPoolExecutor(max_workers=os.cpu_count() or 1) as pool:
            report.records = list(pool.map(one, idx))
    else:
        report.records = [one(j) for j in idx]
    if hasattr(run, "wprg"):
        g = run.wprg
        ok = g.seed_length == g.samp.r + g.k * g.samp.p
        report.checks.append(Check(f"{label}:seed-length", ok, f"{g.seed_length} = {g.samp.r} + {g.k}*{g.samp.p}"))
    return report


# verification suites

def _substochastic(rng, w: int) -> np.ndarray:
    m = rng.random((w, w))
    return m / m.sum(axis=1, keepdims=True) * rng.uniform(0.5, 1.0, size=(w, 1))


def _perturbation(rng, w: int, radius: float) -> np.ndarray:
    e = rng.uniform(-1.0, 1.0, size=(w, w))
    return e / inf_norm(e) * radius * rng.uniform(0.0, 1.0)


def verify_richardson(params: dict, mode: str) -> Report:
    """Random substochastic steps, tables within eps/(2(n+1)) of the true products."""
    rep = Report()
    seed = params.get("seed", 0)
    worst_block = 0.0
    stream = 0
    for n in params.get("ns", [2, 4, 6, 8]):
        for w in params.get("ws", [2, 3, 4]):
            for k in params.get("ks", [1, 3, 5]):
                terms = richardson_terms(n, k).materialize()
                for eps in params.get("epss", [1e-1, 1e-2]):
                    radius = eps / (2 * (n + 1))
                    worst = 0.0
                    for _ in range(params.get("trials", 100)):
                        rng = make_rng(seed, stream)
                        stream += 1
                        steps = [_substochastic(rng, w) for _ in range(n)]
                        table = {}
                        for a in range(n):
                            prod = np.eye(w)
                            for b in range(a + 1, n + 1):
                                prod = prod @ steps[b - 1]
                                table[(a, b)] = prod if b == a + 1 else prod + _perturbation(rng, w, radius)
                        truth = np.eye(w)
                        for m in steps:
                            truth = truth @ m
                        got = evaluate_terms(terms, table, w)
                        worst = max(worst, inf_norm(got - truth))
                        worst_block = max(worst_block, entrywise_max(got - richardson_block(steps, table, k)))
                    rep.records.append(Record(f"richardson:n{n}:w{w}:k{k}:eps{eps:g}", "matrix", n, w, 0,
                                              "verify-richardson", richardson_bound(eps, n, k), worst,
                                              0, float(len(terms))))
    rep.checks.append(Check("richardson:block-formula", worst_block <= 1e-9, f"max diff {worst_block:.3g}"))
    return rep


def _rational_table(rng, n: int, w: int) -> dict:
    def mat():
        num = rng.integers(0, 7, size=(w, w))
        return np.array([[Fraction(int(v), 6) for v in row] for row in num], dtype=object)
    return {(a, b): mat() for a, b in dyadic_intervals(n)}


def verify_binary_splitting(params: dict, mode: str) -> Report:
    rep = Report()
    seed, w = params.get("seed", 0), params.get("w", 3)
    stream = 0
    for n in params.get("ns", [2, 4, 8]):
        for k in params.get("ks", [0, 1, 2]):
            terms = binary_splitting_terms(n, k).materialize()
            worst = Fraction(0)
            for _ in range(params.get("trials", 3)):
                table = _rational_table(make_rng(seed, stream), n, w)
                stream += 1
                diff = evaluate_terms(terms, table, w, exact=True) - binary_splitting_direct(table, n, k, exact=True)
                worst = max(worst, max(abs(v) for v in diff.ravel()))
            rep.records.append(Record(f"binary-splitting:n{n}:k{k}", "matrix", n, w, 0,
                                      "verify-binary-splitting", 0.0, float(worst), 0, float(len(terms))))
            rep.checks.append(Check(f"binary-splitting:n{n}:k{k}:exact", worst == 0, f"{len(terms)} terms"))
    table = _rational_table(make_rng(seed, stream), 4, w)
    m = lambda a, b: table[(a, b)]
    closed = m(0, 1) @ m(1, 2) @ m(2, 4) + m(0, 2) @ m(2, 3) @ m(3, 4) - m(0, 2) @ m(2, 4)
    got = evaluate_terms(binary_splitting_terms(4, 1), table, w, exact=True)
    rep.checks.append(Check("binary-splitting:n4:k1:closed-form", bool((got == closed).all()),
                            f"{len(binary_splitting_terms(4, 1))} terms"))
    return rep


def verify_inw_sv(params: dict, mode: str) -> Report:
    """sv error of INW against 11 lambda log n, then the binary-splitting envelope over its segments."""
    rep = Report()
    fam_cfg = {"class": "permutation", "n": 8, "w": [2, 3, 4, 5, 6], "s": [1, 2], "count": 50,
               "seed": params.get("seed", 0), "accept": "single"} | params.get("family", {})
    programs = gen_instances(fam_cfg)
    lam_target = params.get("lambda", 0.02)
    gens = {}
    for j, f in enumerate(programs):
        L = (f.n - 1).bit_length()
        if (f.s, L) not in gens:
            fam = mgg_inw_family(f.s, L, lam_target)
            lam = _family_lambda(fam)
            gens[(f.s, L)] = (INW(fam, f.s), lam)
        g, lam = gens[(f.s, L)]
        err = gen_sv_error(g, f)
        rep.records.append(Record(f"inw-sv:{j}", "permutation", f.n, f.w, f.s, "verify-inw-sv",
                                  11 * lam * L, err, g.seed_bits, 1.0, extra={"lambda": lam}))
        tau = 0.0
        table = {}
        for a, b in dyadic_intervals(f.n):
            table[(a, b)] = g.segment_mean(f, a, b - a)
            if b - a > 1:
                tau = max(tau, sv_approx_error(table[(a, b)], exact_segment(f, a, b)))
        truth = exact_segment(f, 0, f.n)
        for k in params.get("ks", [1, 2]):
            got = evaluate_terms(binary_splitting_terms(f.n, k), table, f.w)
            rep.records.append(Record(f"lemma45:{j}:k{k}", "permutation", f.n, f.w, f.s, "verify-lemma45",
                                      lemma45_bound(tau, f.n, k), entrywise_max(got - truth), g.seed_bits,
                                      float(len(binary_splitting_terms(f.n, k))), extra={"tau": tau}))
    lams = sorted({lam for _, lam in gens.values()})
    rep.checks.append(Check("inw-sv:lambda", all(l <= lam_target for l in lams), f"measured {lams}"))
    return rep


def verify_nz(params: dict, mode: str) -> Report:
    """|E f - E f(NZ)| against n * 3 * (exact worst flat-source extractor error)."""
    rep = Report()
    s, w, d_ext = params.get("s", 2), params.get("w", 4), params.get("d_ext", 6)
    count = params.get("count", 50)
    need = math.ceil(math.log2(w))
    for n in params.get("ns", [2, 3]):
        for n_src in params.get("n_srcs", [8, 9, 10]):
            ext = make_extractor(n_src, d_ext, s, n_src - need)
            g = NZ(ext, n)
            fam = {"class": params.get("class", "general"), "n": n, "w": w, "s": s, "count": count,
                   "seed": params.get("seed", 0) + 1000 * n + n_src}
            for j, f in enumerate(gen_instances(fam)):
                v = np.zeros(w)
                v[f.start] = 1.0
                acc = np.zeros(w)
                acc[sorted(f.accept)] = 1.0
                err = abs(float(v @ (g.segment_mean(f, 0, n) - exact_segment(f, 0, n)) @ acc))
                rep.records.append(Record(f"nz:n{n}:src{n_src}:{j}", fam["class"], n, w, s, "verify-nz",
                                          n * 3 * ext.eps_ext, err, g.seed_bits, 1.0,
                                          extra={"eps_ext": ext.eps_ext, "method": ext.eps_method}))
            rep.checks.append(Check(f"nz:src{n_src}:certified-exactly", ext.eps_method == "exact", ext.eps_method))
    return rep


def verify_transform(params: dict, mode: str) -> Report:
    rep = Report()
    seed = params.get("seed", 0)
    n_max, w_max = params.get("n_max", 8), params.get("w_max", 8)
    all_perm = True
    for j in range(params.get("count", 200)):
        rng = make_rng(seed, j)
        n = int(rng.integers(1, n_max + 1))
        w = int(rng.integers(1, w_max + 1))
        f = random_robp(rng, "regular", n, w, 1)
        g = rb.regular_to_permutation_binary(f)
        before = rb.exact_expectation(f, "rational")
        after = rb.exact_expectation(g, "rational")
        all_perm &= rb.classify(g) == rb.RobpClass.PERMUTATION
        rep.records.append(Record(f"transform:{j}", "regular", n, w, 1, "verify-transform", 0.0,
                                  float(abs(after - before)), 0, 1.0))
        if after != before:
            rep.checks.append(Check(f"transform:{j}:equal", False, f"{before} != {after}"))
    rep.checks.append(Check("transform:permutation", bool(all_perm)))
    return rep


def walk_family(s: int, levels: int, lam: float | None = None, power: int | None = None,
                mixing_levels: int = 1) -> list:
    return mgg_inw_family(s, levels, lam, power=power, mixing_levels=mixing_levels)


def _family_lambda(fam) -> float:
    return max((h.lam for h in fam if not isinstance(h, Complete)), default=0.0)


def verify_derand_walk(params: dict, mode: str) -> Report:
    """Walk bijectivity and rational double stochasticity on an all-MGG family,
    per-segment sv bounds on both that family and a powered one with small lambda."""
    rep = Report()
    fam_cfg = {"class": "regular", "n": 8, "w": 4, "s": [1, 2], "count": 10,
               "seed": params.get("seed", 0)} | params.get("family", {})
    lam_target = params.get("lambda", 0.02)
    bij_ok, ds_ok = True, True
    fams: dict = {}
    for j, f in enumerate(gen_instances(fam_cfg)):
        L = (f.n - 1).bit_length()
        if (f.s, L) not in fams:
            fams[(f.s, L)] = {"mixing": walk_family(f.s, L, power=1, mixing_levels=L),
                              "powered": walk_family(f.s, L, lam_target)}
        prog = LabeledProgram(f)
        for tag, fam in fams[(f.s, L)].items():
            lam = _family_lambda(fam)
            bits = f.s + sum(h.log_c for h in fam)
            if tag == "mixing":
                bij_ok &= walk_bijection_check(prog, 0, f.n, fam)
                mat = np.array(derand_walk_matrix(prog, 0, f.n, fam, exact=True), dtype=object)
                ds_ok &= all(sum(row) == 1 for row in mat) and all(sum(col) == 1 for col in mat.T)
            for a, b in dyadic_intervals(1 << L):
                if b - a < 2 or a >= f.n:
                    continue
                b = min(b, f.n)
                err = sv_approx_error(derand_walk_matrix(prog, a, b, fam), exact_segment(prog, a, b))
                rep.records.append(Record(f"derand-walk:{tag}:{j}:{a}-{b}", "regular", f.n, f.w, f.s,
                                          "verify-derand-walk", segment_sv_bound(lam, a, b), err, bits, 1.0,
                                          extra={"lambda": lam}))
    rep.checks.append(Check("derand-walk:bijection", bool(bij_ok)))
    rep.checks.append(Check("derand-walk:doubly-stochastic", bool(ds_ok)))
    return rep


def verify_sampler(params: dict, mode: str) -> Report:
    suite = {"name": "sampler", "family": {"class": "general", "n": 4, "w": 2, "s": 1, "count": 20,
                                           "seed": params.get("seed", 0)} | params.get("family", {}),
             "pipeline": {"kind": "sampler", "epsilon": params.get("epsilon", 0.05)}}
    return _run_pipeline(suite, {"seeds": DEFAULT_SEED_CAP}, mode)


VERIFIERS: dict[str, Callable] = {
    "richardson": verify_richardson,
    "binary-splitting": verify_binary_splitting,
    "inw-sv": verify_inw_sv,
    "nz": verify_nz,
    "sampler": verify_sampler,
    "transform": verify_transform,
    "derand-walk": verify_derand_walk,
}


def run_suite(config: dict, mode: str | None = None) -> Report:
    mode = mode or config.get("mode", "reproducible")
    if mode not in ("reproducible", "fast"):
        raise ValueError(f"unknown mode {mode!r}")
    caps = {"seeds": DEFAULT_SEED_CAP} | config.get("caps", {})
    if caps["seeds"] <= 0:
        raise ValueError("caps must be positive")
    report = Report(config.get("name", ""), mode)
    for suite in suites_of(config):
        pipe = suite["pipeline"]
        if pipe["kind"] == "verify":
            part = VERIFIERS[pipe["check"]](pipe, mode)
            if mode == "reproducible":
                for r in part.records:
                    r.wall_ms = 0.0
        else:
            part = _run_pipeline(suite, caps, mode)
        report.extend(part)
    return report


# reports

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv(report: Report) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(COLUMNS)
    for r in report.records:
        row = r.row()
        wr.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, Fraction)):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def report_json(report: Report) -> str:
    doc = {"name": report.name, "mode": report.mode, "summary": report.summary(),
           "checks": [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in report.checks],
           "records": [r.row() | {"extra": r.extra} for r in report.records]}
    return json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n"


def emit_report(report: Report, out_dir: str, fmt: str = "csv", stem: str = "report") -> list[str]:
    """Write the report (csv or json) plus a json summary; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if fmt == "csv":
        p = os.path.join(out_dir, f"{stem}.csv")
        with open(p, "w") as fh:
            fh.write(report_csv(report))
        paths.append(p)
        s = os.path.join(out_dir, f"{stem}.summary.json")
        with open(s, "w") as fh:
            checks = [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in report.checks]
            fh.write(json.dumps(_jsonable({"name": report.name, "mode": report.mode,
                                           "summary": report.summary(), "checks": checks}),
                                indent=1, sort_keys=True) + "\n")
        paths.append(s)
    elif fmt == "json":
        p = os.path.join(out_dir, f"{stem}.json")
        with open(p, "w") as fh:
            fh.write(report_json(report))
        paths.append(p)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return paths


_INT_COLS = ("n", "w", "s", "seed_bits")
_FLOAT_COLS = ("declared_eps", "measured_err", "ratio", "weight_bound", "wall_ms")


def read_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for r in rows:
        for c in _INT_COLS:
            r[c] = int(r[c])
        for c in _FLOAT_COLS:
            r[c] = float(r[c])
    return rows


def summarize_rows(rows: Sequence[dict]) -> dict:
    """Suite summary recomputed from report rows."""
    viol = [r for r in rows if not r["measured_err"] <= r["declared_eps"] + VIOLATION_TOL]
    by_pipe: dict = {}
    for r in rows:
        p = by_pipe.setdefault(r["pipeline"], {"records": 0, "violations": 0, "max_ratio": 0.0})
        p["records"] += 1
        p["max_ratio"] = max(p["max_ratio"], r["ratio"])
        if r in viol:
            p["violations"] += 1
    return {"records": len(rows), "violations": len(viol), "pipelines": by_pipe}

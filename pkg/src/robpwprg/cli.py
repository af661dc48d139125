"""Command line entry point.

    robpwprg gen --config fam.json --out corpus/
    robpwprg estimate --config suite.json --out out/ [--mode fast] [--format json]
    robpwprg derand-regular --config reg.json --out out/ [--trace walk.txt]
    robpwprg verify richardson|binary-splitting|inw-sv|nz|sampler|transform|derand-walk [--config p.json]
    robpwprg lambda-measure --q 6 [--power 2]
    robpwprg sampler-check --q 8 --alpha 0.1 --gamma 0.05
    robpwprg report --input out/report.csv

Suites exit with status 1 when any measured error exceeds its declared bound
or a structural check fails.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness as H
from . import robp as rb
from .randomness import cube_expander, lambda_measure, make_sampler, power_expander, sampler_deviations
from .rng import make_rng


def parse_cap(text: str) -> int:
    text = text.strip()
    if text.startswith("2^"):
        return 1 << int(text[2:])
    return int(text)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--mode", choices=("reproducible", "fast"), default=None)
    p.add_argument("--cap-seeds", type=parse_cap, default=None, help="seed-space cap, e.g. 2^20")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robpwprg", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    _common(sub.add_parser("gen", help="write an instance corpus"))
    _common(sub.add_parser("estimate", help="run estimator suites"))
    p = sub.add_parser("derand-regular", help="run the regular-program estimator")
    _common(p)
    p.add_argument("--trace", help="write a rotation trace of the first instance's derandomized walk")
    p = sub.add_parser("verify", help="run an oracle suite")
    _common(p)
    p.add_argument("check", choices=sorted(H.VERIFIERS))
    p.add_argument("--seed", type=int, default=None)
    p = sub.add_parser("lambda-measure", help="second singular value of an MGG-based expander")
    p.add_argument("--q", type=int, required=True, help="log2 of the vertex count")
    p.add_argument("--power", type=int, default=1)
    p = sub.add_parser("sampler-check", help="build an expander sampler and measure it on random tests")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--tests", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("report", help="summarize a csv report")
    p.add_argument("--input", required=True)
    return ap


def _load(args) -> dict:
    cfg = H.load_config(args.config) if args.config else {}
    if args.cap_seeds is not None:
        cfg["caps"] = cfg.get("caps", {}) | {"seeds": args.cap_seeds}
    return cfg


def _finish(report: H.Report, args, stem: str = "report") -> int:
    if args.out:
        for path in H.emit_report(report, args.out, args.format, stem):
            print(path)
    else:
        sys.stdout.write(H.report_csv(report) if args.format == "csv" else H.report_json(report))
    s = report.summary()
    print(f"records={s['records']} violations={s['violations']} max_ratio={s['max_ratio']:.4g} "
          f"failed_checks={len(s['failed_checks'])}", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_gen(args) -> int:
    cfg = _load(args)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    for suite in H.suites_of(cfg):
        if "family" not in suite:
            continue
        name = suite.get("name", "family")
        for j, f in enumerate(H.gen_instances(suite["family"])):
            path = os.path.join(out, f"{name}-{j:04d}.robp")
            with open(path, "w") as fh:
                fh.write(rb.dumps(f))
            print(path)
    return 0


def cmd_estimate(args) -> int:
    cfg = _load(args)
    return _finish(H.run_suite(cfg, args.mode), args)


def _write_trace(cfg: dict, path: str):
    from .regular_derand import LabeledProgram, derand_walk

    suite = next(s for s in H.suites_of(cfg) if "family" in s)
    f = H.gen_instances(suite["family"] | {"count": 1})[0]
    L = max(1, (f.n - 1).bit_length())
    fam = H.walk_family(f.s, L, power=1, mixing_levels=L)
    prog = LabeledProgram(f)
    bits = f.s + sum(h.log_c for h in fam)
    with open(path, "w") as fh:
        fh.write(f"# n={f.n} w={f.w} s={f.s} seed_bits={bits}\n")
        for seed in range(min(4, 1 << bits)):
            fh.write(f"walk start={f.start} seed={seed}\n")
            derand_walk(prog, 0, f.n, f.start, seed, fam,
                        trace=lambda layer, v, sd: fh.write(f"{layer} {int(v)} {int(sd)}\n"))


def cmd_derand_regular(args) -> int:
    cfg = _load(args)
    for suite in H.suites_of(cfg):
        if suite["pipeline"]["kind"] != "regular":
            raise SystemExit("derand-regular configs must use the regular pipeline")
    if args.trace:
        _write_trace(cfg, args.trace)
    return _finish(H.run_suite(cfg, args.mode), args)


def cmd_verify(args) -> int:
    cfg = _load(args)
    params = dict(cfg.get("params", {}))
    if args.seed is not None:
        params["seed"] = args.seed
    suite = {"name": args.check, "pipeline": {"kind": "verify", "check": args.check} | params}
    config = {"name": f"verify-{args.check}", "suites": [suite], "caps": cfg.get("caps", {})}
    return _finish(H.run_suite(config, args.mode), args, f"verify-{args.check}")


def cmd_lambda(args) -> int:
    h = power_expander(cube_expander(args.q), args.power)
    print(json.dumps({"vertices": h.D, "degree": h.c, "lambda": lambda_measure(h)}))
    return 0


def cmd_sampler_check(args) -> int:
    spec = make_sampler(args.q, args.alpha, args.gamma)
    rng = make_rng(args.seed)
    fails = []
    for _ in range(args.tests):
        dev = sampler_deviations(spec, rng.random(1 << args.q))
        fails.append(float((dev >= spec.alpha).mean()))
    worst = max(fails)
    print(json.dumps({"r": spec.r, "p": spec.p, "t": spec.t, "lambda": spec.lam, "alpha": spec.alpha,
                      "gamma": spec.gamma, "worst_failure_fraction": worst}))
    return 0 if worst <= spec.gamma else 1


def cmd_report(args) -> int:
    with open(args.input) as fh:
        rows = H.read_csv(fh.read())
    summary = H.summarize_rows(rows)
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0 if summary["violations"] == 0 else 1


COMMANDS = {"gen": cmd_gen, "estimate": cmd_estimate, "derand-regular": cmd_derand_regular,
            "verify": cmd_verify, "lambda-measure": cmd_lambda, "sampler-check": cmd_sampler_check,
            "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.cmd](args)


if __name__ == "__main__":
    sys.exit(main())

"""``genlab`` command line: bound tables, oracle verification, sweeps and demos.

Exit codes: 0 success, 1 contract or IO error (or a failed statistical check),
2 a theorem-level cap was exceeded.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys

from . import bounds as B
from .data import make_rng
from .errors import GenlabError, HardAssertionError
from .experiments import (
    Experiment,
    bound_violations,
    emit_outputs,
    load_config,
    parse_config,
    run_badloss_demo,
    run_mnist_sweep,
    run_robust_demo,
    run_sweep_data,
    run_sweep_width,
    summarize,
)
from .oracles import run_verify_suite

SUBCOMMANDS = {
    "bounds": Experiment.BOUNDS_TABLE,
    "verify": None,
    "sweep-width": Experiment.SWEEP_WIDTH,
    "sweep-data": Experiment.SWEEP_DATA,
    "robust-demo": Experiment.ROBUST_DEMO,
    "badloss-demo": Experiment.BADLOSS_DEMO,
    "mnist": Experiment.MNIST_SWEEP,
}


def build_parser():
    p = argparse.ArgumentParser(prog="genlab", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=list(SUBCOMMANDS))
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int, help="base seed (overrides base_seed)")
    p.add_argument("--csv", action="store_true", help="print machine-readable CSV")
    return p


def _config(args):
    over = {"base_seed": args.seed, "output_dir": args.out}
    exp = SUBCOMMANDS[args.subcommand]
    if exp is not None:
        over["experiment"] = exp
    if args.config:
        return load_config(args.config, **over)
    return parse_config("", **over)


def bounds_table(cfg):
    """(name, value) rows for every closed-form evaluator at the config's inputs."""
    lp = cfg.act.lipschitz
    W = max(cfg.width, cfg.w0 + 1)
    rows = []
    th1 = B.th1_lower_bound(B.Th1Inputs(cfg.n, cfg.w0, cfg.confidence, W, cfg.N,
                                        cfg.delta, lp, cfg.q))
    rows += [(f"th1.{k}", v) for k, v in th1.rows()]
    rob = B.robustness_upper_bound(B.RobBoundInputs(cfg.n, cfg.w0, W, cfg.N, cfg.c0,
                                                    cfg.c1, cfg.delta, lp))
    rows += [(f"robust.{k}", v) for k, v in rob.rows()]
    rows.append(("rademacher", B.rademacher_bound(lp, cfg.n, W, 1.0, cfg.N)))
    if cfg.N >= cfg.vc_dim:
        rows.append(("vc_uniform", B.vc_uniform_bound(cfg.vc_dim, cfg.N, cfg.delta)))
    if cfg.n > 2:
        rows.append(("sine_sample_threshold", B.sine_sample_threshold(cfg.n, cfg.delta)))
        if cfg.N >= 4:
            rows.append(("coprime_prob_lower", B.coprime_prob_lower(cfg.n, cfg.N)))
    rows.append(("pattern_count_bound", B.pattern_count_bound(cfg.n, cfg.N)))
    w_min, n_min = B.cor44_requirements(cfg.n, cfg.w0, cfg.confidence, lp,
                                        cfg.eps_target, cfg.delta)
    rows += [("cor44.W_min", w_min), ("cor44.N_min", n_min)]
    return rows


def _print_table(rows, as_csv, header=("name", "value")):
    if as_csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    width = max(len(str(r[0])) for r in rows)
    for name, *rest in rows:
        print(f"{str(name):<{width}}  " + "  ".join(_fmt(v) for v in rest))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return "" if v is None else str(v)


def _run(args):
    if args.subcommand == "verify":
        rng = make_rng(args.seed if args.seed is not None else 0)
        results = run_verify_suite(rng)
        _print_table([(r.name, "PASS" if r.passed else "FAIL", r.detail) for r in results],
                     args.csv, ("check", "status", "detail"))
        if any(r.hard and not r.passed for r in results):
            return 2
        return 0 if all(r.passed for r in results) else 1

    cfg = _config(args)
    if args.subcommand == "bounds":
        _print_table(bounds_table(cfg), args.csv)
        return 0

    if args.subcommand == "robust-demo":
        rep = run_robust_demo(cfg)
        rows = [(e, r, c1, b.raw if b else None, b.clamped if b else None)
                for e, r, c1, b in zip(rep.eps, rep.robust_acc, rep.c1, rep.bounds)]
        print(f"clean accuracy {rep.clean_acc:.4f}, c0 = {rep.c0:.6g}")
        _print_table(rows, args.csv, ("eps", "robust_acc", "c1", "bound_raw", "bound_clamped"))
        emit_outputs(rep.rows, cfg.output_dir, cfg)
        return 0

    if args.subcommand == "badloss-demo":
        rep = run_badloss_demo(cfg)
        _print_table([
            ("constructed_risk", rep.constructed_risk),
            ("best_random_candidate_risk", rep.best_candidate_risk),
            ("best_trained_risk", min(rep.trained_risks) if rep.trained_risks else math.nan),
            ("constructed_accuracy", rep.accuracy),
            ("candidates", rep.candidates),
        ], args.csv)
        emit_outputs(rep.rows, cfg.output_dir, cfg)
        return 0

    runner, key = {
        "sweep-width": (run_sweep_width, "width"),
        "sweep-data": (run_sweep_data, "n_train"),
        "mnist": (run_mnist_sweep, "width"),
    }[args.subcommand]
    rows = runner(cfg)
    paths = emit_outputs(rows, cfg.output_dir, cfg)
    s = summarize(rows, key)
    bad, checked = bound_violations(rows)
    _print_table([(lvl, m) for lvl, m in zip(s.levels, s.mean_test_acc)], args.csv,
                 (key, "mean_test_acc"))
    print(f"spearman {s.spearman:.4f}  saturated {s.saturated}  "
          f"bound above accuracy in {bad}/{checked} runs")
    print("wrote " + ", ".join(paths))
    return 0


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors are contract errors here; 2 is reserved for theorem caps
        return 1 if exc.code else 0
    try:
        return _run(args)
    except HardAssertionError as exc:
        print(f"genlab: theorem cap exceeded: {exc}", file=sys.stderr)
        return 2
    except (GenlabError, OSError) as exc:
        print(f"genlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

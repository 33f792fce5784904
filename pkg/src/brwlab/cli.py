"""Command-line front end: run an experiment, write CSV traces and JSON verdicts.

Exit codes: 0 all checks passed, 2 a statistical check failed, 1 usage or
resource errors. A config plus a master seed reproduces every output byte for
byte, whatever the worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import brw, experiments, gaf, martingale, trees, yule
from .rng import stream

DEFAULT_OUT_ENV = "BRWLAB_OUT"


class _Parser(argparse.ArgumentParser):
    # usage errors are exit code 1; code 2 is reserved for statistical failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=1, help="master seed")
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument(
        "--workers", type=int, default=os.cpu_count() or 1,
        help="worker processes (results are worker-count independent)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="brwlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gw-clt", parser_class=_Parser,
                       help="conditional CLT panel for the population martingale")
    p.add_argument("--pmf", type=str, default="1:0.5,3:0.5", help="offspring pmf, e.g. 1:0.5,3:0.5")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--h", type=int, default=8)
    p.add_argument("--M", type=int, default=10**4)
    p.add_argument("--frozen", type=int, default=50)
    _add_common(p)

    p = sub.add_parser("brw-fclt", parser_class=_Parser,
                       help="finite-dimensional covariance of the rescaled martingale tail")
    p.add_argument("--pmf", type=str, default="1:0.5,3:0.5")
    p.add_argument("--shifts", type=str, default="0:0.5,1:0.5")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--h", type=int, default=8)
    p.add_argument("--M", type=int, default=10**4)
    p.add_argument("--grid", type=str, default="0,0.5,-0.5", help="real grid points u")
    _add_common(p)

    p = sub.add_parser("gaf-check", parser_class=_Parser,
                       help="covariance / stationarity / marginals of the limit function")
    p.add_argument("--u", type=complex, default=0.5)
    p.add_argument("--v", type=complex, default=0.5)
    p.add_argument("--M", type=int, default=10**5)
    _add_common(p)

    p = sub.add_parser("yule-check", parser_class=_Parser,
                       help="Exp(1) population limit and Kendall spacings")
    p.add_argument("--n", type=int, default=10**4)
    p.add_argument("--replicates", type=int, default=10**4)
    p.add_argument("--kendall-n", type=int, default=10**5)
    p.add_argument("--paths", type=int, default=50)
    p.add_argument("--burn-in", type=int, default=1000)
    _add_common(p)

    for kind_name in ("bst", "rrt"):
        p = sub.add_parser(f"tree-{kind_name}", parser_class=_Parser,
                           help=f"path-length CLT, coverage and independence ({kind_name})")
        p.add_argument("--n-big", type=int, default=10**5)
        p.add_argument("--replicates", type=int, default=1000)
        p.add_argument("--checkpoints", type=str, default="100,316,1000")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--skip-coverage", action="store_true")
        p.add_argument("--skip-independence", action="store_true")
        _add_common(p)

    p = sub.add_parser("polya", parser_class=_Parser, help="Polya urn suite")
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--c", type=int, default=1)
    p.add_argument("--n", type=int, default=10**4)
    p.add_argument("--replicates", type=int, default=10**4)
    p.add_argument("--frozen", type=int, default=50)
    p.add_argument("--alpha", type=float, default=0.05, help="unused placeholder level")
    _add_common(p)

    p = sub.add_parser("predict", parser_class=_Parser,
                       help="strong prediction interval from an observed path length")
    p.add_argument("--kind", choices=("bst", "rrt"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--epl", type=float, required=True, help="observed total path length at n")
    _add_common(p)

    return parser


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(DEFAULT_OUT_ENV) or "brwlab-results"
    path = Path(out) / args.command
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(result: dict, out: Path) -> int:
    for v in result["verdicts"] if "summary" not in result else result["summary"]:
        experiments.write_verdict(v, out / f"verdict_{v['statistic']}.json")
    for v in result["verdicts"]:
        line = "PASS" if v["pass"] else "FAIL"
        ks = "" if v.get("ks") is None else f" ks={v['ks']:.4g}"
        print(f"[{line}] {v['model']} {v['statistic']}{ks} target: {v['target']}")
    return 0 if result["pass"] else 2


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join("" if x is None else repr(x) if isinstance(x, float) else str(x)
                              for x in row) + "\n")


def _cmd_gw_clt(args) -> int:
    out = _out_dir(args)
    pmf = brw.parse_pmf(args.pmf)
    result = experiments.gw_clt_panel(
        pmf, n=args.n, horizon=args.h, continuations=args.M,
        frozen=args.frozen, seed=args.seed, workers=args.workers,
    )
    rows = [
        (v["frozen_path_id"], v["statistic"], v["ks"], v["p_value"], v["n_hat_infty"])
        for v in result["verdicts"]
    ]
    _write_csv(out / "paths.csv", "path,statistic,ks,p_value,n_hat_infty", rows)
    for v in result["summary"]:
        experiments.write_verdict(v, out / f"verdict_{v['statistic']}.json")
    for v in result["summary"]:
        print(f"[{'PASS' if v['pass'] else 'FAIL'}] gw-clt {v['statistic']} "
              f"pass_fraction={v['pass_fraction']:.2f}")
    return 0 if result["pass"] else 2


def _cmd_brw_fclt(args) -> int:
    out = _out_dir(args)
    pmf = brw.parse_pmf(args.pmf)
    shifts = brw.parse_pmf(args.shifts)
    grid = tuple(float(x) for x in args.grid.split(","))
    result = experiments.fclt_covariance(
        pmf, shifts, n=args.n, horizon=args.h, continuations=args.M,
        grid=grid, seed=args.seed,
    )
    _write_csv(
        out / "fdd_table.csv",
        "re_u,im_u,re_v,im_v,weight_sum,weight_target,mc_cov,mc_target",
        experiments.fdd_table_rows(result["report"]),
    )
    # small position-resolved run for the disk-profile artifact
    law = brw.count_and_shift(pmf, shifts)
    traj = brw.simulate(law, 8, stream(args.seed, 800))
    profile = martingale.d_profile(traj, 6, martingale.disk_grid(1.0), stream(args.seed, 801))
    martingale.profile_write_csv(profile, out / "profile.csv")
    for v in result["verdicts"]:
        experiments.write_verdict(v, out / f"verdict_{v['statistic']}.json")
    return _emit(result, out)


def _cmd_gaf_check(args) -> int:
    out = _out_dir(args)
    result = experiments.gaf_suite(u=args.u, v=args.v, replicates=args.M, seed=args.seed)
    kernel = gaf.sample_limit_kernel(1.0, 1.0, 1.0, stream(args.seed, 700))
    pts = martingale.disk_grid(1.0)
    vals = kernel.eval(pts)
    _write_csv(out / "kernel_profile.csv", "re_u,im_u,re_xi,im_xi",
               [(p.real, p.imag, w.real, w.imag) for p, w in zip(pts, vals)])
    for v in result["verdicts"]:
        experiments.write_verdict(v, out / f"verdict_{v['statistic']}.json")
    return _emit(result, out)


def _cmd_yule_check(args) -> int:
    out = _out_dir(args)
    result = experiments.yule_suite(
        n=args.n, replicates=args.replicates, kendall_n=args.kendall_n,
        kendall_paths=args.paths, burn_in=args.burn_in, seed=args.seed,
        workers=args.workers,
    )
    times = yule.sample_times(min(args.kendall_n, 10**4), 1.0, stream(args.seed, 600))
    yule.times_write_csv(times, out / "times.csv")
    for v in result["verdicts"]:
        experiments.write_verdict(v, out / f"verdict_{v['statistic']}.json")
    return _emit(result, out)


def _cmd_tree(args, kind_name: str) -> int:
    out = _out_dir(args)
    checkpoints = tuple(int(x) for x in args.checkpoints.split(","))
    result = experiments.tree_clt(
        kind_name, checkpoints=checkpoints, n_big=args.n_big,
        replicates=args.replicates, seed=args.seed, workers=args.workers,
    )
    verdicts = list(result["verdicts"])
    summary = {
        "ks_by_n": {str(k): v for k, v in result["ks_by_n"].items()},
        "medians": {str(k): v for k, v in result["medians"].items()},
    }
    passed = result["pass"]
    if not args.skip_coverage:
        cov = experiments.tree_coverage(
            kind_name, n=checkpoints[-1], n_small=checkpoints[0], n_big=args.n_big,
            replicates=args.replicates, alpha=args.alpha, seed=args.seed,
            workers=args.workers,
        )
        verdicts += cov["verdicts"]
        passed = passed and cov["pass"]
        summary["coverage"] = {str(k): v for k, v in cov["coverage"].items()}
    if not args.skip_independence:
        ind = experiments.tree_independence(
            kind_name, paths=args.replicates, n=checkpoints[-1], n_big=args.n_big,
            seed=args.seed, workers=args.workers,
        )
        verdicts += ind["verdicts"]
        passed = passed and ind["pass"]
        summary["correlation"] = ind["report"].correlation
    # one full per-replicate trace as a plot-ready artifact
    _, trace = (trees.grow_bst if kind_name == "bst" else trees.grow_rrt)(
        min(args.n_big, 10**4), stream(args.seed, 40, 0, 0)
    )
    trees.trace_write_csv(trace, out / "trace_rep0.csv")
    rows = []
    for n_ck, res in result["residuals"].items():
        summary.setdefault("residual_mean", {})[str(n_ck)] = float(np.mean(res))
        summary.setdefault("residual_var", {})[str(n_ck)] = float(np.var(res, ddof=1))
        rows.extend((n_ck, i, float(r)) for i, r in enumerate(res))
    _write_csv(out / "residuals.csv", "n,replicate,residual", rows)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=2))
        fh.write("\n")
    for v in verdicts:
        experiments.write_verdict(v, out / f"verdict_{v['statistic']}.json")
    return _emit({"pass": passed, "verdicts": verdicts}, out)


def _cmd_polya(args) -> int:
    out = _out_dir(args)
    result = experiments.polya_suite(
        b=args.b, r=args.r, c=args.c, n=args.n, replicates=args.replicates,
        asw_paths=args.frozen, seed=args.seed, workers=args.workers,
    )
    for v in result["verdicts"]:
        experiments.write_verdict(v, out / f"verdict_{v['statistic']}.json")
    return _emit(result, out)


def _cmd_predict(args) -> int:
    result = experiments.predict(args.kind, args.n, args.alpha, args.epl)
    lo, hi = result["interval"]
    print(f"theta_minus = {lo!r}")
    print(f"theta_plus  = {hi!r}")
    out = _out_dir(args)
    experiments.write_verdict(result["verdicts"][0], out / "verdict_prediction_interval.json")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gw-clt":
            return _cmd_gw_clt(args)
        if args.command == "brw-fclt":
            return _cmd_brw_fclt(args)
        if args.command == "gaf-check":
            return _cmd_gaf_check(args)
        if args.command == "yule-check":
            return _cmd_yule_check(args)
        if args.command == "tree-bst":
            return _cmd_tree(args, "bst")
        if args.command == "tree-rrt":
            return _cmd_tree(args, "rrt")
        if args.command == "polya":
            return _cmd_polya(args)
        if args.command == "predict":
            return _cmd_predict(args)
        parser.error(f"unknown command {args.command!r}")
    except (brw.ParticleBudgetError, brw.InvalidLawError, ValueError) as exc:
        print(f"brwlab: error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())

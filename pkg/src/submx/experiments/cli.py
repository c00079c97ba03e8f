"""``submx`` command line.

Exit status: 0 when every check passes, 2 when a check fails, 1 on usage
or domain errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Any

import numpy as np

from .. import asymptotics as asy
from ..search import BudgetError, all_column_starts, las_search
from .harness import EXPERIMENT_IDS, ExperimentConfig
from .io import read_matrix_csv, write_outputs
from .runners import run_experiment

EXIT_OK, EXIT_ERROR, EXIT_FAILED_CHECK = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _key_value(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    return key, float(value)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="submx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for eid in EXPERIMENT_IDS:
        p = sub.add_parser(eid, help=f"run experiment {eid}")
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--k", type=int, required=True)
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--replicates", type=int, required=True)
        p.add_argument("--seed", type=_u64, required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--budget", type=int, default=None)
        p.add_argument("--n-grid", type=int, nargs="+", default=None,
                       help="E5: sizes to sweep (defaults to --n)")
        p.add_argument("--threshold", type=_key_value, action="append", default=[],
                       metavar="NAME=VALUE", help="override a check threshold")
        p.add_argument("--option", type=_key_value, action="append", default=[],
                       metavar="NAME=VALUE", help="experiment option, e.g. restarts=20")

    p = sub.add_parser("theta", help="Monte Carlo estimate of theta_k")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=_u64, default=0)

    p = sub.add_parser("ktilde", help="solve for k-tilde and k*")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tau", type=float, required=True)

    p = sub.add_parser("bound", help="Gaussian comparison sum at threshold u")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--u", type=float, required=True)

    p = sub.add_parser("las", help="run LAS on a CSV matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--restarts", type=int, required=True,
                   help="random column starts; 0 means every possible start")
    p.add_argument("--seed", type=_u64, default=0)
    return parser


def _print_json(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _run_experiment(args) -> int:
    options = {}
    for key, value in args.option:
        options[key] = int(value) if float(value).is_integer() else value
    config = ExperimentConfig(
        experiment_id=args.command, n=args.n, k=args.k, tau=args.tau,
        replicates=args.replicates, master_seed=args.seed, budget=args.budget,
        output_dir=args.out, n_grid=tuple(args.n_grid) if args.n_grid else None,
        thresholds=dict(args.threshold), options=options,
    )
    report = run_experiment(config, threads=max(1, args.threads))
    out = write_outputs(report, args.out)
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"[{status}] {c.name}: {c.measured:.6g} {c.comparison} {c.threshold}")
    print(f"wrote {out}/report.json")
    return EXIT_OK if report.passed else EXIT_FAILED_CHECK


def _run_las(args) -> int:
    W = read_matrix_csv(args.input)
    n, k = W.n, args.k
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}")
    if args.restarts == 0:
        starts = list(all_column_starts(n, k))
    else:
        rng = np.random.Generator(np.random.Philox(key=args.seed))
        starts = [tuple(rng.choice(n, size=k, replace=False) + 1) for _ in range(args.restarts)]
    runs = [las_search(W, k, s) for s in starts]
    best = max(runs, key=lambda res: res.final_average)
    _print_json({
        "n": n, "k": k, "restarts": len(runs),
        "best": {"rows": list(best.final_index.rows), "cols": list(best.final_index.cols),
                 "average": best.final_average, "iterations": best.iterations},
        "distinct_fixed_points": len({res.final_index for res in runs}),
        "iterations": [res.iterations for res in runs],
        "all_converged": all(res.converged for res in runs),
    })
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in EXPERIMENT_IDS:
            return _run_experiment(args)
        if args.command == "theta":
            est, se = asy.theta_k_estimate(args.k, args.samples, args.seed)
            _print_json({"k": args.k, "samples": args.samples, "estimate": est, "stderr": se})
        elif args.command == "ktilde":
            kt = asy.solve_k_tilde(args.n, args.tau)
            _print_json({"n": args.n, "tau": args.tau, "k_tilde": kt,
                         "k_star": int(np.floor(kt + 0.5)),
                         "asymptotic": asy.k_tilde_asymptotic(args.n, args.tau)})
        elif args.command == "bound":
            rep = asy.comparison_bound(args.n, args.k, args.u)
            _print_json({"n": rep.n, "k": rep.k, "u": rep.u, "total": rep.total,
                         "terms": {f"{s},{t}": v for (s, t), v in rep.per_overlap_terms.items()}})
        elif args.command == "las":
            return _run_las(args)
    except (ValueError, IndexError, BudgetError, OSError) as exc:
        print(f"submx: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``barylab solve|scale|spectra``."""

from __future__ import annotations

import argparse
import json
import sys

from .data import ingest
from .errors import BarylabError
from .experiment import INPUT_ERRORS, ExperimentConfig, build_graph, run_experiment, scaling_study


def _eps_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--algo", choices=["ibp", "prox-ibp", "agd"], default="ibp")
    p.add_argument("--topology", default="complete", help="star, cycle, path, complete, erdos[:p] or an edge-list file")
    p.add_argument("--data", default="gauss-mix", help="gauss-mix, median, histograms.csv or img1.pgm,img2.pgm")
    p.add_argument("--cost", default=None, help="cost matrix CSV (overrides the grid cost)")
    p.add_argument("--n", type=int, default=8, help="support size for gauss-mix")
    p.add_argument("--m", type=int, default=4, help="number of measures for gauss-mix")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["fixed", "adaptive"], default="fixed", help="AGD stopping rule")
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="barylab", description="Wasserstein barycenter experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one solver and write a JSON report")
    _common(solve)
    solve.add_argument("--eps", type=float, default=0.05)
    solve.add_argument("--gamma", type=float, default=None, help="override the regularization (ibp, prox-ibp)")
    solve.add_argument("--outer", type=int, default=30, help="prox-ibp outer iterations")
    solve.add_argument("--inner", type=int, default=None, help="prox-ibp fixed inner iterations")
    solve.add_argument("--restart", action="store_true", help="prox-ibp: pick gamma by the halving probe")

    scale = sub.add_parser("scale", help="iterations against eps, as CSV")
    _common(scale)
    scale.add_argument("--eps", type=_eps_list, default=[0.2, 0.1, 0.05, 0.025])

    spectra = sub.add_parser("spectra", help="Laplacian spectrum of a topology")
    spectra.add_argument("--topology", default="complete")
    spectra.add_argument("--m", type=int, default=4)
    spectra.add_argument("--seed", type=int, default=0)
    spectra.add_argument("--out", default=None)
    return parser


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            cfg = ExperimentConfig(
                algo=args.algo, eps=args.eps, topology=args.topology, data=args.data, seed=args.seed,
                out=args.out, gamma=args.gamma, mode=args.mode, n=args.n, m=args.m, cost=args.cost,
                outer_iters=args.outer, inner_iters=args.inner, restart=args.restart,
            )
            report, code = run_experiment(cfg)
            report.pop("trace", None)
            summary = {k: report.get(k) for k in ("status", "algo", "eps", "objective", "iterations", "error")}
            print(json.dumps({k: v for k, v in summary.items() if v is not None}))
            return code
        if args.command == "scale":
            problem = ingest(args.data, n=args.n, m=args.m, seed=args.seed, cost=args.cost)
            lap = build_graph(args.topology, problem.m, args.seed) if args.algo == "agd" else None
            rows, slope = scaling_study(args.algo, args.eps, problem, lap=lap, mode=args.mode, out=args.out)
            if args.out is None:
                print("eps,iterations,rounds,objective_gap")
                for r in rows:
                    print(f"{r['eps']},{r['iterations']},{r['rounds']},{r['objective_gap']}")
            print(f"# slope {slope:.4f}", file=sys.stderr if args.out is None else sys.stdout)
            return 0
        lap = build_graph(args.topology, args.m, args.seed)
        _emit(
            {
                "topology": args.topology,
                "m": lap.m,
                "edges": lap.edge_count(),
                "lambda_max": lap.lambda_max,
                "lambda_min_plus": lap.lambda_min_plus,
                "chi": lap.chi,
                "eigenvalues": lap.spectrum.eigenvalues.tolist(),
            },
            args.out,
        )
        return 0
    except INPUT_ERRORS as exc:
        print(f"barylab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (BarylabError, ArithmeticError, RuntimeError) as exc:
        print(f"barylab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

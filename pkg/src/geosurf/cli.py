"""Command line entry point: ``geosurf <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__, errors
from .runner import RunConfig, report, run

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

# a grid suite that exercises every analysis on the 33 x 33 euclidean grid;
# net-dependent results are reported across three seed orders
DEFAULT_SUITE = {
    "space": {"generate": {"family": "euclidean_grid", "n": 33}},
    "analyses": {
        "dimension": {"radii": [8, 12, 16], "epsilons": [1, 2, 4, 8], "scales": [2, 4]},
        "sur": {"radii": [0, 1, 2, 4, 8]},
        "hyperbolicity": {"radii": [4, 8], "M": [4, 10, 25], "budget": 2000},
        "measure": {"epsilons": [4, 2, 1], "unit_radius": 8},
        "poincare": {"p": 1.0, "epsilons": [4, 2, 1], "lambda": 2.0},
    },
    "seeds": [0, 1, 2],
}


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    return [int(v) if v.is_integer() else v for v in vals]


def _ids(text: str) -> list:
    out = []
    for x in text.split(","):
        x = x.strip()
        out.append(int(x) if x.lstrip("-").isdigit() else x)
    return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--space", help="space file (JSON); otherwise the space is generated")
    common.add_argument("--family", default="euclidean_grid")
    common.add_argument("--n", type=int, default=33, help="grid side")
    common.add_argument("--spacing", type=float, help="edge length s")
    common.add_argument("--theta", type=float, help="snowflake exponent")
    common.add_argument("--branching", type=int, help="tree branching")
    common.add_argument("--depth", type=int, help="tree depth")
    common.add_argument("--factor", help="conformal factor name or const:c")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, action="append", help="seed (repeat for several)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--tolerance", type=float, default=0.3)

    ap = argparse.ArgumentParser(prog="geosurf", description=__doc__)
    ap.add_argument("--version", action="version", version=f"geosurf {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write a space file")
    p = sub.add_parser("analyze-dimension", parents=[common], help="doubling, Assouad and Hausdorff estimates")
    p.add_argument("--radii", type=_floats)
    p.add_argument("--epsilons", type=_floats)
    p.add_argument("--scales", type=_floats)
    p = sub.add_parser("analyze-sur", parents=[common], help="shortest surrounding loops")
    p.add_argument("--point", type=_ids)
    p.add_argument("--radii", type=_floats)
    p.add_argument("--local-radius", type=float)
    p = sub.add_parser("analyze-hyperbolicity", parents=[common], help="fat/thin triangle dichotomy scan")
    p.add_argument("--radii", type=_floats)
    p.add_argument("--M", type=_floats)
    p.add_argument("--budget", type=int)
    p = sub.add_parser("build-measure", parents=[common], help="Haar-like net measure")
    p.add_argument("--epsilons", type=_floats)
    p.add_argument("--unit-radius", type=float)
    p = sub.add_parser("check-poincare", parents=[common], help="Poincare ratios and dimension diagnostic")
    p.add_argument("--p", type=float)
    p.add_argument("--epsilons", type=_floats)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--sigma", type=_ids, help="two endpoint ids")
    p.add_argument("--measure", help="measure file (default: counting measure)")
    p = sub.add_parser("suite", parents=[common], help="run a JSON config, or the default grid suite")
    p.add_argument("--config", help="RunConfig JSON file")
    p = sub.add_parser("report", help="consolidate a run directory")
    p.add_argument("artifacts", nargs="+", help="run directory or report files")
    return ap


def _space_spec(args) -> dict:
    if args.space:
        return {"file": args.space}
    g = {"family": args.family}
    fam = args.family
    if fam in ("euclidean_grid", "conformal_grid", "hyperbolic_grid", "snowflake_grid"):
        g["n"] = args.n
    if args.spacing is not None:
        g["s"] = args.spacing
    if args.theta is not None:
        g["theta"] = args.theta
    if args.factor is not None:
        g["factor"] = args.factor
    if args.branching is not None:
        g["branching"] = args.branching
    if args.depth is not None:
        g["depth"] = args.depth
    if fam == "snowflake_grid":
        g.setdefault("s", 1.0)
    if fam == "conformal_grid":
        g.setdefault("s", 1.0)
        g.setdefault("factor", "wave")
    return {"generate": g}


def _analysis(args) -> dict:
    def pick(**kw):
        return {k: v for k, v in kw.items() if v is not None}

    cmd = args.command
    if cmd == "generate":
        return {"generate": {}}
    if cmd == "analyze-dimension":
        return {"dimension": pick(radii=args.radii, epsilons=args.epsilons, scales=args.scales)}
    if cmd == "analyze-sur":
        return {"sur": pick(points=args.point, radii=args.radii, local_radius=args.local_radius)}
    if cmd == "analyze-hyperbolicity":
        return {"hyperbolicity": pick(radii=args.radii, M=args.M, budget=args.budget)}
    if cmd == "build-measure":
        return {"measure": pick(epsilons=args.epsilons, unit_radius=args.unit_radius)}
    if cmd == "check-poincare":
        return {"poincare": pick(p=args.p, epsilons=args.epsilons, sigma=args.sigma, measure=args.measure, **{"lambda": args.lam})}
    raise AssertionError(cmd)  # pragma: no cover


def build_config(args) -> RunConfig:
    if args.command == "suite":
        if args.config:
            try:
                with open(args.config) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise errors.ConfigInvalid(f"cannot read config: {exc}") from exc
        else:
            data = json.loads(json.dumps(DEFAULT_SUITE))
        data.setdefault("out", args.out)
        if args.seed:
            data["seeds"] = args.seed
        data.setdefault("workers", args.workers)
        data.setdefault("tolerance", args.tolerance)
        return RunConfig.from_dict(data)
    seeds = args.seed or ([0, 1, 2] if args.command == "build-measure" else [0])
    return RunConfig.from_dict({
        "space": _space_spec(args),
        "analyses": _analysis(args),
        "seeds": seeds,
        "tolerance": args.tolerance,
        "out": args.out,
        "workers": args.workers,
    })


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "report":
        try:
            summary = report(args.artifacts[0] if len(args.artifacts) == 1 else args.artifacts)
        except errors.MissingArtifacts as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAILED
        print(json.dumps({"all_passed": summary["all_passed"]}))
        return EXIT_OK if summary["all_passed"] else EXIT_FAILED
    try:
        cfg = build_config(args)
        result = run(cfg)
    except errors.ConfigInvalid as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except errors.AnalysisFailed as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        for res in exc.result.results.values():
            for d in res.diagnostics:
                print(f"  {res.name}: {d}", file=sys.stderr)
        return EXIT_FAILED
    except errors.InputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, res in result.results.items():
        print(f"{name}: {'PASS' if res.passed else 'FAIL'}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

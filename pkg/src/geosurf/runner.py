"""Batch runs: validated run configurations, per-analysis reports and consolidation."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from . import __version__, errors
from .dimension import DimensionReport, assouad_estimate, doubling_constant, hausdorff_dim_estimate
from .generators import FAMILIES, NAMED_FACTORS, generate
from .hyperbolicity import FAT, dichotomy_scan
from .measures import haar_like, measure_to_json, read_measure, uniform_measure
from .poincare import CONSISTENT, build_pack, dimension_bound_diagnostic, upper_gradient_report
from .space import MetricSurface, RegionSpec, build_space, describe_space, loop_edge_list
from .surrounding import sur

ANALYSES = ("generate", "dimension", "sur", "hyperbolicity", "measure", "poincare")

# accepted parameters and their defaults per analysis
DEFAULTS: dict[str, dict[str, Any]] = {
    "generate": {},
    "dimension": {"radii": [8, 12, 16], "epsilons": [1, 2, 4, 8], "scales": [2, 4, 8]},
    "sur": {"points": None, "radii": [0, 1, 2, 4], "local_radius": None},
    "hyperbolicity": {"radii": [4, 8], "M": [10], "budget": 2000},
    "measure": {"epsilons": [4, 2, 1], "unit_radius": 8},
    "poincare": {"p": 1.0, "epsilons": [4, 2, 1], "lambda": 2.0, "sigma": None, "measure": None},
}

GENERATE_KEYS = {
    "euclidean_grid": {"n", "s"},
    "conformal_grid": {"n", "s", "factor", "bound"},
    "hyperbolic_grid": {"n", "curvature_scale"},
    "tree": {"branching", "depth", "s"},
    "snowflake_grid": {"n", "s", "theta"},
}


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class RunConfig:
    space: dict  # {"generate": {"family": ..., params}} or {"file": path}
    analyses: dict  # analysis name -> parameter overrides
    seeds: list = field(default_factory=lambda: [0])
    tolerance: float = 0.3
    out: str = "out"
    workers: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunConfig":
        if not isinstance(data, Mapping):
            raise errors.ConfigInvalid("config must be a JSON object")
        unknown = set(data) - {"space", "analyses", "seeds", "tolerance", "out", "workers"}
        if unknown:
            raise errors.ConfigInvalid(f"unknown config keys {sorted(unknown)}")
        if "space" not in data or "analyses" not in data:
            raise errors.ConfigInvalid("config needs 'space' and 'analyses'")
        cfg = cls(
            space=dict(data["space"]),
            analyses={k: dict(v or {}) for k, v in dict(data["analyses"]).items()},
            seeds=list(data.get("seeds", [0])),
            tolerance=data.get("tolerance", 0.3),
            out=str(data.get("out", "out")),
            workers=data.get("workers", 1),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise errors.ConfigInvalid(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @property
    def hash(self) -> str:
        # the output directory does not change results, so it stays out of the hash
        d = self.to_dict()
        d.pop("out")
        d.pop("workers")
        return hashlib.sha256(_canonical(d).encode()).hexdigest()

    def params(self, name: str) -> dict:
        p = dict(DEFAULTS[name])
        p.update(self.analyses.get(name, {}))
        return p

    def validate(self) -> None:
        _validate(self)


# -- validation ----------------------------------------------------------------

def _fail(msg: str):
    raise errors.ConfigInvalid(msg)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _positive_list(name, vals, allow_zero=False, min_len=1):
    if not isinstance(vals, list) or len(vals) < min_len:
        _fail(f"{name} must be a list of at least {min_len} numbers")
    for v in vals:
        if not _is_num(v) or v < 0 or (v == 0 and not allow_zero):
            _fail(f"{name} must hold {'nonnegative' if allow_zero else 'positive'} numbers, got {v!r}")


def _validate_space(space: Mapping) -> None:
    if set(space) == {"file"}:
        if not isinstance(space["file"], str) or not space["file"]:
            _fail("space file path must be a nonempty string")
        return
    if set(space) != {"generate"} or not isinstance(space["generate"], Mapping):
        _fail("space must be {'generate': {...}} or {'file': path}")
    g = dict(space["generate"])
    fam = g.pop("family", None)
    if fam not in FAMILIES:
        _fail(f"unknown family {fam!r}")
    extra = set(g) - GENERATE_KEYS[fam]
    if extra:
        _fail(f"unknown parameters {sorted(extra)} for family {fam}")
    for key in ("n", "branching", "depth"):
        if key in g and not (_is_int(g[key]) and g[key] >= 1):
            _fail(f"{key} must be a positive integer")
    if "n" in g and g["n"] < 3:
        _fail("grid size n must be at least 3")
    for key in ("s", "curvature_scale", "bound"):
        if key in g and g[key] is not None and not (_is_num(g[key]) and g[key] > 0):
            _fail(f"{key} must be a positive number")
    if "theta" in g and not (_is_num(g["theta"]) and 0 < g["theta"] < 1):
        _fail("theta must lie in (0, 1)")
    if "factor" in g:
        f = g["factor"]
        if not (_is_num(f) and f > 0) and not (isinstance(f, str) and (f in NAMED_FACTORS or f.startswith("const:"))):
            _fail(f"unknown conformal factor {f!r}")


def _validate(cfg: RunConfig) -> None:
    if not isinstance(cfg.space, Mapping):
        _fail("space must be an object")
    _validate_space(cfg.space)
    if not cfg.analyses:
        _fail("no analysis selected")
    for name, params in cfg.analyses.items():
        if name not in ANALYSES:
            _fail(f"unknown analysis {name!r}")
        extra = set(params) - set(DEFAULTS[name])
        if extra:
            _fail(f"unknown parameters {sorted(extra)} for {name}")
    if not cfg.seeds or not all(_is_int(s) and s >= 0 for s in cfg.seeds):
        _fail("seeds must be a nonempty list of nonnegative integers")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        _fail("seeds must be distinct")
    if not (_is_num(cfg.tolerance) and cfg.tolerance >= 0):
        _fail("tolerance must be a nonnegative number")
    if not (_is_int(cfg.workers) and cfg.workers >= 1):
        _fail("workers must be a positive integer")

    if "dimension" in cfg.analyses:
        p = cfg.params("dimension")
        _positive_list("dimension.radii", p["radii"])
        _positive_list("dimension.epsilons", p["epsilons"], min_len=4)
        _positive_list("dimension.scales", p["scales"])
    if "sur" in cfg.analyses:
        p = cfg.params("sur")
        _positive_list("sur.radii", p["radii"], allow_zero=True)
        if p["points"] is not None and not (isinstance(p["points"], list) and p["points"]):
            _fail("sur.points must be a nonempty list of vertex ids")
        lr = p["local_radius"]
        if lr is not None and not (_is_num(lr) and lr > 0):
            _fail("sur.local_radius must be a positive number")
    if "hyperbolicity" in cfg.analyses:
        p = cfg.params("hyperbolicity")
        _positive_list("hyperbolicity.radii", p["radii"])
        Ms = p["M"] if isinstance(p["M"], list) else [p["M"]]
        if not Ms or not all(_is_num(m) and m > 1 for m in Ms):
            _fail("hyperbolicity.M values must exceed 1")
        if not (_is_int(p["budget"]) and p["budget"] >= 1):
            _fail("hyperbolicity.budget must be a positive integer")
    if "measure" in cfg.analyses:
        p = cfg.params("measure")
        _positive_list("measure.epsilons", p["epsilons"], min_len=3)
        if not (_is_num(p["unit_radius"]) and p["unit_radius"] > 0):
            _fail("measure.unit_radius must be positive")
        if len(cfg.seeds) < 2:
            _fail("the measure analysis needs at least two seeds")
    if "poincare" in cfg.analyses:
        p = cfg.params("poincare")
        if not (_is_num(p["p"]) and p["p"] >= 1):
            _fail("poincare.p must be at least 1")
        _positive_list("poincare.epsilons", p["epsilons"], min_len=3)
        if not (_is_num(p["lambda"]) and p["lambda"] >= 1):
            _fail("poincare.lambda must be at least 1")
        sig = p["sigma"]
        if sig is not None and not (isinstance(sig, list) and len(sig) == 2):
            _fail("poincare.sigma must list two endpoint ids")
        if p["measure"] is not None and not isinstance(p["measure"], str):
            _fail("poincare.measure must be a measure file path")


# -- analyses ------------------------------------------------------------------

@dataclass
class AnalysisResult:
    name: str
    passed: bool
    report: dict
    tables: dict = field(default_factory=dict)  # file name -> (header, rows)
    diagnostics: list = field(default_factory=list)
    files: dict = field(default_factory=dict)  # file name -> JSON document


def load_space(cfg: RunConfig) -> MetricSurface:
    if "file" in cfg.space:
        try:
            with open(cfg.space["file"]) as fh:
                return build_space(json.load(fh))
        except OSError as exc:
            raise errors.ConfigInvalid(f"cannot read space file: {exc}") from exc
    g = dict(cfg.space["generate"])
    return generate(g.pop("family"), **g)


def _vertex(space: MetricSurface, label) -> int:
    index = {str(lab): i for i, lab in enumerate(space.labels)}
    if str(label) not in index:
        raise errors.ConfigInvalid(f"unknown vertex {label!r}")
    return index[str(label)]


def _num(x: float):
    # JSON has no infinity; keep reports valid JSON
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def analyze_dimension(space: MetricSurface, cfg: RunConfig) -> AnalysisResult:
    p = cfg.params("dimension")
    o = space.origin
    radii, eps, scales = sorted(p["radii"]), sorted(p["epsilons"]), sorted(p["scales"])
    N = doubling_constant(space, RegionSpec(o, 2 * max(scales)), scales)
    samples = [(o, r, d) for r in radii for d in eps if d < r]
    A = assouad_estimate(space, samples)
    H = hausdorff_dim_estimate(space, o, eps, radius=max(radii), seeds=cfg.seeds)
    rep = DimensionReport(A.D, H.alpha, N, [float(s) for s in scales], list(H.residuals), cfg.tolerance)
    rows = [[d, c, H.alpha, res] for d, c, res in zip(eps, H.counts[cfg.seeds[0]], H.residuals)]
    rows += [[f"{r}/{d}", c, A.D, res] for (_, r, d), c, res in zip(samples, A.counts, A.residuals)]
    report = {
        "assouad_D": A.D, "assouad_C": A.C, "assouad_ls_slope": A.ls_slope,
        "hausdorff_alpha": H.alpha, "hausdorff_spread": H.spread,
        "doubling_N": N, "scales": rep.scales_used, "consistent": rep.consistent,
    }
    return AnalysisResult("dimension", rep.consistent, report, {"dimension.csv": (["scale", "count", "estimate", "residual"], rows)})


def analyze_sur(space: MetricSurface, cfg: RunConfig) -> AnalysisResult:
    p = cfg.params("sur")
    points = [space.origin] if p["points"] is None else [_vertex(space, v) for v in p["points"]]
    rows, queries, ok, diags = [], [], True, []
    for v in points:
        for r in p["radii"]:
            entry = {"p": space.labels[v], "r": r}
            try:
                res = sur(space, v, r, p["local_radius"])
            except errors.GeosurfError as exc:
                ok = False
                entry["error"] = type(exc).__name__
                diags.append(f"sur({space.labels[v]}, {r}): {type(exc).__name__}: {exc}")
                queries.append(entry)
                continue
            entry.update(sur=res.value, witness=loop_edge_list(space, res.witness))
            queries.append(entry)
            rows.append([space.labels[v], r, res.value, _num(res.value / r) if r > 0 else None])
    return AnalysisResult("sur", ok, {"queries": queries}, {"sur.csv": (["p", "r", "Sur", "Sur/r"], rows)}, diags)


def analyze_hyperbolicity(space: MetricSurface, cfg: RunConfig) -> AnalysisResult:
    p = cfg.params("hyperbolicity")
    Ms = p["M"] if isinstance(p["M"], list) else [p["M"]]
    rep = dichotomy_scan(space, space.origin, p["radii"], Ms, budget=p["budget"], seed=cfg.seeds[0])
    scales = []
    for row in rep.rows:
        scales.append({
            "radius": row.radius, "M": row.M, "class": row.classification, "certificate": row.certificate,
            "delta": row.delta, "delta_over_r": row.delta_over_r, "checked": row.checked,
            "witness": None if row.witness is None else [space.labels[v] for v in row.witness],
        })
    fat_everywhere = all(any(r["class"] == FAT for r in scales if r["radius"] == rad) for rad in p["radii"])
    rows = [[s["radius"], s["M"], s["class"], s["delta"], s["delta_over_r"]] for s in scales]
    return AnalysisResult(
        "hyperbolicity", fat_everywhere, {"center": space.labels[space.origin], "scales": scales},
        {"dichotomy.csv": (["radius", "M", "class", "delta", "delta_over_r"], rows)},
    )


def analyze_measure(space: MetricSurface, cfg: RunConfig) -> AnalysisResult:
    p = cfg.params("measure")
    unit = RegionSpec(space.origin, p["unit_radius"])
    mu, rep = haar_like(space, p["epsilons"], cfg.seeds, unit, tolerance=1.0)
    report = {
        "epsilons": rep.epsilons, "seeds": rep.seeds, "drift_per_octave": rep.drift_per_octave,
        "converged": rep.converged, "ratios": rep.ratios,
        "seed_alpha": {str(k): v for k, v in rep.seed_alpha.items()},
        "measure_file": "haar_measure.json",
    }
    return AnalysisResult("measure", rep.converged, report, files={"haar_measure.json": measure_to_json(space, mu)})


def _default_sigma(space: MetricSurface):
    if space.family.get("kind") in ("euclidean_grid", "conformal_grid", "hyperbolic_grid"):
        n = space.family["n"]
        x = n // 2
        return space.grid_index(x, 0), space.grid_index(x, n - 1)
    raise errors.ConfigInvalid("poincare.sigma is required outside grid families")


def analyze_poincare(space: MetricSurface, cfg: RunConfig) -> AnalysisResult:
    p = cfg.params("poincare")
    if p["sigma"] is None:
        a, b = _default_sigma(space)
    else:
        a, b = (_vertex(space, v) for v in p["sigma"])
    sigma = space.geodesic(a, b)
    mu = read_measure(p["measure"], space) if p["measure"] else uniform_measure(range(space.n))
    diag = dimension_bound_diagnostic(space, mu, p["p"], p["epsilons"], sigma, lam=p["lambda"], tolerance=cfg.tolerance)
    grad = upper_gradient_report(space, build_pack(space, sigma, min(p["epsilons"])))
    passed = diag.verdict == CONSISTENT and grad.passed
    report = {
        "sigma": [space.labels[a], space.labels[b]], "p": diag.p_exp, "epsilons": diag.epsilons, "lhs": diag.lhs,
        "gradient_terms": diag.gradient_terms, "ratios": [_num(r) for r in diag.ratios], "limit": diag.limit,
        "discrete_limit": diag.discrete_limit, "slope": _num(diag.slope), "alpha_implied": _num(diag.alpha_implied),
        "verdict": diag.verdict, "notes": diag.notes, "upper_gradient": asdict(grad),
    }
    return AnalysisResult("poincare", passed, report)


ANALYZERS: dict[str, Callable[[MetricSurface, RunConfig], AnalysisResult]] = {
    "dimension": analyze_dimension,
    "sur": analyze_sur,
    "hyperbolicity": analyze_hyperbolicity,
    "measure": analyze_measure,
    "poincare": analyze_poincare,
}


# -- run and report ------------------------------------------------------------

@dataclass
class RunResult:
    status: int
    artifacts: list
    results: dict


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _safe(name: str, fn, space, cfg) -> AnalysisResult:
    try:
        return fn(space, cfg)
    except errors.ConfigInvalid:
        raise
    except errors.GeosurfError as exc:
        return AnalysisResult(name, False, {"error": type(exc).__name__, "message": str(exc)}, {}, [f"{type(exc).__name__}: {exc}"])


def run(cfg: RunConfig) -> RunResult:
    """Run every selected analysis and write its artifacts; status 0 iff all pass.

    Raises ConfigInvalid before any computation for a bad config and
    AnalysisFailed (carrying the result) when some analysis does not pass.
    """
    cfg.validate()
    space = load_space(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stamp = {"config_hash": cfg.hash, "version": __version__}
    artifacts = []
    space_path = out / "space.json"
    _dump(space_path, describe_space(space))
    artifacts.append(str(space_path))
    _dump(out / "config.json", cfg.to_dict())

    names = [n for n in ANALYSES if n in cfg.analyses and n != "generate"]
    if cfg.workers > 1 and len(names) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            done = list(pool.map(lambda n: _safe(n, ANALYZERS[n], space, cfg), names))
    else:
        done = [_safe(n, ANALYZERS[n], space, cfg) for n in names]

    results = {}
    for res in done:
        body = dict(res.report, **stamp, analysis=res.name, passed=res.passed, diagnostics=res.diagnostics)
        path = out / f"{res.name}.json"
        _dump(path, body)
        artifacts.append(str(path))
        for fname, (header, rows) in res.tables.items():
            _write_table(out / fname, header, rows)
            artifacts.append(str(out / fname))
        for fname, doc in res.files.items():
            _dump(out / fname, doc)
            artifacts.append(str(out / fname))
        results[res.name] = res
    status = 0 if all(r.passed for r in results.values()) else 1
    result = RunResult(status, artifacts, results)
    if status:
        failed = [n for n, r in results.items() if not r.passed]
        exc = errors.AnalysisFailed(f"analyses failed: {', '.join(failed)}")
        exc.result = result
        raise exc
    return result


def report(artifacts) -> dict:
    """Consolidate a run's JSON reports into summary.json plus columnar plot data.

    ``artifacts`` is a run directory or a list of report paths.
    """
    if isinstance(artifacts, (str, os.PathLike)):
        base = Path(artifacts)
        paths = sorted(base.glob("*.json")) if base.is_dir() else []
    else:
        paths = [Path(p) for p in artifacts]
        base = paths[0].parent if paths else Path(".")
    reports = {}
    for p in paths:
        if not p.exists():
            raise errors.MissingArtifacts(f"missing artifact {p}")
        if p.suffix != ".json":
            continue
        data = json.loads(p.read_text())
        if isinstance(data, dict) and "analysis" in data:
            reports[data["analysis"]] = data
    if not reports:
        raise errors.MissingArtifacts("no analysis reports found")
    summary = {
        "version": __version__,
        "config_hash": sorted({r["config_hash"] for r in reports.values()}),
        "analyses": {n: {"passed": r["passed"], "diagnostics": r.get("diagnostics", [])} for n, r in sorted(reports.items())},
        "all_passed": all(r["passed"] for r in reports.values()),
    }
    if "sur" in reports:
        rows = [[q["p"], q["r"], q["sur"], q["sur"] / q["r"] if q["r"] else None] for q in reports["sur"]["queries"] if "sur" in q]
        _write_table(base / "plot_sur.csv", ["p", "r", "Sur", "Sur/r"], rows)
    if "hyperbolicity" in reports:
        h = reports["hyperbolicity"]
        summary["dichotomy"] = [{k: s[k] for k in ("radius", "M", "class", "certificate", "delta")} for s in h["scales"]]
        rows = [[s["radius"], s["M"], s["class"], s["delta_over_r"]] for s in h["scales"]]
        _write_table(base / "plot_dichotomy.csv", ["radius", "M", "class", "delta_over_r"], rows)
    if "poincare" in reports:
        pr = reports["poincare"]
        _write_table(base / "plot_poincare.csv", ["epsilon", "lhs", "gradient_term"], list(zip(pr["epsilons"], pr["lhs"], pr["gradient_terms"])))
    _dump(base / "summary.json", summary)
    return summary

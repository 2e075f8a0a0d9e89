"""Command-line front end: ``ruellelab analyze-map | run | catalog``.

Exit codes: 0 when the command ran and its internal audits passed (a
scientific finding such as "not Lattes" or "area diverges" is still 0),
1 when an internal audit failed, 2 for operational errors (bad input,
budget exhausted, numerical failure).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, bergman, ergodic, hyperbolic, lattes, quadrature
from .errors import NotApplicable, RuelleLabError
from .files import (
    FileFormatError,
    complex_from_json,
    complex_to_json,
    load_json,
    map_from_spec,
    mu_from_spec,
    now,
    phi_from_spec,
    read_map,
    region_from_spec,
    write_csv,
    write_manifest,
    write_map,
)
from .rational_map import critical_points, critical_values, postcritical_set
from .transfer import duality_residual

PROJECTION_FUNCTIONS = {
    "one": lambda s: np.ones_like(s),
    "zeta": lambda s: s,
    "zeta2": lambda s: s * s,
    "conj": np.conj,
}


def analyze(R) -> dict:
    pc = postcritical_set(R)
    basis = lattes.q_basis(pc) if pc.resolved else []
    return {
        "label": R.label,
        "degree": R.degree,
        "critical_points": [
            {"point": complex_to_json(c), "multiplicity": m} for c, m in critical_points(R)
        ],
        "critical_values": [complex_to_json(v) for v in critical_values(R)],
        "postcritical": {
            "points": [complex_to_json(p) for p in pc.points],
            "size": len(pc.points),
            "resolved": pc.resolved,
        },
        "dim_Q": lattes.q_dimension(pc) if pc.resolved else None,
        "basis": [
            {"label": b.label, "poles": [complex_to_json(p) for p, _ in b.poles]} for b in basis
        ],
    }


def cmd_analyze_map(args) -> int:
    report = analyze(read_map(args.map))
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "analysis.json").write_text(text + "\n")
    return 0


def cmd_catalog(args) -> int:
    g2, g3 = complex(args.g2), complex(args.g3)
    data = lattes.flexible_lattes(g2, g3)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "lattes_map.json"
    write_map(path, data.map, {"lattes": {
        "g2": complex_to_json(g2),
        "g3": complex_to_json(g3),
        "branch_points": [complex_to_json(e) for e in data.branch_points],
        "report": data.report,
    }})
    print(path)
    return 0


# ---------------------------------------------------------------------------
# experiments; each returns (header, rows, findings, audits)


def _exp_cesaro(spec, R, tol, budget, threads):
    phi = phi_from_spec(spec.get("phi", "basis:0"), R)
    region = region_from_spec(spec.get("region"))
    series = ergodic.cesaro_decay(
        R, phi, spec.get("n_schedule", [1, 2, 4, 8, 16]), region, tol,
        method=spec.get("method", "auto"), threads=threads, budget=budget,
    )
    rows = list(series.rows())
    first = series.values[0]
    findings = {"method": series.method, "ratio_last_first": series.values[-1] / first if first else None}
    audits = {"finite": all(math.isfinite(v) for v in series.values)}
    return ["n", "re", "im", "abs", "err"], rows, findings, audits


def _exp_lattes(spec, R, tol, budget, threads):
    try:
        res = lattes.lattes_residual(R, seed=spec.get("seed", 0))
    except NotApplicable as exc:
        return ["quantity", "value"], [["residual", "nan"]], {"not_applicable": str(exc)}, {}
    findings = {"residual": res, "lattes_candidate": res < 1e-6}
    return ["quantity", "value"], [["residual", res]], findings, {"finite": math.isfinite(res)}


def _exp_duality(spec, R, tol, budget, threads):
    phi = phi_from_spec(spec.get("phi", "basis:0"), R)
    mu = mu_from_spec(spec.get("mu", "line_field"), phi)
    res = duality_residual(R, mu, phi, {"tol": tol, "budget": budget})
    return ["quantity", "value"], [["residual", res]], {"residual": res}, {"finite": math.isfinite(res)}


def _exp_bcond(spec, R, tol, budget, threads):
    ratio = hyperbolic.bcond_ratio(R, resolution=int(spec.get("resolution", 1)), tol=tol)
    return ["quantity", "value"], [["ratio", ratio]], {"ratio": ratio}, {"finite": math.isfinite(ratio)}


def _model_from_spec(spec):
    kind = spec.get("kind", "disk") if isinstance(spec, dict) else spec
    if kind == "disk":
        return hyperbolic.MetricModel.disk()
    if kind == "punctured_disk":
        return hyperbolic.MetricModel.punctured_disk()
    if kind == "annulus":
        return hyperbolic.MetricModel.annulus(spec["r"], spec["R"])
    if kind == "punctured_sphere":
        return hyperbolic.MetricModel.punctured_sphere(
            [complex_from_json(p, "model.points") for p in spec["points"]])
    raise FileFormatError(f"field 'model.kind': unsupported kind {kind!r}")


def _exp_area(spec, R, tol, budget, threads):
    model = _model_from_spec(spec.get("model", "disk"))
    region = region_from_spec(spec.get("region"))
    res = hyperbolic.hyperbolic_area(model, region, tol, budget)
    parts = res if isinstance(res, tuple) else (res,)
    names = ("lower", "upper") if isinstance(res, tuple) else ("area",)
    rows = [[n, r.value, r.abs_error_estimate, r.converged, r.diverged] for n, r in zip(names, parts)]
    findings = {"diverged": any(r.diverged for r in parts)}
    return ["quantity", "value", "err", "converged", "diverged"], rows, findings, {}


def _exp_kernel(spec, R, tol, budget, threads):
    name = spec.get("function", "one")
    if name not in PROJECTION_FUNCTIONS:
        raise FileFormatError(f"field 'function': expected one of {sorted(PROJECTION_FUNCTIONS)}")
    pts = np.array([complex_from_json(p, "points") for p in spec.get("points", [0, 0.5, [0, 0.5]])])
    vals = np.atleast_1d(bergman.project(bergman.KernelContext.disk(), PROJECTION_FUNCTIONS[name], pts, tol,
                                         budget))
    rows = [[p.real, p.imag, v.real, v.imag] for p, v in zip(pts, vals)]
    return ["z_re", "z_im", "re", "im"], rows, {"function": name}, {"finite": bool(np.all(np.isfinite(vals)))}


def _exp_exhaustion(spec, R, tol, budget, threads):
    ctx = bergman.KernelContext.disk()
    exh = bergman.Exhaustion(n_max=int(spec.get("n_max", 64)))
    A = region_from_spec(spec.get("region", {"kind": "disk", "center": 0, "radius": 0.25}))
    n_values = spec.get("n_values", [2, 4, 8, 16, 32, 64])
    rows = bergman.defect_curve(ctx, exh, A, n_values, int(spec.get("probe_count", 8)), int(spec.get("seed", 0)))
    uppers = [u for _, _, u in rows]
    findings = {"min_upper": min(uppers), "below_one": min(uppers) < 1}
    audits = {"lower_le_upper": all(lo <= up for _, lo, up in rows)}
    return ["n", "lower", "upper"], [list(r) for r in rows], findings, audits


def _exp_rays(spec, R, tol, budget, threads):
    N = int(spec.get("N", 8))
    mu_norm = float(spec.get("mu_norm", 1.0))
    ts = spec.get("t_schedule", list(np.linspace(0, 10, 41)))
    pairs = [tuple(map(tuple, p)) for p in spec.get("pairs", [[[2, 1], [3, 1]], [[2, 1], [2, 2]]])]
    curves = ergodic.ray_distance_curves(N, mu_norm, pairs, ts)
    rows = [[t, *curves[:, j]] for j, t in enumerate(ts)]
    devs = ergodic.ray_statement_deviations(N, mu_norm)
    header = ["t"] + [f"d_{r1}_{i1}__{r2}_{i2}" for (r1, i1), (r2, i2) in pairs]
    return header, rows, devs, {k: v < 1e-12 for k, v in devs.items()}


RUNNERS = {
    "cesaro-decay": _exp_cesaro,
    "lattes-check": _exp_lattes,
    "duality": _exp_duality,
    "bcond": _exp_bcond,
    "area": _exp_area,
    "kernel-projection": _exp_kernel,
    "exhaustion-defect": _exp_exhaustion,
    "rays": _exp_rays,
}
NEEDS_MAP = {"cesaro-decay", "lattes-check", "duality", "bcond"}


def cmd_run(args, argv) -> int:
    started = now()
    exp_path = Path(args.experiment)
    spec = load_json(exp_path)
    if not isinstance(spec, dict) or "experiment" not in spec:
        raise FileFormatError(f"{exp_path}: missing field 'experiment'")
    name = spec["experiment"]
    if name not in RUNNERS:
        raise FileFormatError(f"field 'experiment': unknown experiment {name!r}")
    ergodic.Experiment(name, n_schedule=spec.get("n_schedule", []))
    inputs = [exp_path]
    R = None
    map_spec = args.map or spec.get("map")
    if name in NEEDS_MAP:
        if map_spec is None:
            raise FileFormatError("field 'map' is required for this experiment")
        R = map_from_spec(map_spec, base=exp_path.parent if not args.map else None)
        if isinstance(map_spec, str):
            p = Path(map_spec)
            inputs.append(p if args.map or p.is_absolute() else exp_path.parent / p)
    tol = args.tol if args.tol is not None else float(spec.get("tol", quadrature.DEFAULT_TOL))
    budget = args.budget if args.budget is not None else int(spec.get("budget", quadrature.DEFAULT_BUDGET))
    seed = args.seed if args.seed is not None else int(spec.get("seed", 0))
    spec["seed"] = seed
    header, rows, findings, audits = RUNNERS[name](spec, R, tol, budget, args.threads)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    write_csv(csv_path, header, rows)
    write_manifest(
        out, version=__version__, command=argv, inputs=inputs, seed=seed,
        tolerances={"tol": tol, "budget": budget}, started=started, artifacts=[csv_path],
        extra={"experiment": name, "threads": args.threads, "findings": findings, "audits": audits},
    )
    print(json.dumps({"experiment": name, "findings": findings, "audits": audits}, default=str))
    return 0 if all(audits.values()) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ruellelab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze-map", help="degree, critical data, postcritical set and quadratic-differential basis")
    a.add_argument("--map", required=True)
    a.add_argument("--out")

    r = sub.add_parser("run", help="run an experiment file and write CSV plus manifest")
    r.add_argument("--experiment", required=True)
    r.add_argument("--map", help="override the map named in the experiment file")
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--tol", type=float)
    r.add_argument("--budget", type=int)
    r.add_argument("--threads", type=int, default=1)

    c = sub.add_parser("catalog", help="write a flexible Lattes map file for invariants (g2, g3)")
    c.add_argument("--g2", required=True, help="complex, e.g. 4 or 1+2j")
    c.add_argument("--g3", required=True)
    c.add_argument("--out")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze-map":
            return cmd_analyze_map(args)
        if args.command == "catalog":
            return cmd_catalog(args)
        return cmd_run(args, ["ruellelab", *argv])
    except (RuelleLabError, FileFormatError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

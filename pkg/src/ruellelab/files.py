"""Map files, experiment files, CSV tables and run manifests (all plain JSON / CSV)."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import InvalidMap
from .lattes import canonical_quad_diff, flexible_lattes, invariant_line_field, q_basis
from .quadrature import Region
from .rational_map import INFINITY, RationalMap, is_infinite, postcritical_set
from .transfer import LineField, QuadDifferential


class FileFormatError(ValueError):
    """A map or experiment file could not be understood; the message names the field."""


def complex_to_json(z):
    z = complex(z)
    if is_infinite(z):
        return "inf"
    return [float(z.real), float(z.imag)]


def complex_from_json(v, what="value"):
    if v == "inf":
        return INFINITY
    if isinstance(v, (int, float)):
        return complex(v)
    try:
        re, im = v
        return complex(float(re), float(im))
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"field '{what}' must be a number, [re, im] or \"inf\"") from exc


def load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def map_from_spec(spec, base: Path | None = None) -> RationalMap:
    """A map from a file path, an inline {num, den} dict, or {"lattes": [g2, g3]}."""
    if isinstance(spec, str):
        path = Path(spec)
        if base is not None and not path.is_absolute():
            path = base / path
        return map_from_spec(load_json(path))
    if not isinstance(spec, dict):
        raise FileFormatError("field 'map' must be a path or an object")
    if "lattes" in spec and "num" not in spec:
        g2, g3 = (complex_from_json(v, "lattes") for v in spec["lattes"])
        return flexible_lattes(g2, g3).map
    try:
        return RationalMap.from_dict(spec)
    except InvalidMap as exc:
        raise FileFormatError(str(exc)) from exc


def read_map(path) -> RationalMap:
    return map_from_spec(load_json(path))


def write_map(path, R: RationalMap, extra=None):
    data = R.to_dict()
    if extra:
        data.update(extra)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def region_from_spec(spec) -> Region:
    if spec is None:
        return Region.sphere()
    if not isinstance(spec, dict) or "kind" not in spec:
        raise FileFormatError("field 'region' must be an object with a 'kind'")
    kind = spec["kind"]
    c = complex_from_json(spec.get("center", 0), "region.center")
    excl = tuple((complex_from_json(p, "region.exclusions"), float(r)) for p, r in spec.get("exclusions", ()))
    try:
        if kind == "sphere":
            return Region.sphere(excl)
        if kind == "disk":
            return Region.disk(c, float(spec["radius"]), excl)
        if kind == "annulus":
            return Region.annulus(c, float(spec["r"]), float(spec["R"]), excl)
        if kind == "empty":
            return Region.empty()
    except KeyError as exc:
        raise FileFormatError(f"field 'region.{exc.args[0]}' is missing") from exc
    raise FileFormatError(f"field 'region.kind': unsupported kind {kind!r}")


def phi_from_spec(spec, R: RationalMap) -> QuadDifferential:
    """"basis:k" (k-th element of the quadratic-differential basis) or {"poles": [...], "numerator": [...]}."""
    if isinstance(spec, str) and spec.startswith("basis:"):
        pc = postcritical_set(R)
        basis = q_basis(pc)
        k = int(spec.split(":", 1)[1])
        if not 0 <= k < len(basis):
            raise FileFormatError(f"field 'phi': basis has {len(basis)} elements, asked for {k}")
        return basis[k]
    if isinstance(spec, dict) and "poles" in spec:
        poles = [complex_from_json(p, "phi.poles") for p in spec["poles"]]
        num = [complex_from_json(c, "phi.numerator") for c in spec.get("numerator", [1])]
        if len(poles) == 4 and "numerator" not in spec:
            return canonical_quad_diff(poles)
        return QuadDifferential.from_poles(poles, numerator=num)
    raise FileFormatError("field 'phi' must be \"basis:k\" or an object with 'poles'")


def mu_from_spec(spec, phi: QuadDifferential | None) -> LineField:
    """"line_field" (conj(phi)/|phi|) or {"constant": value}."""
    if spec in (None, "line_field"):
        if phi is None:
            raise FileFormatError("field 'mu': line_field needs a 'phi'")
        return invariant_line_field(phi)
    if isinstance(spec, dict) and "constant" in spec:
        k = complex_from_json(spec["constant"], "mu.constant")
        if abs(k) > 1:
            raise FileFormatError("field 'mu.constant' must have modulus at most 1")
        return LineField.constant(k)
    raise FileFormatError("field 'mu' must be \"line_field\" or {\"constant\": value}")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir, *, version, command, inputs, seed, tolerances, started, artifacts,
                   extra=None):
    out_dir = Path(out_dir)
    data = {
        "version": version,
        "command": list(command),
        "inputs": {str(p): sha256(p) for p in inputs},
        "seed": seed,
        "tolerances": tolerances,
        "started": started,
        "finished": now(),
        "artifacts": [{"path": Path(a).name, "sha256": sha256(a)} for a in artifacts],
    }
    if extra:
        data.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(data, indent=2, default=_json_default) + "\n")
    return path


def _json_default(v):
    if isinstance(v, complex):
        return complex_to_json(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    raise TypeError(f"cannot serialise {type(v).__name__}")

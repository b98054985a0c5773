"""JSON / CSV serialization. Formats are described in docs/formats.md.

Complex numbers are ``[re, im]`` pairs, matrices are row-major lists of rows.
Every document carries ``schema_version``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import MISSING, asdict
from pathlib import Path

import numpy as np

from .dynamics import LindbladGenerator, StableBasisModel
from .errors import InputError, SchemaError
from .fringe import ClosureReport, FitResult, FringeScan

SCHEMA_VERSION = 1
SCAN_CSV_HEADER = ("omega_offset_rad_s", "pe")


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n"


def write_json(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"invalid JSON ({exc})") from None


def require(doc, key: str, path: str = "$"):
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object")
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return doc[key]


def require_number(doc, key: str, path: str = "$", positive: bool = False, default=None) -> float:
    if default is not None and key not in doc:
        return default
    v = require(doc, key, path)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaError(f"{path}.{key}", f"expected a finite number, got {v!r}")
    if positive and v <= 0:
        raise SchemaError(f"{path}.{key}", f"must be positive, got {v!r}")
    return float(v)


def check_version(doc: dict, path: str = "$") -> None:
    v = doc.get("schema_version", SCHEMA_VERSION) if isinstance(doc, dict) else None
    if v != SCHEMA_VERSION:
        raise SchemaError(f"{path}.schema_version", f"unsupported version {v!r}")


def complex_to_json(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def complex_from_json(v, path: str) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)):
        raise SchemaError(path, f"expected [re, im], got {v!r}")
    return complex(v[0], v[1])


def matrix_to_json(m) -> list:
    return [[complex_to_json(z) for z in row] for row in np.asarray(m)]


def matrix_from_json(v, path: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise SchemaError(path, "expected a non-empty list of rows")
    rows = []
    for i, row in enumerate(v):
        if not isinstance(row, list):
            raise SchemaError(f"{path}[{i}]", "expected a row list")
        rows.append([complex_from_json(z, f"{path}[{i}][{j}]") for j, z in enumerate(row)])
    n = len(rows)
    for i, r in enumerate(rows):
        if len(r) != n:
            raise SchemaError(f"{path}[{i}]", f"matrix must be square: row has {len(r)} entries, expected {n}")
    if dim is not None and n != dim:
        raise SchemaError(path, f"expected {dim}x{dim}, got {n}x{n}")
    return np.array(rows, dtype=np.complex128)


def generator_to_dict(gen: LindbladGenerator) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "dim": gen.dim,
        "hamiltonian": matrix_to_json(gen.hamiltonian),
        "jumps": [matrix_to_json(L) for L in gen.jumps],
    }


def generator_from_dict(doc: dict, path: str = "$") -> LindbladGenerator:
    check_version(doc, path)
    dim = require(doc, "dim", path)
    if not isinstance(dim, int) or dim < 1:
        raise SchemaError(f"{path}.dim", "expected a positive integer")
    h = matrix_from_json(require(doc, "hamiltonian", path), f"{path}.hamiltonian", dim)
    jumps = doc.get("jumps", [])
    if not isinstance(jumps, list):
        raise SchemaError(f"{path}.jumps", "expected a list")
    mats = tuple(matrix_from_json(j, f"{path}.jumps[{i}]", dim) for i, j in enumerate(jumps))
    try:
        return LindbladGenerator(h, mats)
    except InputError as exc:
        raise SchemaError(path, str(exc)) from None


def model_to_dict(model: StableBasisModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "dim": model.dim,
        "energies": [float(e) for e in model.energies],
        "jump_eigenvalues": [[complex_to_json(z) for z in row] for row in model.jump_eigenvalues],
    }


def model_from_dict(doc: dict, path: str = "$") -> StableBasisModel:
    check_version(doc, path)
    dim = require(doc, "dim", path)
    if not isinstance(dim, int) or dim < 1:
        raise SchemaError(f"{path}.dim", "expected a positive integer")
    energies = require(doc, "energies", path)
    if not (isinstance(energies, list) and len(energies) == dim
            and all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in energies)):
        raise SchemaError(f"{path}.energies", f"expected {dim} real numbers")
    ell_doc = doc.get("jump_eigenvalues", [])
    if not isinstance(ell_doc, list):
        raise SchemaError(f"{path}.jump_eigenvalues", "expected a list of rows")
    rows = []
    for a, row in enumerate(ell_doc):
        p = f"{path}.jump_eigenvalues[{a}]"
        if not isinstance(row, list) or len(row) != dim:
            raise SchemaError(p, f"expected {dim} entries")
        rows.append([complex_from_json(z, f"{p}[{m}]") for m, z in enumerate(row)])
    ell = np.array(rows, dtype=np.complex128).reshape(len(rows), dim)
    try:
        return StableBasisModel(np.array(energies, dtype=float), ell)
    except InputError as exc:
        raise SchemaError(path, str(exc)) from None


def scan_to_csv(scan: FringeScan) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_CSV_HEADER)
    for x, p in zip(scan.omegas, scan.pe):
        w.writerow((repr(float(x)), repr(float(p))))
    return buf.getvalue()


def write_scan(scan: FringeScan, csv_path, meta_path=None, extra: dict | None = None) -> None:
    Path(csv_path).write_text(scan_to_csv(scan), encoding="utf-8")
    if meta_path is not None:
        doc = {"schema_version": SCHEMA_VERSION, "kind": "fringe_scan", "points": int(scan.omegas.size),
               "csv": Path(csv_path).name, "meta": scan.meta}
        if extra:
            doc.update(extra)
        write_json(doc, meta_path)


def read_scan(csv_path, meta_path=None) -> FringeScan:
    try:
        text = Path(csv_path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"{csv_path}: file not found") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != SCAN_CSV_HEADER:
        raise SchemaError(f"{csv_path}:1", f"expected header {','.join(SCAN_CSV_HEADER)}")
    xs, ps = [], []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise SchemaError(f"{csv_path}:{n}", "expected two columns")
        try:
            xs.append(float(row[0]))
            ps.append(float(row[1]))
        except ValueError:
            raise SchemaError(f"{csv_path}:{n}", "non-numeric value") from None
    meta = {}
    if meta_path is not None:
        doc = read_json(meta_path)
        check_version(doc)
        if doc.get("kind") != "fringe_scan":
            raise SchemaError("$.kind", "expected 'fringe_scan'")
        meta = require(doc, "meta")
        if require(doc, "points") != len(xs):
            raise SchemaError("$.points", f"sidecar says {doc['points']} points, CSV has {len(xs)}")
    try:
        return FringeScan(np.array(xs), np.array(ps), meta)
    except InputError as exc:
        raise SchemaError(str(csv_path), str(exc)) from None


def fit_result_to_dict(fit: FitResult) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "fit_result", **asdict(fit)}


def fit_result_from_dict(doc: dict) -> FitResult:
    check_version(doc)
    if doc.get("kind") != "fit_result":
        raise SchemaError("$.kind", "expected 'fit_result'")
    fields = FitResult.__dataclass_fields__
    kwargs = {}
    for name in fields:
        if name in doc:
            v = doc[name]
            kwargs[name] = float("nan") if v is None else v
        elif fields[name].default is MISSING:
            raise SchemaError(f"$.{name}", "missing required field")
    try:
        return FitResult(**kwargs)
    except TypeError as exc:
        raise SchemaError("$", str(exc)) from None


def closure_to_dict(report: ClosureReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "closure_report",
        "levels": list(report.levels),
        "shifts_rad_s": list(report.shifts),
        "closure_sum_rad_s": report.closure_sum,
        "energy_closure_rad_s": report.energy_closure,
    }


def closure_from_dict(doc: dict) -> ClosureReport:
    check_version(doc)
    if doc.get("kind") != "closure_report":
        raise SchemaError("$.kind", "expected 'closure_report'")
    levels = require(doc, "levels")
    shifts = require(doc, "shifts_rad_s")
    if not (isinstance(levels, list) and len(levels) == 3 and isinstance(shifts, list) and len(shifts) == 3):
        raise SchemaError("$", "levels and shifts_rad_s must have three entries")
    return ClosureReport(tuple(int(v) for v in levels), tuple(float(v) for v in shifts),
                         require_number(doc, "closure_sum_rad_s"), require_number(doc, "energy_closure_rad_s"))


_REQUIRED_KEYS = {
    "simulation": ("config", "snapshots", "pe_sequence", "pe_closed_form", "difference"),
    "bounds_report": ("config", "report"),
    "verify_report": ("checks", "passed"),
    "scan_run": ("config", "scan_csv", "scan_meta"),
}


def parse_document(doc: dict):
    """Validate any document written by the CLI and return its typed form.

    Fit results and closure reports come back as dataclasses, scan sidecars as
    the sidecar dict, everything else as the validated dict.
    """
    check_version(doc)
    kind = require(doc, "kind")
    if kind == "fit_result":
        return fit_result_from_dict(doc)
    if kind == "closure_report":
        return closure_from_dict(doc)
    if kind == "fringe_scan":
        require(doc, "meta")
        require(doc, "points")
        return doc
    if kind not in _REQUIRED_KEYS:
        raise SchemaError("$.kind", f"unknown document kind {kind!r}")
    for key in _REQUIRED_KEYS[kind]:
        require(doc, key)
    if kind == "simulation":
        for i, snap in enumerate(doc["snapshots"]):
            matrix_from_json(require(snap, "rho_interaction", f"$.snapshots[{i}]"),
                             f"$.snapshots[{i}].rho_interaction")
    return doc

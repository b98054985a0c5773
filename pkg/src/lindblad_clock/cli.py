"""``clock`` command-line front end.

    clock <command> --config <path> [--out <dir>] [--seed N] [--points N] [--quiet]

Exit codes: 0 success, 1 property or fit failure, 2 input error. Logs go to
stderr, artifacts to ``--out``, and a one-line JSON summary to stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bounds, io, verify
from .dynamics import StableBasisModel
from .errors import ClockError, InputError, SchemaError
from .fringe import fit_fringe, scan_fringe, shape_metrics, three_level_closure
from .ramsey import (
    ClockTransition,
    FringeParams,
    RamseyConfig,
    analytic_pe,
    model_from_params,
    params_from_model,
    ramsey_sequence,
)

log = logging.getLogger("clock")

COMMANDS = ("simulate", "scan", "fit", "closure", "bounds", "verify")
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class _Run:
    def __init__(self, args, config: dict, config_dir: Path):
        self.args = args
        self.config = config
        self.config_dir = config_dir
        self.out = Path(args.out)

    def path(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.config_dir / p

    def seed(self) -> int:
        if self.args.seed is not None:
            return self.args.seed
        seed = self.config.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise SchemaError("$.seed", "expected an integer")
        return seed


# ---------------------------------------------------------------------------
# config ingestion (unit conversion happens here and nowhere else)

def _rate(doc: dict, stem: str, path: str, default=None) -> float:
    if f"{stem}_rad_s" in doc:
        return io.require_number(doc, f"{stem}_rad_s", path)
    if f"{stem}_ev" in doc:
        return bounds.ev_to_rad_s(io.require_number(doc, f"{stem}_ev", path))
    if default is not None:
        return default
    raise SchemaError(f"{path}.{stem}_rad_s", "missing required field")


def _ramsey_config(run: _Run) -> RamseyConfig:
    doc = io.require(run.config, "ramsey")
    p = "$.ramsey"
    p2 = doc.get("pulse2_start_s")
    try:
        return RamseyConfig(
            tau=io.require_number(doc, "tau_s", p, positive=True),
            T=io.require_number(doc, "T_s", p, positive=True),
            omega_rabi=io.require_number(doc, "omega_rabi_rad_s", p, positive=True),
            delta_omega=io.require_number(doc, "delta_omega_rad_s", p, default=0.0),
            pulse1_start=io.require_number(doc, "pulse1_start_s", p, default=0.0),
            pulse2_start=None if p2 is None else io.require_number(doc, "pulse2_start_s", p),
        )
    except SchemaError:
        raise
    except InputError as exc:
        raise SchemaError(p, str(exc)) from None


def _transition(run: _Run) -> ClockTransition:
    doc = run.config.get("transition", {})
    g, e = doc.get("g_index", 0), doc.get("e_index", 1)
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in (g, e)):
        raise SchemaError("$.transition", "g_index and e_index must be integers")
    return ClockTransition(g, e)


def _model(run: _Run) -> StableBasisModel | None:
    if "model" in run.config:
        return io.model_from_dict(run.config["model"], "$.model")
    if "model_path" in run.config:
        return io.model_from_dict(io.read_json(run.path(run.config["model_path"])), "$.model_path")
    return None


def _fringe_params(run: _Run, omega_rabi_tau: float) -> FringeParams:
    doc = io.require(run.config, "fringe_params")
    try:
        return FringeParams(_rate(doc, "gamma", "$.fringe_params"),
                            _rate(doc, "eshift", "$.fringe_params", default=0.0), omega_rabi_tau)
    except SchemaError:
        raise
    except InputError as exc:
        raise SchemaError("$.fringe_params", str(exc)) from None


def _source(run: _Run, cfg: RamseyConfig):
    model = _model(run)
    if model is not None:
        tr = _transition(run)
        try:
            tr.validate(model.dim)
        except InputError as exc:
            raise SchemaError("$.transition", str(exc)) from None
        return model, tr
    if "fringe_params" in run.config:
        return _fringe_params(run, cfg.omega_rabi_tau), ClockTransition(0, 1)
    raise SchemaError("$", "one of model, model_path or fringe_params is required")


def _grid(run: _Run) -> np.ndarray:
    doc = io.require(run.config, "grid")
    center = io.require_number(doc, "center_rad_s", "$.grid", default=0.0)
    span = io.require_number(doc, "span_rad_s", "$.grid", positive=True)
    points = run.args.points if run.args.points is not None else doc.get("points")
    if not isinstance(points, int) or isinstance(points, bool) or points < 2:
        raise SchemaError("$.grid.points", "expected an integer >= 2")
    return np.linspace(center - 0.5 * span, center + 0.5 * span, points)


def _envelope(run: _Run, kind: str, **body) -> dict:
    resolved = dict(run.config)
    if run.args.seed is not None:
        resolved["seed"] = run.args.seed
    if run.args.points is not None:
        resolved.setdefault("grid", {})
        resolved["grid"] = dict(resolved["grid"], points=run.args.points)
    return {"schema_version": io.SCHEMA_VERSION, "kind": kind, "config": resolved, **body}


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(run: _Run):
    cfg = _ramsey_config(run)
    source, tr = _source(run, cfg)
    if isinstance(source, FringeParams):
        params = source
        model = model_from_params(params)
    else:
        model = source
        params = params_from_model(model, tr, cfg.omega_rabi_tau)
    samples = run.config.get("dark_samples", 4)
    if not isinstance(samples, int) or samples < 0:
        raise SchemaError("$.dark_samples", "expected a non-negative integer")
    result = ramsey_sequence(model, tr, cfg, dark_samples=samples)
    closed = analytic_pe(params, cfg.delta_omega, cfg.dark_time)
    doc = _envelope(
        run, "simulation",
        snapshots=[{"label": label, "time_s": t, "rho_interaction": io.matrix_to_json(rho.matrix)}
                   for label, t, rho in result.snapshots],
        pe_sequence=result.pe,
        pe_closed_form=closed,
        difference=result.pe - closed,
        fringe_params={"gamma_rad_s": params.gamma, "eshift_rad_s": params.eshift,
                       "omega_rabi_tau_rad": params.omega_rabi_tau},
        validity=result.validity,
    )
    out = run.out / "simulate.json"
    io.write_json(doc, out)
    return EXIT_OK, {"pe": result.pe, "pe_closed_form": closed, "outputs": [str(out)]}


def cmd_scan(run: _Run):
    cfg = _ramsey_config(run)
    source, tr = _source(run, cfg)
    grid = _grid(run)
    noise = run.config.get("noise")
    if noise is not None:
        sigma = io.require_number(noise, "sigma", "$.noise")
        if sigma < 0:
            raise SchemaError("$.noise.sigma", "must be >= 0")
        noise = {"sigma": sigma, "seed": run.seed()}
    scan = scan_fringe(source, cfg, grid, transition=tr, noise=noise)
    csv_path, meta_path = run.out / "scan.csv", run.out / "scan.json"
    resolved = _envelope(run, "scan_run")["config"]
    io.write_scan(scan, csv_path, meta_path, extra={"config": resolved})
    summary = {"points": int(grid.size), "outputs": [str(csv_path), str(meta_path)]}
    try:
        m = shape_metrics(scan, cfg.T)
        summary.update(peak_omega_rad_s=m.peak_omega, min_max_ratio=m.min_max_ratio,
                       slope_point_ratio=m.slope_point_ratio)
    except InputError as exc:
        log.info("shape metrics skipped: %s", exc)
    return EXIT_OK, summary


def cmd_fit(run: _Run):
    csv_path = run.path(io.require(run.config, "scan_csv"))
    meta_rel = run.config.get("scan_meta")
    meta_path = run.path(meta_rel) if meta_rel else None
    scan = io.read_scan(csv_path, meta_path)
    if "T_s" in run.config:
        T = io.require_number(run.config, "T_s", positive=True)
    elif "T" in scan.meta:
        T = float(scan.meta["T"])
    else:
        raise SchemaError("$.T_s", "missing required field (and no T in the scan sidecar)")
    init = run.config.get("init")
    if init is not None:
        init = [io.require_number(init, k, "$.init") for k in ("amplitude", "gamma_rad_s", "eshift_rad_s")]
    fit = fit_fringe(scan, T, init=init)
    doc = io.fit_result_to_dict(fit)
    doc["config"] = _envelope(run, "fit")["config"]
    out = run.out / "fit.json"
    io.write_json(doc, out)
    code = EXIT_OK if fit.converged else EXIT_FAIL
    return code, {"gamma_rad_s": fit.gamma, "eshift_rad_s": fit.eshift, "converged": fit.converged,
                  "outputs": [str(out)]}


def cmd_closure(run: _Run):
    model = _model(run)
    if model is None:
        raise SchemaError("$.model", "missing required field")
    levels = run.config.get("levels", [0, 1, 2])
    if not (isinstance(levels, list) and len(levels) == 3 and all(isinstance(v, int) for v in levels)):
        raise SchemaError("$.levels", "expected three integer level indices")
    try:
        rep = three_level_closure(model, tuple(levels))
    except InputError as exc:
        raise SchemaError("$.levels", str(exc)) from None
    doc = io.closure_to_dict(rep)
    doc["config"] = _envelope(run, "closure")["config"]
    out = run.out / "closure.json"
    io.write_json(doc, out)
    return EXIT_OK, {"closure_sum_rad_s": rep.closure_sum, "outputs": [str(out)]}


def cmd_bounds(run: _Run):
    c = run.config
    T = io.require_number(c, "ramsey_time_s", positive=True)
    energy = None
    if "transition_energy_ev" in c:
        energy = io.require_number(c, "transition_energy_ev", positive=True)
    elif "transition_frequency_hz" in c:
        energy = bounds.hz_to_ev(io.require_number(c, "transition_frequency_hz", positive=True))
    elif "reference_transition" in c:
        name = c["reference_transition"]
        if name not in bounds.REFERENCE_TRANSITIONS_HZ:
            raise SchemaError("$.reference_transition", f"unknown transition {name!r}")
        energy = bounds.hz_to_ev(bounds.REFERENCE_TRANSITIONS_HZ[name])
    quoted = io.require_number(c, "quoted_fractional", positive=True) if "quoted_fractional" in c else None
    pointer = c.get("pointer")
    if pointer is not None:
        pointer = {"mass_kg": io.require_number(pointer, "mass_kg", "$.pointer", positive=True),
                   "length_m": io.require_number(pointer, "length_m", "$.pointer", positive=True),
                   "level_index": pointer.get("level_index", 0),
                   "inertia": pointer.get("inertia", "rod_center")}
    try:
        report = bounds.bound_report(T, energy, quoted, pointer)
    except InputError as exc:
        raise SchemaError("$", str(exc)) from None
    report["hbar_ev_s"] = bounds.HBAR_EV_S
    out = run.out / "bounds.json"
    io.write_json(_envelope(run, "bounds_report", report=report), out)
    return EXIT_OK, {"gamma_bound_ev": report["gamma_bound_ev"], "outputs": [str(out)]}


def cmd_verify(run: _Run):
    fixtures = []
    for i, fx in enumerate(run.config.get("cp_fixtures", [])):
        p = f"$.cp_fixtures[{i}]"
        gen = io.generator_from_dict(io.require(fx, "generator", p), f"{p}.generator")
        t = io.require_number(fx, "t", p, default=0.5)
        fixtures.append({"generator": gen, "t": t, "negate_dissipator": bool(fx.get("negate_dissipator", False))})
    checks = verify.run_all(seed=run.seed(), fixtures=fixtures)
    passed = all(c.passed for c in checks)
    doc = _envelope(run, "verify_report", passed=passed,
                    checks=[{"name": c.name, "passed": c.passed, "details": c.details} for c in checks])
    out = run.out / "verify.json"
    io.write_json(doc, out)
    outputs = [str(out)]
    failing = [{"name": c.name, "case": _replayable(c.case)} for c in checks if not c.passed]
    if failing:
        fpath = run.out / "verify_failures.json"
        io.write_json({"schema_version": io.SCHEMA_VERSION, "kind": "verify_failures", "failures": failing}, fpath)
        outputs.append(str(fpath))
    for c in checks:
        log.info("%-32s %s", c.name, "PASS" if c.passed else "FAIL")
    return (EXIT_OK if passed else EXIT_FAIL), {
        "passed": passed, "checks": {c.name: c.passed for c in checks}, "outputs": outputs}


def _replayable(case):
    """Matrices inside failing cases become [re, im] nested lists."""
    if case is None:
        return None
    if isinstance(case, dict):
        return {k: _replayable(v) for k, v in case.items()}
    if isinstance(case, (list, tuple)):
        return [_replayable(v) for v in case]
    if isinstance(case, np.ndarray):
        if np.iscomplexobj(case):
            return io.matrix_to_json(case) if case.ndim == 2 else [io.complex_to_json(z) for z in case.ravel()]
        return case.tolist()
    return case


HANDLERS = {"simulate": cmd_simulate, "scan": cmd_scan, "fit": cmd_fit, "closure": cmd_closure,
            "bounds": cmd_bounds, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clock", description="Lindblad-corrected Ramsey fringe toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file (optional for verify)")
    ap.add_argument("--out", default=".", help="output directory (default: current directory)")
    ap.add_argument("--seed", type=int, default=None, help="seed for noise and generated cases")
    ap.add_argument("--points", type=int, default=None, help="override grid.points")
    ap.add_argument("--quiet", action="store_true", help="only warnings and errors on stderr")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    summary = {"command": args.command}
    try:
        if args.config is None:
            if args.command != "verify":
                raise SchemaError("--config", f"required for {args.command}")
            config, config_dir = {}, Path(".")
        else:
            config = io.read_json(args.config)
            if not isinstance(config, dict):
                raise SchemaError("$", "config must be a JSON object")
            io.check_version(config)
            config_dir = Path(args.config).parent
        if args.seed is not None and not (-(2**63) <= args.seed < 2**64):
            raise SchemaError("--seed", "must fit in 64 bits")
        if args.points is not None and args.points < 2:
            raise SchemaError("--points", "must be >= 2")
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                code, extra = HANDLERS[args.command](_Run(args, config, config_dir))
            finally:
                for w in caught:
                    log.warning("%s: %s", w.category.__name__, w.message)
    except (InputError, SchemaError) as exc:
        log.error("%s", exc)
        summary.update(status="input_error", error=str(exc))
        print(json.dumps(summary, sort_keys=True))
        return EXIT_INPUT
    except ClockError as exc:
        log.error("%s", exc)
        summary.update(status="failure", error=str(exc))
        print(json.dumps(summary, sort_keys=True))
        return EXIT_FAIL
    summary.update(status="ok" if code == EXIT_OK else "failure", **extra)
    print(json.dumps(io._plain(summary), sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Self-contained invariant suite behind ``clock verify``.

Each check returns a :class:`CheckResult`; failing checks carry a serializable
``case`` that reproduces the failure.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .dynamics import (
    LindbladGenerator,
    StableBasisModel,
    analytic_propagate,
    choi_psd_check,
    coherence_decay_matrix,
    entropy_condition_check,
    liouvillian_superoperator,
    negated_dissipator_superoperator,
    propagate,
    random_generator,
    random_stable_model,
    stable_basis_model,
)
from .fringe import FringeParams, fit_fringe, scan_fringe, shape_metrics, three_level_closure
from .numerics import DensityMatrix, max_norm, random_density_matrix, von_neumann_entropy
from .ramsey import ClockTransition, RamseyConfig, analytic_pe, model_from_params, ramsey_sequence


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    case: dict | None = None


def check_analytic_vs_superoperator(rng, n_models: int = 20) -> CheckResult:
    worst, case = 0.0, None
    for _ in range(n_models):
        d = int(rng.integers(2, 5))
        model = random_stable_model(d, rng)
        rho = random_density_matrix(d, rng)
        lam_max = float(np.max(np.abs(coherence_decay_matrix(model))))
        for f in (0.1, 1.0, 10.0):
            t = f / lam_max
            err = max_norm(analytic_propagate(model, rho, t).matrix - propagate(model.to_generator(), rho, t).matrix)
            if err > worst:
                worst = err
                case = {"energies": model.energies, "jump_eigenvalues": model.jump_eigenvalues, "t": t,
                        "rho0": rho.matrix}
    ok = worst <= 1e-8
    return CheckResult("analytic_equals_superoperator", ok, {"max_error": worst, "tolerance": 1e-8},
                       None if ok else case)


def check_entropy_theorem(rng, n_generators: int = 20) -> CheckResult:
    worst_drop = 0.0
    case = None
    for _ in range(n_generators):
        d = int(rng.integers(2, 5))
        gen = random_generator(d, rng, diagonal_jumps=True)
        rho = random_density_matrix(d, rng)
        s_prev = von_neumann_entropy(rho)
        for _ in range(8):
            rho = propagate(gen, rho, float(rng.uniform(0.01, 0.3)))
            s = von_neumann_entropy(rho)
            if s_prev - s > worst_drop:
                worst_drop = s_prev - s
                case = {"hamiltonian": gen.hamiltonian, "jumps": list(gen.jumps)}
            s_prev = s
    raising = LindbladGenerator(np.zeros((2, 2)), (np.array([[0, 1], [0, 0]]),))
    cond_ok, residual = entropy_condition_check(raising)
    mixed = DensityMatrix.maximally_mixed(2)
    decrease = von_neumann_entropy(mixed) - von_neumann_entropy(propagate(raising, mixed, 1.0))
    ok = worst_drop <= 1e-9 and not cond_ok and decrease > 1e-3
    return CheckResult("entropy_theorem", ok, {
        "max_entropy_drop_unital": worst_drop,
        "raising_operator_residual": residual,
        "raising_operator_entropy_decrease": decrease,
    }, None if ok else case)


def check_complete_positivity(rng, n_generators: int = 10, fixtures=()) -> CheckResult:
    worst = math.inf
    failures = []
    for _ in range(n_generators):
        d = int(rng.integers(2, 4))
        gen = random_generator(d, rng)
        norm = np.linalg.norm(liouvillian_superoperator(gen), 2) + 1e-12
        t = float(rng.uniform(0, 10 / norm))
        ok, w = choi_psd_check(gen, t)
        worst = min(worst, w)
        if not ok:
            failures.append({"hamiltonian": gen.hamiltonian, "jumps": list(gen.jumps), "t": t})
    for fx in fixtures:
        gen, t, negate = fx["generator"], fx.get("t", 0.5), fx.get("negate_dissipator", False)
        target = negated_dissipator_superoperator(gen) if negate else gen
        ok, w = choi_psd_check(target, t)
        worst = min(worst, w)
        if not ok:
            failures.append({"hamiltonian": gen.hamiltonian, "jumps": list(gen.jumps), "t": t,
                             "negate_dissipator": negate, "min_choi_eigenvalue": w})
    return CheckResult("complete_positivity", not failures,
                       {"min_choi_eigenvalue": worst, "fixtures": len(fixtures)},
                       {"failures": failures} if failures else None)


def check_fringe_equivalence(rng, n_cases: int = 50) -> CheckResult:
    worst, case = 0.0, None
    tr = ClockTransition(0, 1)
    for _ in range(n_cases):
        T = float(rng.uniform(0.5, 5.0))
        omega = float(rng.uniform(50.0, 200.0))
        tau = float(rng.uniform(0.2, 3.0)) / omega
        dw = float(rng.uniform(-0.1, 0.1)) * omega
        gamma = float(rng.uniform(0.0, 3.0)) / T
        shift = float(rng.uniform(-2.0, 2.0)) / T
        params = FringeParams(gamma, shift, omega * tau)
        model = model_from_params(params, energies=tuple(rng.uniform(-5, 5, size=2)))
        cfg = RamseyConfig(tau, T, omega, dw)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pe = ramsey_sequence(model, tr, cfg).pe
        err = abs(pe - analytic_pe(params, dw, T))
        if err > worst:
            worst = err
            case = {"tau": tau, "T": T, "omega_rabi": omega, "delta_omega": dw, "gamma": gamma, "eshift": shift}
    ok = worst <= 1e-10
    return CheckResult("sequence_equals_closed_form", ok, {"max_error": worst, "tolerance": 1e-10},
                       None if ok else case)


def check_golden_shape() -> CheckResult:
    T = 1.0
    cfg = RamseyConfig(0.01, T, 0.5 * math.pi / 0.01)
    grid = np.linspace(-2 * math.pi / T, 2 * math.pi / T, 2001)
    m = shape_metrics(scan_fringe(FringeParams(1.0 / T), cfg, grid), T)
    ok = abs(m.min_max_ratio - 0.462) <= 0.005 and abs(m.slope_point_ratio - 0.731) <= 0.005
    return CheckResult("golden_shape_numbers", ok, {
        "min_max_ratio": m.min_max_ratio, "slope_point_ratio": m.slope_point_ratio,
        "expected": {"min_max_ratio": 0.46, "slope_point_ratio": 0.73},
    }, None if ok else {"gamma_T": 1.0})


def check_stability_theorem(rng, n_generators: int = 10) -> CheckResult:
    worst = 0.0
    for _ in range(n_generators):
        d = int(rng.integers(2, 5))
        energies = rng.normal(size=d)
        n_jumps = int(rng.integers(1, d * d))
        ell = rng.normal(size=(n_jumps, d)) + 1j * rng.normal(size=(n_jumps, d))
        gen = StableBasisModel(energies, ell).to_generator()
        extracted = stable_basis_model(gen)
        worst = max(worst, max_norm(coherence_decay_matrix(extracted) - coherence_decay_matrix(StableBasisModel(energies, ell))))
    ok = worst <= 1e-12
    return CheckResult("stability_theorem", ok, {"max_decay_matrix_error": worst}, None)


def check_closure() -> CheckResult:
    model = StableBasisModel(np.zeros(3), np.array([[1.0, 1j, 0.0]]))
    rep = three_level_closure(model, (0, 1, 2))
    ok = abs(rep.closure_sum - 1.0) <= 1e-12 and rep.energy_closure == 0.0
    return CheckResult("three_level_closure", ok, {"closure_sum": rep.closure_sum, "shifts": list(rep.shifts)})


def check_bounds() -> CheckResult:
    g = bounds.gamma_bound_ev(600.0)
    ptr = bounds.pointer_level_spacing(1e-3, 1e-2)
    opt = bounds.fractional_imprecision(1.0, bounds.rad_s_to_ev(1e15))
    ok = 1.0e-18 <= g <= 1.2e-18 and 1e-43 <= ptr <= 1e-41 and 0.1e-15 <= opt <= 10e-15
    return CheckResult("bound_arithmetic", ok, {"gamma_bound_600s_ev": g, "pointer_spacing_ev": ptr,
                                               "optical_fractional_imprecision": opt})


def check_fit_round_trip(rng, n_cases: int = 10) -> CheckResult:
    worst = 0.0
    T = 1.0
    cfg = RamseyConfig(0.01, T, 0.5 * math.pi / 0.01)
    grid = np.linspace(-2 * math.pi, 2 * math.pi, 201)
    for _ in range(n_cases):
        params = FringeParams(float(rng.uniform(0.01, 3.0)), float(rng.uniform(-1.0, 1.0)), 0.5 * math.pi)
        fit = fit_fringe(scan_fringe(params, cfg, grid), T)
        worst = max(worst, abs(fit.gamma - params.gamma) / params.gamma,
                    abs(fit.eshift - params.eshift) / max(abs(params.eshift), 1.0 / T))
    ok = worst <= 1e-8
    return CheckResult("fit_round_trip", ok, {"max_relative_error": worst})


def run_all(seed: int = 0, fixtures=()) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        check_analytic_vs_superoperator(rng),
        check_entropy_theorem(rng),
        check_complete_positivity(rng, fixtures=fixtures),
        check_fringe_equivalence(rng),
        check_golden_shape(),
        check_stability_theorem(rng),
        check_closure(),
        check_bounds(),
        check_fit_round_trip(rng),
    ]

"""Fringe scans, shape diagnostics, (gamma, eshift) estimation and the
three-level closure test."""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import StableBasisModel, coherence_decay_matrix
from .errors import GridTooCoarseError, InputError, NumericalFailure, PreconditionError
from .ramsey import (
    ClockTransition,
    FringeParams,
    RamseyConfig,
    analytic_pe,
    params_from_model,
    ramsey_sequence,
)

MIN_POINTS_PER_PERIOD = 25
GAMMA_BOX = 5.0  # grid search covers gamma * T in [0, GAMMA_BOX]


@dataclass(frozen=True)
class FringeScan:
    """``pe`` sampled at offsets ``omegas = omega - (E_e - E_g)`` (rad/s)."""

    omegas: np.ndarray
    pe: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float).ravel()
        p = np.asarray(self.pe, dtype=float).ravel()
        if w.size == 0 or w.size != p.size:
            raise InputError("omegas and pe must be non-empty and of equal length")
        if np.any(np.diff(w) <= 0):
            raise InputError("omegas must be strictly increasing")
        if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise InputError("pe values must lie in [0, 1]")
        w.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "pe", p)


def _pe_point(args):
    source, transition, cfg = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ramsey_sequence(source, transition, cfg).pe


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("CLOCK_NUM_WORKERS", "1")))
    except ValueError:
        return 1


def scan_fringe(source, cfg: RamseyConfig, grid, transition: ClockTransition | None = None,
                noise: dict | None = None, workers: int | None = None) -> FringeScan:
    """Evaluate P_e over the detuning ``grid`` (rad/s).

    ``source`` is :class:`FringeParams` (closed form) or a
    :class:`StableBasisModel` (full pulse / Lindblad / pulse sequence at every
    point; requires ``transition``). ``noise = {"seed": int, "sigma": float}``
    adds i.i.d. Gaussian noise clipped to [0, 1].
    """
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise PreconditionError("grid must be non-empty and strictly increasing")
    if isinstance(source, FringeParams):
        pe = analytic_pe(source, grid, cfg.T)
        pe = np.atleast_1d(pe)
        meta = {"source": "params", "gamma": source.gamma, "eshift": source.eshift,
                "omega_rabi_tau": source.omega_rabi_tau}
    elif isinstance(source, StableBasisModel):
        if transition is None:
            raise InputError("a model source needs a ClockTransition")
        cfgs = [RamseyConfig(cfg.tau, cfg.T, cfg.omega_rabi, float(dw), cfg.pulse1_start, cfg.pulse2_start)
                for dw in grid]
        jobs = [(source, transition, c) for c in cfgs]
        workers = default_workers() if workers is None else workers
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                pe = np.array(list(pool.map(_pe_point, jobs, chunksize=max(1, len(jobs) // (4 * workers)))))
        else:
            pe = np.array([_pe_point(j) for j in jobs])
        meta = {"source": "model", "g_index": transition.g_index, "e_index": transition.e_index}
    else:
        raise InputError(f"unsupported scan source {type(source).__name__}")
    pe = np.clip(pe, 0.0, 1.0)
    meta.update({"tau": cfg.tau, "T": cfg.T, "omega_rabi": cfg.omega_rabi, "measured": False})
    if noise:
        sigma = float(noise.get("sigma", 0.0))
        if sigma < 0:
            raise InputError("noise sigma must be >= 0")
        rng = np.random.default_rng(int(noise.get("seed", 0)))
        pe = np.clip(pe + rng.normal(0.0, sigma, size=pe.size), 0.0, 1.0)
        meta.update({"measured": True, "noise_seed": int(noise.get("seed", 0)), "noise_sigma": sigma})
    return FringeScan(grid, pe, meta)


@dataclass(frozen=True)
class ShapeMetrics:
    peak_omega: float
    peak_value: float
    min_value: float
    min_max_ratio: float
    slope_omega: float
    slope_point_ratio: float
    contrast: float


def _vertex(x: np.ndarray, y: np.ndarray, i: int) -> tuple[float, float]:
    """Vertex of the parabola through samples i-1, i, i+1 (uniform spacing assumed locally)."""
    if i <= 0 or i >= len(y) - 1:
        return float(x[i]), float(y[i])
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return float(x[i]), float(y1)
    off = 0.5 * (y0 - y2) / denom
    off = min(max(off, -1.0), 1.0)
    h = 0.5 * (x[i + 1] - x[i - 1])
    return float(x[i] + off * h), float(y1 - 0.25 * (y0 - y2) * off)


def _quad_value(x: np.ndarray, y: np.ndarray, i: int, at: float) -> float:
    i = min(max(i, 1), len(y) - 2)
    return float(np.polyval(np.polyfit(x[i - 1:i + 2] - x[i], y[i - 1:i + 2], 2), at - x[i]))


def _check_grid(omegas: np.ndarray, T: float) -> None:
    if T <= 0:
        raise PreconditionError("T must be positive")
    period = 2 * math.pi / T
    span = omegas[-1] - omegas[0]
    spacing = float(np.max(np.diff(omegas))) if omegas.size > 1 else math.inf
    per_period = period / spacing
    if span < period or per_period < MIN_POINTS_PER_PERIOD:
        needed = int(math.ceil(max(span, period) / period * MIN_POINTS_PER_PERIOD)) + 1
        raise GridTooCoarseError(
            f"scan must span one fringe period ({period:.4g} rad/s) with >= {MIN_POINTS_PER_PERIOD} "
            f"points per period; got span {span:.4g} and {per_period:.1f} points per period",
            required_points=needed)


def _nearest_extremum(x: np.ndarray, y: np.ndarray, target: float) -> int:
    """Index of the interior local maximum of ``y`` closest to ``target`` among
    those within 1e-6 of the global maximum (fringes repeat every period)."""
    top = float(np.max(y))
    tol = 1e-6 * max(top - float(np.min(y)), 1e-12)
    interior = np.arange(1, len(y) - 1)
    local = interior[(y[interior] >= y[interior - 1]) & (y[interior] >= y[interior + 1])
                     & (y[interior] >= top - tol)]
    if local.size == 0:
        return int(np.argmax(y))
    return int(local[np.argmin(np.abs(x[local] - target))])


def shape_metrics(scan: FringeScan, T: float) -> ShapeMetrics:
    """Peak position, min/max ratio, and the P_e ratio at the steepest point.

    Fringes repeat with period 2 pi / T, so the central fringe (the maximum
    nearest the middle of the scan) is used, together with the minimum and the
    steepest point closest to it.
    """
    x, y = scan.omegas, scan.pe
    _check_grid(x, T)
    center = 0.5 * (x[0] + x[-1])
    i_max = _nearest_extremum(x, y, center)
    peak_w, peak_v = _vertex(x, y, i_max)
    i_min = _nearest_extremum(x, -y, peak_w)
    _, min_v = _vertex(x, -y, i_min)
    min_v = max(-min_v, 0.0) + 0.0

    slope = np.abs(np.gradient(y, x))
    i_s = _nearest_extremum(x, slope, peak_w)
    slope_w, _ = _vertex(x, slope, i_s)
    slope_v = _quad_value(x, y, i_s, slope_w)

    if peak_v <= 0:
        raise NumericalFailure("flat zero scan has no shape")
    ratio = min(max(min_v / peak_v, 0.0), 1.0) + 0.0
    return ShapeMetrics(
        peak_omega=peak_w,
        peak_value=peak_v,
        min_value=min_v,
        min_max_ratio=ratio,
        slope_omega=slope_w,
        slope_point_ratio=slope_v / peak_v,
        contrast=(peak_v - min_v) / (peak_v + min_v),
    )


# ---------------------------------------------------------------------------
# Estimation

def fringe_model(omegas, amplitude: float, gamma: float, eshift: float, T: float) -> np.ndarray:
    """A [1 + exp(-gamma T) cos((omega - eshift) T)]."""
    return amplitude * (1.0 + math.exp(-gamma * T) * np.cos((np.asarray(omegas) - eshift) * T))


def fringe_jacobian(omegas, amplitude: float, gamma: float, eshift: float, T: float) -> np.ndarray:
    """Columns d/dA, d/dgamma, d/deshift of :func:`fringe_model`."""
    x = (np.asarray(omegas) - eshift) * T
    c = math.exp(-gamma * T)
    return np.column_stack([
        1.0 + c * np.cos(x),
        -amplitude * T * c * np.cos(x),
        amplitude * T * c * np.sin(x),
    ])


def jacobian_fd_error(omegas, p: np.ndarray, T: float) -> float:
    """Max relative deviation of the analytic Jacobian from central differences."""
    jac = fringe_jacobian(omegas, *p, T)
    fd = np.empty_like(jac)
    for k in range(3):
        h = 1e-6 * max(abs(p[k]), 1.0 / T if k else 1.0)
        hi, lo = p.copy(), p.copy()
        hi[k] += h
        lo[k] -= h
        fd[:, k] = (fringe_model(omegas, *hi, T) - fringe_model(omegas, *lo, T)) / (2 * h)
    scale = np.maximum(np.max(np.abs(jac), axis=0), 1e-300)
    return float(np.max(np.abs(jac - fd) / scale))


@dataclass(frozen=True)
class FitResult:
    gamma: float
    eshift: float
    amplitude: float
    gamma_se: float
    eshift_se: float
    amplitude_se: float
    residual_rms: float
    converged: bool
    iterations: int
    gamma_lower_bound_only: bool = False
    jacobian_fd_error: float = float("nan")
    message: str = ""


def _wrap_shift(eshift: float, T: float) -> float:
    period = 2 * math.pi / T
    return (eshift + 0.5 * period) % period - 0.5 * period


def _grid_start(x: np.ndarray, y: np.ndarray, T: float) -> np.ndarray:
    gammas = np.linspace(0.0, GAMMA_BOX / T, 51)
    shifts = np.linspace(-math.pi / T, math.pi / T, 72, endpoint=False)
    best, best_p = math.inf, None
    for s in shifts:
        cosx = np.cos((x - s) * T)
        for g in gammas:
            b = 1.0 + math.exp(-g * T) * cosx
            bb = b @ b
            if bb == 0:
                continue
            a = (b @ y) / bb
            ssr = float(np.sum((y - a * b) ** 2))
            if ssr < best:
                best, best_p = ssr, np.array([a, g, s])
    return best_p


def fit_fringe(scan: FringeScan, T: float, init=None, max_iter: int = 100,
               noise_floor: float | None = None) -> FitResult:
    """Least-squares fit of ``A [1 + exp(-gamma T) cos((omega - eshift) T)]``.

    A coarse grid over (gamma, eshift) with A solved linearly seeds a damped
    Gauss-Newton iteration; gamma is kept >= 0 by projection and eshift is
    reported modulo one fringe period. Standard errors come from the
    Gauss-Newton normal matrix at the optimum.
    """
    x, y = scan.omegas, scan.pe
    _check_grid(x, T)
    n = x.size
    p = np.asarray(init, dtype=float).copy() if init is not None else _grid_start(x, y, T)
    if p.shape != (3,):
        raise InputError("init must be (amplitude, gamma, eshift)")
    p[1] = max(p[1], 0.0)

    def ssr_of(q):
        r = fringe_model(x, *q, T) - y
        return float(r @ r), r

    ssr, r = ssr_of(p)
    mu = 1e-3
    converged = False
    it = 0
    scale = np.array([1.0, 1.0 / T, 1.0 / T])
    for it in range(1, max_iter + 1):
        jac = fringe_jacobian(x, *p, T)
        jtj = jac.T @ jac
        g = jac.T @ r
        accepted = False
        while mu < 1e12:
            a = jtj + mu * np.diag(np.diag(jtj) + 1e-30)
            step = -np.linalg.solve(a, g)
            q = p + step
            q[1] = max(q[1], 0.0)
            new_ssr, new_r = ssr_of(q)
            if new_ssr <= ssr:
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            converged = True  # no descent direction left: stationary to working precision
            break
        rel = np.max(np.abs(q - p) / np.maximum(np.abs(p), scale))
        p, ssr, r = q, new_ssr, new_r
        mu = max(mu / 10.0, 1e-12)
        if rel < 1e-10 or ssr == 0.0:
            converged = True
            break

    jac = fringe_jacobian(x, *p, T)
    dof = max(n - 3, 1)
    s2 = ssr / dof
    try:
        cov = s2 * np.linalg.inv(jac.T @ jac)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        se = np.full(3, np.inf)
    rms = math.sqrt(ssr / n)
    floor = rms if noise_floor is None else max(noise_floor, rms)
    fringe_amp = p[0] * math.exp(-p[1] * T)
    flat = fringe_amp <= 3.0 * floor or p[1] * T > GAMMA_BOX
    msg = "converged" if converged else f"no convergence after {max_iter} iterations"
    if flat:
        msg += "; fringe contrast below the noise floor, gamma is a lower bound only"
    return FitResult(
        gamma=float(p[1]),
        eshift=_wrap_shift(float(p[2]), T),
        amplitude=float(p[0]),
        gamma_se=float(se[1]),
        eshift_se=float(se[2]),
        amplitude_se=float(se[0]),
        residual_rms=rms,
        converged=converged,
        iterations=it,
        gamma_lower_bound_only=bool(flat),
        jacobian_fd_error=jacobian_fd_error(x, p, T),
        message=msg,
    )


# ---------------------------------------------------------------------------
# Model-derived quantities

def gamma_params_from_model(model: StableBasisModel, g: int, e: int,
                            omega_rabi_tau: float = math.pi / 2) -> FringeParams:
    """(gamma, eshift) of the g-e coherence, cross-checked against the decay matrix:
    ``gamma - i eshift`` must equal ``lambda[e, g]``."""
    params = params_from_model(model, ClockTransition(g, e), omega_rabi_tau)
    lam = coherence_decay_matrix(model)[e, g]
    scale = max(1.0, float(np.sum(np.abs(model.jump_eigenvalues) ** 2)))
    if abs(lam - complex(params.gamma, -params.eshift)) > 1e-12 * scale:
        raise NumericalFailure("gamma/eshift disagree with the coherence decay matrix")
    return params


@dataclass(frozen=True)
class ClosureReport:
    levels: tuple
    shifts: tuple        # (E_ij, E_jk, E_ki) in rad/s
    closure_sum: float
    energy_closure: float = 0.0


def pair_shift(model: StableBasisModel, i: int, j: int) -> float:
    ell = model.jump_eigenvalues
    a, b = ell[:, i], ell[:, j]
    # Im(a conj(b)) written out so that a == b gives exactly zero
    return -float(np.sum(a.imag * b.real - a.real * b.imag)) + 0.0


def three_level_closure(model: StableBasisModel, levels=(0, 1, 2)) -> ClosureReport:
    """Sum of the Lindblad frequency shifts around the cycle i -> j -> k -> i.

    Energy differences cancel around any cycle identically; the shifts need not.
    """
    i, j, k = (int(v) for v in levels)
    if len({i, j, k}) != 3 or not all(0 <= v < model.dim for v in (i, j, k)):
        raise PreconditionError(f"levels must be three distinct indices below {model.dim}")
    shifts = (pair_shift(model, i, j), pair_shift(model, j, k), pair_shift(model, k, i))
    return ClosureReport((i, j, k), shifts, float(sum(shifts)), 0.0)


def _mc_trial(args):
    params, cfg, grid, sigma, seed = args
    scan = scan_fringe(params, cfg, grid, noise={"seed": seed, "sigma": sigma})
    return fit_fringe(scan, cfg.T)


def monte_carlo_fit(params: FringeParams, cfg: RamseyConfig, grid, sigma: float, seeds,
                    workers: int | None = None) -> list[FitResult]:
    """Fit one noisy closed-form scan per seed; trials run in parallel over seeds."""
    jobs = [(params, cfg, np.asarray(grid, dtype=float), float(sigma), int(s)) for s in seeds]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_mc_trial, jobs))
    return [_mc_trial(j) for j in jobs]

"""Two-pulse Ramsey sequence for a clock transition between two stable states.

Pulses use the rotating-wave unitary on the {g, e} subspace; the dark period is
free Lindblad evolution. Density matrices are handled in the interaction
picture ``rho^I_mn(t) = exp(i (E_m - E_n) t) rho_mn(t)``.

Phase convention: the drive's phase is continuous from the first pulse to the
second, and inside a pulse the detuning only enters through the frame phases at
the pulse edges (``|delta_omega| << omega_rabi``). With these conventions the
state after the first pulse and the final excitation probability reproduce the
closed-form fringe exactly; the peak sits at ``delta_omega = eshift``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    LindbladGenerator,
    StableBasisModel,
    coherence_decay_matrix,
    propagate,
    propagator,
    unvec,
    vec,
)
from .errors import InputError, PreconditionError, UnderResolvedError
from .numerics import DensityMatrix, dag, hermitian_eigendecomposition, max_norm

UNITARY_TOL = 1e-12
REGIME_FACTOR = 10.0
MIN_STEPS_PER_PERIOD = 40


class RegimeWarning(UserWarning):
    """A Ramsey configuration sits outside the regime where the pulse model holds."""


@dataclass(frozen=True)
class ClockTransition:
    g_index: int = 0
    e_index: int = 1

    def validate(self, dim: int) -> None:
        if self.g_index == self.e_index:
            raise InputError("g_index and e_index must differ")
        for name, idx in (("g_index", self.g_index), ("e_index", self.e_index)):
            if not 0 <= idx < dim:
                raise InputError(f"{name}={idx} out of range for dim {dim}")

    def reference_frequency(self, model: StableBasisModel) -> float:
        return float(model.energies[self.e_index] - model.energies[self.g_index])


@dataclass(frozen=True)
class RamseyConfig:
    """Pulse duration ``tau`` and dark time ``T`` in s; ``omega_rabi`` and
    ``delta_omega = omega - (E_e - E_g)`` in rad/s."""

    tau: float
    T: float
    omega_rabi: float
    delta_omega: float = 0.0
    pulse1_start: float = 0.0
    pulse2_start: float | None = None

    def __post_init__(self):
        for name in ("tau", "T", "omega_rabi"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be positive and finite, got {v}")
        if not math.isfinite(self.delta_omega):
            raise InputError("delta_omega must be finite")
        if self.pulse2_start is None:
            object.__setattr__(self, "pulse2_start", self.pulse1_start + self.tau + self.T)
        elif self.pulse2_start < self.pulse1_start + self.tau:
            raise InputError("second pulse starts before the first one ends")

    @property
    def omega_rabi_tau(self) -> float:
        return self.omega_rabi * self.tau

    @property
    def dark_time(self) -> float:
        return self.pulse2_start - self.pulse1_start - self.tau

    @property
    def end_time(self) -> float:
        return self.pulse2_start + self.tau

    def validity(self, max_decay_rate: float = 0.0, carrier_omega: float | None = None) -> dict:
        """Regime flags (computed, never enforced); ``<<`` is read as a factor of 10."""
        flags = {
            "short_pulse": self.tau * max_decay_rate * REGIME_FACTOR <= 1.0,
            "small_detuning": abs(self.delta_omega) * REGIME_FACTOR <= self.omega_rabi,
        }
        if carrier_omega is not None:
            flags["fast_carrier"] = self.tau * abs(carrier_omega) >= REGIME_FACTOR
        return flags


@dataclass(frozen=True)
class FringeParams:
    """Decay rate ``gamma`` and frequency shift ``eshift`` of the clock coherence
    (rad/s) plus the pulse area ``omega_rabi_tau`` (rad)."""

    gamma: float
    eshift: float = 0.0
    omega_rabi_tau: float = math.pi / 2

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise InputError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not math.isfinite(self.eshift) or not math.isfinite(self.omega_rabi_tau):
            raise InputError("eshift and omega_rabi_tau must be finite")

    @property
    def lambda_eg(self) -> complex:
        """Decay rate of rho_eg; rho_ge decays with the complex conjugate."""
        return complex(self.gamma, -self.eshift)


def model_from_params(params: FringeParams, energies=(0.0, 0.0)) -> StableBasisModel:
    """A two-level model (g = 0, e = 1) whose clock coherence has the given rates.

    One jump operator with eigenvalues ``(c, c + i v)`` gives gamma = v^2/2 and
    eshift = c v. A non-zero shift requires gamma > 0.
    """
    if params.gamma == 0:
        if params.eshift != 0:
            raise InputError("a frequency shift needs a non-zero decay rate")
        return StableBasisModel(np.asarray(energies, dtype=float), np.zeros((0, 2)))
    v = math.sqrt(2.0 * params.gamma)
    c = params.eshift / v
    if not math.isfinite(c) or abs(c) > 1e100:
        raise InputError("eshift / sqrt(gamma) is too large to represent as a jump operator")
    return StableBasisModel(np.asarray(energies, dtype=float), np.array([[c, c + 1j * v]]))


def params_from_model(model: StableBasisModel, transition: ClockTransition,
                      omega_rabi_tau: float = math.pi / 2) -> FringeParams:
    """gamma = 1/2 sum_a |l_ag - l_ae|^2 and eshift = -sum_a Im(l_ag conj(l_ae))."""
    transition.validate(model.dim)
    lg = model.jump_eigenvalues[:, transition.g_index]
    le = model.jump_eigenvalues[:, transition.e_index]
    gamma = 0.5 * float(np.sum(np.abs(lg - le) ** 2))
    eshift = -float(np.sum(lg.imag * le.real - lg.real * le.imag)) + 0.0
    return FringeParams(gamma, eshift, omega_rabi_tau)


def to_interaction_picture(rho, energies, t: float) -> DensityMatrix:
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)
    e = np.asarray(energies, dtype=float)
    return DensityMatrix(r * np.exp(1j * (e[:, None] - e[None, :]) * t))


def from_interaction_picture(rho_i, energies, t: float) -> DensityMatrix:
    return to_interaction_picture(rho_i, energies, -t)


def pulse_unitary(cfg: RamseyConfig, t_start: float, literal: bool = False) -> np.ndarray:
    """2x2 pulse propagator on (g, e), in that order.

    ``literal=True`` gives the textbook form with ``U_gg = U_ee = cos`` and the
    drive phase frozen at ``t_start``. The default also carries the detuning
    phase accumulated across the pulse (``U_ee`` picks up ``exp(i dw tau)``,
    ``U_eg`` uses the phase at the pulse end); the two agree when
    ``dw * tau -> 0``.
    """
    half = 0.5 * cfg.omega_rabi_tau
    c, s = math.cos(half), math.sin(half)
    dw = cfg.delta_omega
    if literal:
        return np.array([[c, -1j * s * np.exp(-1j * dw * t_start)],
                         [-1j * s * np.exp(1j * dw * t_start), c]])
    t_end = t_start + cfg.tau
    return np.array([[c, -1j * s * np.exp(-1j * dw * t_start)],
                     [-1j * s * np.exp(1j * dw * t_end), c * np.exp(1j * dw * cfg.tau)]])


def embed(u2: np.ndarray, dim: int, transition: ClockTransition) -> np.ndarray:
    """Place a (g, e) block into a d x d identity."""
    transition.validate(dim)
    u = np.eye(dim, dtype=np.complex128)
    idx = [transition.g_index, transition.e_index]
    u[np.ix_(idx, idx)] = u2
    return u


def apply_pulse(rho_i: DensityMatrix, u: np.ndarray) -> DensityMatrix:
    u = np.asarray(u, dtype=np.complex128)
    err = max_norm(dag(u) @ u - np.eye(u.shape[0]))
    if err > UNITARY_TOL:
        raise InputError(f"pulse propagator is not unitary (max |U^H U - 1| = {err:.3e})")
    return DensityMatrix(u @ rho_i.matrix @ dag(u))


def free_evolution(rho_i: DensityMatrix, source, T: float, t0: float = 0.0,
                   transition: ClockTransition | None = None) -> DensityMatrix:
    """Field-free evolution of an interaction-picture state for a time ``T``.

    ``source`` is either :class:`FringeParams` (two-level, g = 0, e = 1: the
    clock coherence is multiplied by ``exp(-lambda_eg T)``) or a
    :class:`StableBasisModel`, which is propagated numerically with the full
    Lindblad superoperator in the Schroedinger picture starting at ``t0``.
    """
    if T < 0:
        raise PreconditionError(f"T must be >= 0, got {T}")
    if T == 0:
        return rho_i
    if isinstance(source, FringeParams):
        if rho_i.dim != 2 or (transition is not None and (transition.g_index, transition.e_index) != (0, 1)):
            raise InputError("FringeParams evolution is defined on the (g, e) = (0, 1) qubit")
        r = np.array(rho_i.matrix)
        lam = source.lambda_eg
        r[1, 0] *= np.exp(-lam * T)
        r[0, 1] *= np.exp(-np.conj(lam) * T)
        return DensityMatrix(r)
    if isinstance(source, StableBasisModel):
        e = source.energies
        rho_s = from_interaction_picture(rho_i, e, t0)
        rho_s = propagate(source.to_generator(), rho_s, T)
        return to_interaction_picture(rho_s, e, t0 + T)
    raise InputError(f"unsupported free-evolution source {type(source).__name__}")


@dataclass(frozen=True)
class RamseyResult:
    rho_final: DensityMatrix
    pe: float
    snapshots: tuple = field(default=(), repr=False)  # (label, time, DensityMatrix) in the interaction picture
    validity: dict = field(default_factory=dict)


def ramsey_sequence(source, transition: ClockTransition, cfg: RamseyConfig,
                    dark_samples: int = 0, carrier_omega: float | None = None) -> RamseyResult:
    """pulse at ``pulse1_start`` -> free evolution -> pulse at ``pulse2_start``.

    The atom starts in the pure ground state. ``dark_samples`` extra snapshots
    are recorded at evenly spaced times inside the dark period.
    """
    if isinstance(source, FringeParams):
        if not math.isclose(source.omega_rabi_tau, cfg.omega_rabi_tau, rel_tol=1e-12, abs_tol=1e-15):
            raise InputError("FringeParams.omega_rabi_tau disagrees with the Ramsey configuration")
        dim = 2
        transition = ClockTransition(0, 1) if transition is None else transition
        max_rate = abs(source.lambda_eg)
    elif isinstance(source, StableBasisModel):
        dim = source.dim
        lam = coherence_decay_matrix(source)
        max_rate = float(np.max(np.abs(lam))) if lam.size else 0.0
    else:
        raise InputError(f"unsupported source {type(source).__name__}")
    transition.validate(dim)

    validity = cfg.validity(max_rate, carrier_omega)
    bad = [k for k, ok in validity.items() if not ok]
    if bad:
        warnings.warn(f"Ramsey configuration outside the pulse-model regime: {', '.join(bad)}",
                      RegimeWarning, stacklevel=2)

    rho = DensityMatrix.basis(dim, transition.g_index)
    snaps = [("start", cfg.pulse1_start, rho)]
    rho = apply_pulse(rho, embed(pulse_unitary(cfg, cfg.pulse1_start), dim, transition))
    t1 = cfg.pulse1_start + cfg.tau
    snaps.append(("after_pulse1", t1, rho))

    dark = cfg.dark_time
    if dark_samples > 0:
        step = dark / (dark_samples + 1)
        t = t1
        for k in range(dark_samples):
            rho = free_evolution(rho, source, step, t0=t, transition=transition)
            t += step
            snaps.append((f"dark_{k + 1}", t, rho))
        rho = free_evolution(rho, source, cfg.pulse2_start - t, t0=t, transition=transition)
    else:
        rho = free_evolution(rho, source, dark, t0=t1, transition=transition)
    snaps.append(("before_pulse2", cfg.pulse2_start, rho))

    rho = apply_pulse(rho, embed(pulse_unitary(cfg, cfg.pulse2_start), dim, transition))
    snaps.append(("final", cfg.end_time, rho))
    pe = float(rho.matrix[transition.e_index, transition.e_index].real)
    return RamseyResult(rho, pe, tuple(snaps), validity)


def analytic_pe(params: FringeParams, delta_omega, T: float):
    """P_e = 1/2 sin^2(Omega tau) [1 + exp(-gamma T) cos((delta_omega - eshift) T)].

    ``delta_omega`` may be a scalar or an array of offsets ``omega - (E_e - E_g)``.
    """
    if T < 0:
        raise PreconditionError(f"T must be >= 0, got {T}")
    amp = 0.5 * math.sin(params.omega_rabi_tau) ** 2
    x = np.asarray(delta_omega, dtype=float)
    pe = amp * (1.0 + math.exp(-params.gamma * T) * np.cos((x - params.eshift) * T))
    return float(pe) if pe.ndim == 0 else pe


@dataclass(frozen=True)
class DrivenResult:
    pe: float
    rho_interaction: np.ndarray  # raw RK4 output; positivity holds only to integration accuracy
    min_eigenvalue: float
    steps: int


def ramsey_schedule(cfg: RamseyConfig) -> tuple:
    return ((cfg.pulse1_start, cfg.pulse1_start + cfg.tau), (cfg.pulse2_start, cfg.pulse2_start + cfg.tau))


def default_coupling(dim: int, transition: ClockTransition, omega_rabi: float) -> np.ndarray:
    """Real dipole-type coupling: H'_eg = H'_ge = omega_rabi / 2."""
    h = np.zeros((dim, dim), dtype=np.complex128)
    h[transition.e_index, transition.g_index] = h[transition.g_index, transition.e_index] = 0.5 * omega_rabi
    return h


def exact_driven_oracle(model: StableBasisModel, transition: ClockTransition, drive_omega: float,
                        coupling: np.ndarray, schedule, t_end: float | None = None,
                        steps_per_period: int = MIN_STEPS_PER_PERIOD) -> DrivenResult:
    """Integrate the Lindblad equation with the full oscillating drive, no RWA.

    While a window of ``schedule`` is on, the Hamiltonian is
    ``diag(E) + H' exp(-i w t) + H'^H exp(i w t)``. The integration runs in the
    interaction picture of ``diag(E)`` (an exact change of frame that keeps the
    counter-rotating terms) with fixed-step RK4, ``steps_per_period`` steps per
    drive period ``2 pi / w``. Dark intervals use the exact Lindblad propagator.

    Note on signs: a physical drive ``exp(-i w t)`` on ``|e><g|`` produces
    interaction-picture phases ``exp(-i dw t)``, the mirror image of the pulse
    convention in :func:`pulse_unitary`. The driven fringe therefore peaks at
    ``dw = -eshift``: P_e here matches the pulse model evaluated at ``-dw``
    (equivalently, with ``eshift`` negated).
    """
    transition.validate(model.dim)
    d = model.dim
    hp = np.asarray(coupling, dtype=np.complex128)
    if hp.shape != (d, d):
        raise InputError(f"coupling must be {d}x{d}")
    if drive_omega <= 0:
        raise InputError("drive_omega must be positive")
    if steps_per_period < MIN_STEPS_PER_PERIOD:
        raise UnderResolvedError(
            f"{steps_per_period} steps per drive period is too coarse; need >= {MIN_STEPS_PER_PERIOD}",
            required_steps=MIN_STEPS_PER_PERIOD)
    windows = sorted((float(a), float(b)) for a, b in schedule)
    for (a, b), nxt in zip(windows, windows[1:] + [(math.inf, math.inf)]):
        if b < a or b > nxt[0] or a < 0:
            raise InputError("schedule windows must be ordered, non-overlapping and start at t >= 0")
    t_end = windows[-1][1] if t_end is None and windows else (0.0 if t_end is None else t_end)

    e = model.energies
    de = e[:, None] - e[None, :]
    dissipative = LindbladGenerator(np.zeros((d, d), dtype=np.complex128),
                                    tuple(np.diag(row) for row in model.jump_eigenvalues))
    jumps = [(np.diag(row), np.diag(np.abs(row) ** 2)) for row in model.jump_eigenvalues]
    hp_dag = dag(hp)

    def rhs(rho, h):
        out = -1j * (h @ rho - rho @ h)
        for L, LdL in jumps:
            out += L @ rho @ L.conj() - 0.5 * (LdL @ rho + rho @ LdL)
        return out

    rho = DensityMatrix.basis(d, transition.g_index).matrix.copy()
    t = 0.0
    total = 0
    for a, b in windows:
        if a > t:
            rho = unvec(propagator(dissipative, a - t) @ vec(rho), d)
        n = max(1, int(math.ceil((b - a) * drive_omega * steps_per_period / (2 * math.pi))))
        h = (b - a) / n
        ts = a + h * np.arange(2 * n + 1) / 2.0
        ham = (np.exp(1j * de[None] * ts[:, None, None])
               * (hp[None] * np.exp(-1j * drive_omega * ts)[:, None, None]
                  + hp_dag[None] * np.exp(1j * drive_omega * ts)[:, None, None]))
        for k in range(n):
            h0, hm, h1 = ham[2 * k], ham[2 * k + 1], ham[2 * k + 2]
            k1 = rhs(rho, h0)
            k2 = rhs(rho + 0.5 * h * k1, hm)
            k3 = rhs(rho + 0.5 * h * k2, hm)
            k4 = rhs(rho + h * k3, h1)
            rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        total += n
        t = b
    if t_end > t:
        rho = unvec(propagator(dissipative, t_end - t) @ vec(rho), d)
    rho = 0.5 * (rho + dag(rho))
    w, _ = hermitian_eigendecomposition(rho)
    pe = float(rho[transition.e_index, transition.e_index].real)
    return DrivenResult(pe, rho, float(w[0]), total)

"""Lindblad generators, propagation, and structural checks.

Superoperators act on column-stacked density matrices: ``vec(rho)`` stacks the
columns of ``rho`` so that ``vec(A X B) = (B^T kron A) vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalFailure, PreconditionError
from .numerics import (
    HERMITIAN_TOL,
    DensityMatrix,
    as_matrix,
    commutator,
    dag,
    hermitian_eigendecomposition,
    matrix_exponential,
    max_norm,
    random_hermitian,
)

STRUCTURAL_TOL = 1e-10
CHOI_TOL = 1e-8
TRACE_TOL = 1e-10


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    dim = int(round(np.sqrt(v.size))) if dim is None else dim
    return v.reshape((dim, dim), order="F")


@dataclass(frozen=True)
class LindbladGenerator:
    """Hamiltonian ``H`` (rad/s) plus jump operators ``L_a`` ((rad/s)^(1/2))."""

    hamiltonian: np.ndarray
    jumps: tuple = ()

    def __post_init__(self):
        h = as_matrix(self.hamiltonian, "hamiltonian")
        d = h.shape[0]
        asym = max_norm(h - dag(h))
        if asym > 1e-12 * max(1.0, max_norm(h)):
            raise InputError(f"hamiltonian is not Hermitian (max asymmetry {asym:.3e})")
        jumps = []
        for i, j in enumerate(self.jumps):
            j = as_matrix(j, f"jumps[{i}]")
            if j.shape != (d, d):
                raise InputError(f"jumps[{i}] has shape {j.shape}, expected {(d, d)}")
            j.setflags(write=False)
            jumps.append(j)
        if len(jumps) > d * d - 1:
            raise InputError(f"{len(jumps)} jump operators exceed d^2 - 1 = {d * d - 1}")
        h.setflags(write=False)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jumps", tuple(jumps))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        """Right-hand side of the Lindblad equation, evaluated with matrix products."""
        out = -1j * commutator(self.hamiltonian, rho)
        for L in self.jumps:
            LdL = dag(L) @ L
            out = out + L @ rho @ dag(L) - 0.5 * (LdL @ rho + rho @ LdL)
        return out


@dataclass(frozen=True)
class StableBasisModel:
    """Level energies ``E_m`` (rad/s) and jump eigenvalues ``ell[a, m]`` ((rad/s)^(1/2))
    for a basis of states that are joint eigenstates of ``H`` and every ``L_a``."""

    energies: np.ndarray
    jump_eigenvalues: np.ndarray = field(default=None)

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).ravel()
        if e.size == 0 or not np.all(np.isfinite(e)):
            raise InputError("energies must be a non-empty finite vector")
        ell = self.jump_eigenvalues
        ell = np.zeros((0, e.size), dtype=np.complex128) if ell is None else np.asarray(ell, dtype=np.complex128)
        if ell.ndim == 1:
            ell = ell[None, :]
        if ell.ndim != 2 or ell.shape[1] != e.size:
            raise InputError(f"jump_eigenvalues must have shape (n_jumps, {e.size}), got {ell.shape}")
        if not np.all(np.isfinite(ell)):
            raise InputError("jump_eigenvalues has non-finite entries")
        if ell.shape[0] > e.size**2 - 1:
            raise InputError(f"{ell.shape[0]} jump operators exceed d^2 - 1")
        e.setflags(write=False)
        ell.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "jump_eigenvalues", ell)

    @property
    def dim(self) -> int:
        return self.energies.size

    def to_generator(self) -> LindbladGenerator:
        return LindbladGenerator(np.diag(self.energies).astype(np.complex128),
                                 tuple(np.diag(row) for row in self.jump_eigenvalues))


def liouvillian_superoperator(gen: LindbladGenerator) -> np.ndarray:
    """The d^2 x d^2 matrix ``S`` with ``vec(d rho/dt) = S vec(rho)``."""
    d = gen.dim
    one = np.eye(d, dtype=np.complex128)
    h = gen.hamiltonian
    s = -1j * (np.kron(one, h) - np.kron(h.T, one))
    for L in gen.jumps:
        LdL = dag(L) @ L
        s = s + np.kron(L.conj(), L) - 0.5 * np.kron(one, LdL) - 0.5 * np.kron(LdL.T, one)
    return s


def dissipator_superoperator(gen: LindbladGenerator) -> np.ndarray:
    return liouvillian_superoperator(gen) - liouvillian_superoperator(LindbladGenerator(gen.hamiltonian))


def negated_dissipator_superoperator(gen: LindbladGenerator) -> np.ndarray:
    """NON-PHYSICAL test fixture: Hamiltonian part with the dissipator sign flipped.

    The resulting evolution is trace preserving but not completely positive, so
    it is only useful as a counterexample for :func:`choi_psd_check`.
    """
    return liouvillian_superoperator(LindbladGenerator(gen.hamiltonian)) - dissipator_superoperator(gen)


def _state_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else as_matrix(rho, "rho")


def _validated(rho: np.ndarray, trace_tol: float = TRACE_TOL) -> DensityMatrix:
    drift = abs(np.trace(rho) - 1.0)
    if drift > trace_tol:
        raise NumericalFailure(f"trace drifted by {drift:.3e}")
    try:
        return DensityMatrix(rho)
    except InputError as exc:
        raise NumericalFailure(f"propagated state is not a density matrix: {exc}") from exc


def propagator(gen_or_superop, t: float) -> np.ndarray:
    s = liouvillian_superoperator(gen_or_superop) if isinstance(gen_or_superop, LindbladGenerator) \
        else as_matrix(gen_or_superop, "superoperator")
    return matrix_exponential(s * t)


def propagate(gen: LindbladGenerator, rho0, t: float) -> DensityMatrix:
    """rho(t) = unvec(exp(S t) vec(rho0))."""
    if t < 0:
        raise PreconditionError(f"t must be >= 0, got {t}")
    r0 = _state_matrix(rho0)
    if r0.shape[0] != gen.dim:
        raise InputError(f"state dimension {r0.shape[0]} != generator dimension {gen.dim}")
    if t == 0:
        return rho0 if isinstance(rho0, DensityMatrix) else DensityMatrix(r0)
    rho = unvec(propagator(gen, t) @ vec(r0), gen.dim)
    return _validated(rho)


def propagate_rk4(gen: LindbladGenerator, rho0, t: float, steps: int) -> DensityMatrix:
    """Classical fixed-step RK4 integration of the Lindblad equation in matrix form."""
    if steps < 1:
        raise PreconditionError("steps must be >= 1")
    if t < 0:
        raise PreconditionError(f"t must be >= 0, got {t}")
    rho = np.array(_state_matrix(rho0), dtype=np.complex128)
    if t == 0:
        return rho0 if isinstance(rho0, DensityMatrix) else DensityMatrix(rho)
    h = t / steps
    f = gen.rhs
    for _ in range(steps):
        k1 = f(rho)
        k2 = f(rho + 0.5 * h * k1)
        k3 = f(rho + 0.5 * h * k2)
        k4 = f(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return _validated(rho, trace_tol=1e-8)


def coherence_decay_matrix(model: StableBasisModel) -> np.ndarray:
    """Complex decay rates ``lam[m, n]`` of ``rho_mn`` between stable states.

    Both algebraic forms are evaluated; they must agree to 1e-12 (relative to
    the scale of the rates).
    """
    ell = model.jump_eigenvalues
    a = ell[:, :, None]
    b = ell[:, None, :]
    lam = np.sum(0.5 * np.abs(a) ** 2 + 0.5 * np.abs(b) ** 2 - a * b.conj(), axis=0)
    lam_alt = np.sum(-1j * np.imag(a * b.conj()) + 0.5 * np.abs(a - b) ** 2, axis=0)
    scale = max(1.0, float(np.sum(np.abs(ell) ** 2)))
    if max_norm(lam - lam_alt) > 1e-12 * scale:
        raise NumericalFailure("the two forms of the coherence decay rate disagree")
    np.fill_diagonal(lam, 0.0)
    return lam


def analytic_propagate(model: StableBasisModel, rho0, t: float) -> DensityMatrix:
    """rho_mn(t) = rho_mn(0) exp[-i(E_m - E_n) t - lam_mn t]."""
    if t < 0:
        raise PreconditionError(f"t must be >= 0, got {t}")
    r0 = _state_matrix(rho0)
    if t == 0:
        return rho0 if isinstance(rho0, DensityMatrix) else DensityMatrix(r0)
    e = model.energies
    lam = coherence_decay_matrix(model)
    factor = np.exp(-1j * (e[:, None] - e[None, :]) * t - lam * t)
    np.fill_diagonal(factor, 1.0)
    return DensityMatrix(r0 * factor)


def entropy_condition_check(gen: LindbladGenerator, tol: float = STRUCTURAL_TOL) -> tuple[bool, float]:
    """Whether sum_a (L_a^H L_a - L_a L_a^H) vanishes; returns (ok, max-norm residual)."""
    acc = np.zeros((gen.dim, gen.dim), dtype=np.complex128)
    for L in gen.jumps:
        acc += dag(L) @ L - L @ dag(L)
    residual = max_norm(acc)
    return residual <= tol, residual


@dataclass(frozen=True)
class StabilityReport:
    index: int
    stable: bool
    jump_commutators: tuple        # ||[L_a, P_m]|| per jump
    jump_adjoint_commutators: tuple  # ||[L_a^H, P_m]|| per jump
    hamiltonian_commutator: float
    commutator_trace_term: float   # Tr sum_a [L_a, P]^H [L_a, P]
    entropy_trace_term: float      # Tr P sum_a (L_a^H L_a - L_a L_a^H)
    stationary_residual: float     # ||rhs(P_m)||, zero iff the projector is stationary
    jump_eigenvalues: tuple | None
    energy: float | None


def stability_check(gen: LindbladGenerator, m: int, tol: float = STRUCTURAL_TOL) -> StabilityReport:
    """Test whether basis state ``m`` commutes with H, every L_a and L_a^H.

    Also reports both trace terms of the identity obtained by sandwiching the
    Lindblad equation with the projector; they sum to zero whenever the
    projector is stationary.
    """
    d = gen.dim
    if not 0 <= m < d:
        raise PreconditionError(f"state index {m} out of range for dim {d}")
    P = np.zeros((d, d), dtype=np.complex128)
    P[m, m] = 1.0
    jc, jac = [], []
    term1 = 0.0
    acc = np.zeros((d, d), dtype=np.complex128)
    for L in gen.jumps:
        c = commutator(L, P)
        jc.append(max_norm(c))
        jac.append(max_norm(commutator(dag(L), P)))
        term1 += float(np.real(np.trace(dag(c) @ c)))
        acc += dag(L) @ L - L @ dag(L)
    term2 = float(np.real(np.trace(P @ acc)))
    hc = max_norm(commutator(gen.hamiltonian, P))
    stable = all(x <= tol for x in jc + jac) and hc <= tol
    ell = energy = None
    if stable:
        ell = tuple(complex(L[m, m]) for L in gen.jumps)
        energy = float(gen.hamiltonian[m, m].real)
    return StabilityReport(
        index=m,
        stable=stable,
        jump_commutators=tuple(jc),
        jump_adjoint_commutators=tuple(jac),
        hamiltonian_commutator=hc,
        commutator_trace_term=term1,
        entropy_trace_term=term2,
        stationary_residual=max_norm(gen.rhs(P)),
        jump_eigenvalues=ell,
        energy=energy,
    )


def stable_basis_model(gen: LindbladGenerator, tol: float = STRUCTURAL_TOL) -> StableBasisModel:
    """Extract (E_m, ell_am) when every basis state passes :func:`stability_check`."""
    reports = [stability_check(gen, m, tol) for m in range(gen.dim)]
    bad = [r.index for r in reports if not r.stable]
    if bad:
        raise PreconditionError(f"basis states {bad} are not stable")
    energies = [r.energy for r in reports]
    ell = np.array([[r.jump_eigenvalues[a] for r in reports] for a in range(len(gen.jumps))],
                   dtype=np.complex128).reshape(len(gen.jumps), gen.dim)
    return StableBasisModel(np.array(energies), ell)


def choi_matrix(channel: np.ndarray, dim: int) -> np.ndarray:
    """Choi matrix sum_ij E_ij kron channel(E_ij) of a superoperator on column-stacked vectors."""
    choi = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    for i in range(dim):
        for j in range(dim):
            unit = np.zeros((dim, dim), dtype=np.complex128)
            unit[i, j] = 1.0
            choi += np.kron(unit, unvec(channel @ vec(unit), dim))
    return choi


def choi_psd_check(gen_or_superop, t: float, tol: float = CHOI_TOL) -> tuple[bool, float]:
    """Complete-positivity test of exp(S t); returns (is_psd, min Choi eigenvalue).

    Accepts a :class:`LindbladGenerator` or a raw superoperator matrix (the
    latter allows non-physical counterexamples).
    """
    if t < 0:
        raise PreconditionError(f"t must be >= 0, got {t}")
    if isinstance(gen_or_superop, LindbladGenerator):
        dim = gen_or_superop.dim
    else:
        dim = int(round(np.sqrt(np.asarray(gen_or_superop).shape[0])))
    choi = choi_matrix(propagator(gen_or_superop, t), dim)
    asym = max_norm(choi - dag(choi))
    if asym > HERMITIAN_TOL * max(1.0, max_norm(choi)):
        raise NumericalFailure(f"Choi matrix is not Hermitian (max asymmetry {asym:.3e})")
    w, _ = hermitian_eigendecomposition(0.5 * (choi + dag(choi)))
    return bool(w[0] >= -tol), float(w[0])


def random_generator(dim: int, rng: np.random.Generator, n_jumps: int | None = None,
                     diagonal_jumps: bool = False, scale: float = 1.0) -> LindbladGenerator:
    n_jumps = int(rng.integers(1, dim * dim)) if n_jumps is None else n_jumps
    jumps = []
    for _ in range(n_jumps):
        if diagonal_jumps:
            jumps.append(np.diag(rng.normal(size=dim) + 1j * rng.normal(size=dim)) * np.sqrt(scale))
        else:
            jumps.append((rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) * np.sqrt(scale / 2))
    return LindbladGenerator(random_hermitian(dim, rng, scale), tuple(jumps))


def random_stable_model(dim: int, rng: np.random.Generator, n_jumps: int | None = None,
                        energy_scale: float = 1.0, rate_scale: float = 1.0) -> StableBasisModel:
    n_jumps = int(rng.integers(1, dim * dim)) if n_jumps is None else n_jumps
    ell = (rng.normal(size=(n_jumps, dim)) + 1j * rng.normal(size=(n_jumps, dim))) * np.sqrt(rate_scale / 2)
    return StableBasisModel(rng.normal(size=dim) * energy_scale, ell)

"""Small dense complex linear algebra: Jacobi eigensolver, Pade matrix exponential,
validated density matrices and von Neumann entropy.

Matrices are plain ``numpy`` complex arrays; the dimensions used throughout the
package are tiny (d <= 16, superoperators at most 256 x 256).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, InvalidStateError, NumericalFailure, PreconditionError

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_DRIFT_TOL = 1e-6

_JACOBI_REL_TOL = 1e-14
_JACOBI_MAX_SWEEPS = 100


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a square complex128 array, rejecting anything else."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InputError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} has non-finite entries")
    return a


def dag(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def max_norm(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


def hermitian_eigendecomposition(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a Hermitian matrix with cyclic complex Jacobi rotations.

    Returns ``(w, V)`` with ``w`` real and ascending and ``V`` unitary such that
    ``m @ V == V @ diag(w)``.
    """
    a = as_matrix(m).copy()
    asym = max_norm(a - dag(a))
    if asym > HERMITIAN_TOL:
        raise PreconditionError(f"matrix is not Hermitian: max |m - m^H| = {asym:.3e}")
    a = 0.5 * (a + dag(a))
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    scale = np.linalg.norm(a)
    threshold = _JACOBI_REL_TOL * scale

    def off_norm(x):
        return np.linalg.norm(x - np.diag(np.diag(x)))

    for _ in range(_JACOBI_MAX_SWEEPS):
        if off_norm(a) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                theta = 0.5 * np.arctan2(2.0 * mag, aqq - app)
                c, s = np.cos(theta), np.sin(theta)
                # phase fix on q (makes the pq entry real) followed by a real Givens rotation
                g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                cols = [p, q]
                a[:, cols] = a[:, cols] @ g
                a[cols, :] = dag(g) @ a[cols, :]
                a[p, q] = a[q, p] = 0.0
                v[:, cols] = v[:, cols] @ g
    else:
        raise NumericalFailure("Jacobi iteration did not converge")

    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


# Pade(13) coefficients and the 1-norm bound below which no scaling is needed.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def matrix_exponential(m) -> np.ndarray:
    """exp(m) by scaling and squaring around a degree-13 Pade approximant."""
    a = as_matrix(m)
    n = a.shape[0]
    norm1 = np.linalg.norm(a, 1)
    if norm1 == 0.0:
        return np.eye(n, dtype=np.complex128)
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
        a = a / 2.0**s
    b = _PADE13
    ident = np.eye(n, dtype=np.complex128)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


@dataclass(frozen=True)
class DensityMatrix:
    """A validated d x d density matrix.

    Construction symmetrizes ``(rho + rho^H) / 2`` and renormalizes the trace so
    integrator drift is absorbed, then rejects states with an eigenvalue below
    ``-PSD_TOL``. Trace drift or skew-Hermitian parts beyond ``TRACE_DRIFT_TOL``
    are errors, not drift.
    """

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = as_matrix(self.matrix, "density matrix")
        skew = max_norm(a - dag(a))
        if skew > TRACE_DRIFT_TOL:
            raise InvalidStateError(f"not Hermitian: max |rho - rho^H| = {skew:.3e}")
        a = 0.5 * (a + dag(a))
        tr = np.trace(a).real
        if abs(tr - 1.0) > TRACE_DRIFT_TOL:
            raise InvalidStateError(f"trace {tr:.12g} is not 1")
        a = a / tr
        w, _ = hermitian_eigendecomposition(a)
        if w[0] < -PSD_TOL:
            raise InvalidStateError(f"not positive semidefinite: min eigenvalue {w[0]:.3e}")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "_eigenvalues", w)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigenvalues.copy()

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    @classmethod
    def from_ket(cls, ket) -> "DensityMatrix":
        psi = np.asarray(ket, dtype=np.complex128).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, dim: int, index: int) -> "DensityMatrix":
        psi = np.zeros(dim, dtype=np.complex128)
        psi[index] = 1.0
        return cls.from_ket(psi)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.matrix, dtype=dtype)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-Tr(rho ln rho) in nats, with 0 ln 0 = 0."""
    w = rho.eigenvalues if isinstance(rho, DensityMatrix) else hermitian_eigendecomposition(rho)[0]
    if w[0] < -PSD_TOL:
        raise InvalidStateError(f"negative eigenvalue {w[0]:.3e}")
    p = w[w > 0.0]
    return float(-np.sum(p * np.log(p)))


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (x + dag(x))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    x = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(x)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    rank = dim if rank is None else rank
    x = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = x @ dag(x)
    return DensityMatrix(rho / np.trace(rho).real)

"""Quadratic problems in spectral coordinates and the exact gradient recursion.

A strictly convex quadratic f(x) = 1/2 x'Ax - b'x with A symmetric positive
definite is represented by the eigenvalues of A alone: in the eigenbasis the
matrix is diagonal and the gradient iteration x_{k+1} = x_k - alpha_k g_k
decouples componentwise,

    g_{k+1}^(i) = (1 - alpha_k * lambda_i) * g_k^(i).

Dense inputs are converted once at ingestion (`spectralize`); everything after
that lives in spectral coordinates. All types here are immutable values, so
distinct trajectories may be advanced concurrently without shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GradLabError, StructuralError

# Relative symmetry tolerance for dense ingestion.
SYMMETRY_REL_TOL = 1e-12
# Relative reconstruction tolerance promised by spectralize.
RECONSTRUCTION_REL_TOL = 1e-10


def _as_readonly_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise StructuralError(f"{name} must be a non-empty 1-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SpectralProblem:
    """Eigenvalues of the Hessian, sorted ascending, all positive.

    Duplicate eigenvalues are accepted (components merge in the theory) but
    flagged through `has_duplicate_eigenvalues` so reports can warn about them.
    """

    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = _as_readonly_vector(self.eigenvalues, "eigenvalues")
        if not np.all(np.isfinite(lam)):
            raise DomainError("eigenvalues must be finite")
        if lam[0] <= 0.0:
            raise DomainError(f"smallest eigenvalue must be positive, got {float(lam[0]):g}")
        if np.any(np.diff(lam) < 0.0):
            raise StructuralError("eigenvalues must be sorted ascending")
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def lam1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lamn(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def kappa(self) -> float:
        return self.lamn / self.lam1

    @property
    def has_duplicate_eigenvalues(self) -> bool:
        return bool(np.any(np.diff(self.eigenvalues) == 0.0))


@dataclass(frozen=True, eq=False)
class GradientVector:
    """Gradient components in spectral coordinates at iteration `k`."""

    components: np.ndarray
    k: int = 0

    def __post_init__(self):
        arr = _as_readonly_vector(self.components, "components")
        object.__setattr__(self, "components", arr)
        if not isinstance(self.k, (int, np.integer)) or self.k < 0:
            raise StructuralError(f"iteration index must be a non-negative integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def n(self) -> int:
        return self.components.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))


@dataclass(frozen=True, eq=False)
class DenseProblem:
    """Dense symmetric positive definite quadratic: matrix A and right-hand side b."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise StructuralError(f"matrix must be square and non-empty, got shape {a.shape}")
        b = _as_readonly_vector(self.rhs, "rhs")
        if b.size != a.shape[0]:
            raise StructuralError(f"rhs has length {b.size}, matrix is {a.shape[0]}x{a.shape[0]}")
        scale = float(np.linalg.norm(a, "fro"))
        gap = float(np.linalg.norm(a - a.T, "fro"))
        if gap > SYMMETRY_REL_TOL * max(scale, 1e-300):
            raise DomainError(
                f"matrix is not symmetric: ||A - A'|| = {gap:.3e} exceeds {SYMMETRY_REL_TOL:g} * ||A||"
            )
        a.flags.writeable = False
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "rhs", b)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _check_dims(g: GradientVector, problem: SpectralProblem) -> None:
    if g.n != problem.n:
        raise StructuralError(f"gradient has dimension {g.n}, problem has dimension {problem.n}")


def gradient_step(g: GradientVector, alpha: float, problem: SpectralProblem) -> GradientVector:
    """Advance the gradient one iteration: g'^(i) = (1 - alpha*lambda_i) * g^(i)."""
    _check_dims(g, problem)
    if not (alpha > 0.0) or not math.isfinite(alpha):
        raise DomainError(f"stepsize must be positive and finite, got {alpha!r}")
    factors = 1.0 - alpha * problem.eigenvalues
    return GradientVector(factors * g.components, g.k + 1)


def fgap(g: GradientVector, problem: SpectralProblem) -> float:
    """Objective gap f(x_k) - f(x*) = 1/2 sum_i g_i^2 / lambda_i."""
    _check_dims(g, problem)
    return 0.5 * float(np.sum(g.components**2 / problem.eigenvalues))


def error_vector(g: GradientVector, problem: SpectralProblem) -> np.ndarray:
    """Iterate error e_k = x_k - x* in spectral coordinates: e_i = g_i / lambda_i."""
    _check_dims(g, problem)
    return g.components / problem.eigenvalues


@dataclass(frozen=True, eq=False)
class GradientTrajectory:
    """A recorded run: gradients g_0..g_K, the K stepsizes taken, and the objective gaps."""

    problem: SpectralProblem
    gradients: tuple[GradientVector, ...]
    stepsizes: tuple[float, ...]
    fgaps: tuple[float, ...]

    def __post_init__(self):
        if len(self.gradients) == 0:
            raise StructuralError("trajectory needs at least the initial gradient")
        if len(self.gradients) != len(self.stepsizes) + 1:
            raise StructuralError(
                f"{len(self.gradients)} gradients require {len(self.gradients) - 1} stepsizes, "
                f"got {len(self.stepsizes)}"
            )
        if len(self.fgaps) != len(self.gradients):
            raise StructuralError("one objective gap per gradient is required")
        for k, g in enumerate(self.gradients):
            if g.n != self.problem.n:
                raise StructuralError(f"gradient {k} has dimension {g.n}, expected {self.problem.n}")
            if g.k != k:
                raise StructuralError(f"gradient at position {k} carries index {g.k}")
        for k, a in enumerate(self.stepsizes):
            if not (a > 0.0) or not math.isfinite(a):
                raise DomainError(f"stepsize {k} must be positive and finite, got {a!r}")

    @property
    def num_steps(self) -> int:
        return len(self.stepsizes)

    def component_matrix(self) -> np.ndarray:
        """Stack gradient components into a (K+1, n) array."""
        return np.vstack([g.components for g in self.gradients])

    def gradient_norms(self) -> np.ndarray:
        return np.array([g.norm() for g in self.gradients])

    def inverse_stepsizes(self) -> np.ndarray:
        return 1.0 / np.array(self.stepsizes)

    def max_recurrence_ulp(self) -> float:
        """Largest deviation, in ulps, of g_{k+1} from (1 - alpha_k lambda) g_k.

        The driver computes steps by that very formula, so this should be 0;
        it is exposed as an integrity check for externally built trajectories.
        """
        worst = 0.0
        lam = self.problem.eigenvalues
        for k, alpha in enumerate(self.stepsizes):
            expected = (1.0 - alpha * lam) * self.gradients[k].components
            got = self.gradients[k + 1].components
            diff = np.abs(expected - got)
            scale = np.spacing(np.maximum(np.abs(expected), np.abs(got)))
            with np.errstate(invalid="ignore"):
                ulps = np.where(diff == 0.0, 0.0, diff / scale)
            worst = max(worst, float(np.max(ulps)))
        return worst


def _jacobi_eigensystem(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi diagonalization of a symmetric matrix.

    Sweeps rotate away every off-diagonal entry above 1e-14 * ||A||_F, capped
    at 100 sweeps. Adequate for the dense sizes this package handles (a few
    hundred at most); returns (eigenvalues, eigenvectors) unsorted.
    """
    a = a.copy()
    n = a.shape[0]
    q = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), q
    thresh = 1e-14 * float(np.linalg.norm(a, "fro"))
    for _ in range(100):
        off = np.abs(a - np.diag(a.diagonal()))
        if float(off.max()) <= thresh:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if abs(apr) <= thresh:
                    continue
                tau = (a[r, r] - a[p, p]) / (2.0 * apr)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = 1.0 / (tau - math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # Two-sided rotation in the (p, r) plane.
                col_p = a[:, p].copy()
                col_r = a[:, r].copy()
                a[:, p] = c * col_p - s * col_r
                a[:, r] = s * col_p + c * col_r
                row_p = a[p, :].copy()
                row_r = a[r, :].copy()
                a[p, :] = c * row_p - s * row_r
                a[r, :] = s * row_p + c * row_r
                a[p, r] = 0.0
                a[r, p] = 0.0
                qp = q[:, p].copy()
                qr = q[:, r].copy()
                q[:, p] = c * qp - s * qr
                q[:, r] = s * qp + c * qr
    return a.diagonal().copy(), q


@dataclass(frozen=True, eq=False)
class SpectralizeResult:
    """Spectral form of a dense problem plus the basis mapping into it.

    `basis` holds unit eigenvectors as columns, ordered like the eigenvalues,
    so basis @ diag(eigenvalues) @ basis.T reconstructs the matrix.
    """

    problem: SpectralProblem
    basis: np.ndarray
    dense: DenseProblem

    def to_spectral(self, v) -> np.ndarray:
        """Carry a dense-space vector (e.g. a gradient) into spectral coordinates."""
        arr = _as_readonly_vector(v, "vector")
        if arr.size != self.problem.n:
            raise StructuralError(f"vector has length {arr.size}, expected {self.problem.n}")
        return self.basis.T @ arr

    def initial_gradient(self, x0) -> GradientVector:
        """Spectral gradient of the dense objective at a dense-space start point."""
        arr = _as_readonly_vector(x0, "x0")
        if arr.size != self.problem.n:
            raise StructuralError(f"x0 has length {arr.size}, expected {self.problem.n}")
        dense_grad = self.dense.matrix @ arr - self.dense.rhs
        return GradientVector(self.basis.T @ dense_grad, 0)


def spectralize(dense: DenseProblem) -> SpectralizeResult:
    """Diagonalize a dense SPD problem into spectral coordinates.

    Raises DomainError if the matrix is not positive definite; the message
    names the offending eigenvalue. The reconstruction basis @ diag @ basis.T
    is verified against the input to relative accuracy 1e-10.
    """
    w, q = _jacobi_eigensystem(dense.matrix)
    order = np.argsort(w, kind="stable")
    w = w[order]
    q = q[:, order]
    if w[0] <= 0.0:
        raise DomainError(f"matrix is not positive definite: eigenvalue {float(w[0]):g} detected")
    scale = float(np.linalg.norm(dense.matrix, "fro"))
    residual = float(np.linalg.norm((q * w) @ q.T - dense.matrix, "fro"))
    if residual > RECONSTRUCTION_REL_TOL * scale:
        raise GradLabError(
            f"eigendecomposition failed to converge: reconstruction residual {residual:.3e}"
        )
    q.flags.writeable = False
    return SpectralizeResult(SpectralProblem(w), q, dense)

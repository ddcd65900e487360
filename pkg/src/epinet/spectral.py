"""Eigenvalue kernels shared by the stability tests."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

DENSE_EIG_CAP = 10_000


@dataclass(frozen=True)
class SymmetricOperator:
    """Matrix-free symmetric linear operator on R^n."""

    n: int
    matvec: Callable[[np.ndarray], np.ndarray]
    dense: Optional[np.ndarray] = None

    @staticmethod
    def from_dense(a: np.ndarray) -> "SymmetricOperator":
        a = _check_symmetric(a)
        return SymmetricOperator(n=a.shape[0], matvec=lambda v: a @ v, dense=a)


@dataclass(frozen=True)
class PowerIterationResult:
    value: float
    iterations: int
    converged: bool


def _check_symmetric(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if float(np.abs(a - a.T).max(initial=0.0)) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return a


def lambda_max_dense(a: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric matrix (dense solver)."""
    a = _check_symmetric(a)
    if a.shape[0] > DENSE_EIG_CAP:
        raise ValueError(
            f"dense eigensolve refused for n={a.shape[0]} > {DENSE_EIG_CAP}"
        )
    return float(np.linalg.eigvalsh(a)[-1])


def lambda_max_iterative(
    op: SymmetricOperator, tol: float = 1e-8, max_iter: int = 10_000
) -> PowerIterationResult:
    """Power iteration with Rayleigh-quotient stopping.

    Converges to the largest eigenvalue when it dominates in modulus, which
    holds for the nonnegative-weight operators used here.  Returns
    ``converged=False`` instead of raising if the iteration stalls.
    """
    if op.n < 1:
        raise ValueError("operator dimension must be >= 1")
    rng = np.random.default_rng(0x5EED)
    # Deterministic start: all-ones plus a fixed jitter so the iterate is not
    # orthogonal to the leading eigenvector of structured matrices.
    v = np.ones(op.n) + 1e-3 * rng.standard_normal(op.n)
    v /= np.linalg.norm(v)
    rayleigh = 0.0
    streak = 0
    for it in range(1, max_iter + 1):
        w = op.matvec(v)
        new = float(v @ w)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return PowerIterationResult(value=0.0, iterations=it, converged=True)
        v = w / norm
        if abs(new - rayleigh) <= tol * max(abs(new), 1e-30):
            streak += 1
            if streak >= 3:
                return PowerIterationResult(value=new, iterations=it, converged=True)
        else:
            streak = 0
        rayleigh = new
    return PowerIterationResult(value=rayleigh, iterations=max_iter, converged=False)


def spectral_abscissa(a: np.ndarray, dim_cap: int = DENSE_EIG_CAP) -> float:
    """Largest real part among the eigenvalues of a (general) square matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] > dim_cap:
        raise ValueError(f"dense eigensolve refused for n={a.shape[0]} > {dim_cap}")
    offdiag = a - np.diag(np.diag(a))
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if float(offdiag.min(initial=0.0)) < -1e-12 * scale:
        warnings.warn(
            "matrix has negative off-diagonal entries; the spectral abscissa "
            "is still returned but Perron-type arguments do not apply",
            stacklevel=2,
        )
    return float(np.linalg.eigvals(a).real.max())


def matrix_measure_sym(a: np.ndarray) -> float:
    """Matrix measure induced by the Euclidean norm; for symmetric input this
    is just the largest eigenvalue."""
    return lambda_max_dense(a)

"""Small dense linear algebra and the special functions behind F p-values.

Matrices are plain 2-D ``numpy`` float arrays. Everything here is sized for
MANOVA work (a handful of responses), so the routines favour clarity and
accuracy over asymptotic speed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    NoConvergence,
    NotPositiveDefinite,
)

EPS = np.finfo(float).eps

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50

BETACF_EPS = 1e-14
BETACF_MAX_ITER = 300
_FPMIN = 1e-300

EIG_CLAMP = 1e-10


def as_matrix(a, name="matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float array."""
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} has non-finite entries")
    return m


def _check_square_symmetric(a: np.ndarray, tol: float, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > tol * scale:
        raise DomainError(f"{name} is not symmetric")


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular ``L`` with ``L @ L.T`` equal to the factored matrix."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T

    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))


def cholesky(a) -> CholeskyFactor:
    """Cholesky-Banachiewicz factorization of a symmetric positive definite matrix.

    Raises NotPositiveDefinite when a pivot falls to ``dim * eps * max(diag)``
    or below.
    """
    a = as_matrix(a)
    _check_square_symmetric(a, 1e-12, "matrix")
    n = a.shape[0]
    max_diag = float(np.max(np.diag(a)))
    floor = n * EPS * max_diag
    if max_diag <= 0:
        raise NotPositiveDefinite("matrix has no positive diagonal entry")
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - np.dot(L[j, :j], L[j, :j])
        if not pivot > floor:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3g} at index {j} is below threshold {floor:.3g}"
            )
        d = math.sqrt(pivot)
        L[j, j] = d
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / d
    return CholeskyFactor(L)


def _forward(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = L.shape[0]
    X = np.empty_like(B)
    for i in range(n):
        X[i] = (B[i] - L[i, :i] @ X[:i]) / L[i, i]
    return X


def _backward(U: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = U.shape[0]
    X = np.empty_like(B)
    for i in range(n - 1, -1, -1):
        X[i] = (B[i] - U[i, i + 1:] @ X[i + 1:]) / U[i, i]
    return X


def tri_solve(l: CholeskyFactor, b, side: str = "left", transpose: bool = False) -> np.ndarray:
    """Solve ``op(L) X = B`` (side="left") or ``X op(L) = B`` (side="right").

    ``op(L)`` is ``L.T`` when ``transpose`` is set, otherwise ``L``.
    """
    L = l.lower
    B = as_matrix(b, "b")
    n = L.shape[0]
    if side == "left":
        if B.shape[0] != n:
            raise DimensionMismatch(f"left solve needs {n} rows, got {B.shape[0]}")
        return _backward(L.T, B) if transpose else _forward(L, B)
    if side == "right":
        if B.shape[1] != n:
            raise DimensionMismatch(f"right solve needs {n} columns, got {B.shape[1]}")
        # X op(L) = B  <=>  op(L)^T X^T = B^T
        Xt = _forward(L, B.T) if transpose else _backward(L.T, B.T)
        return Xt.T
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def sym_eigenvalues(a) -> list[float]:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending."""
    m = as_matrix(a)
    _check_square_symmetric(m, 1e-10, "matrix")
    n = m.shape[0]
    A = [[float(x) for x in row] for row in m]
    target = JACOBI_TOL * math.sqrt(sum(x * x for row in A for x in row))

    for _ in range(JACOBI_MAX_SWEEPS + 1):
        off = math.sqrt(sum(A[i][j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off <= target:
            return sorted((A[i][i] for i in range(n)), reverse=True)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p][q]
                if apq == 0.0:
                    continue
                tau = (A[q][q] - A[p][p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                Ap, Aq = A[p], A[q]
                for k in range(n):
                    akp, akq = Ap[k], Aq[k]
                    Ap[k] = c * akp - s * akq
                    Aq[k] = s * akp + c * akq
                for k in range(n):
                    row = A[k]
                    akp, akq = row[p], row[q]
                    row[p] = c * akp - s * akq
                    row[q] = s * akp + c * akq
                A[p][q] = A[q][p] = 0.0
    raise NoConvergence(f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps")


def eig_product(e, h) -> list[float]:
    """Eigenvalues of ``E^{-1} H`` for SPD ``E`` and PSD ``H``, descending.

    Uses the congruence ``L^{-1} H L^{-T}`` with ``E = L L^T`` so that the
    problem stays symmetric. Roundoff negatives down to -1e-10 are clamped
    to zero.
    """
    e = as_matrix(e, "e")
    h = as_matrix(h, "h")
    if e.shape != h.shape:
        raise DimensionMismatch(f"e {e.shape} and h {h.shape} differ in shape")
    factor = cholesky(e)
    X = tri_solve(factor, h, side="left")
    A = tri_solve(factor, X, side="right", transpose=True)
    A = 0.5 * (A + A.T)
    lam = sym_eigenvalues(A)
    if lam[-1] < -EIG_CLAMP * max(1.0, abs(lam[0])):
        raise DomainError(f"h is not positive semidefinite (eigenvalue {lam[-1]:.3g})")
    return [max(x, 0.0) for x in lam]


def ln_gamma(x: float) -> float:
    if not x > 0:
        raise DomainError(f"ln_gamma needs x > 0, got {x}")
    return math.lgamma(x)


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETACF_EPS:
            return h
    raise NoConvergence(
        f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}"
    )


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if not (a > 0 and b > 0):
        raise DomainError(f"reg_inc_beta needs a, b > 0, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"reg_inc_beta needs 0 <= x <= 1, got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return min(1.0, front * _betacf(a, b, x) / a)
    return max(0.0, 1.0 - front * _betacf(b, a, 1.0 - x) / b)


def _check_f_args(f: float, d1: float, d2: float) -> None:
    if not (d1 > 0 and d2 > 0):
        raise DomainError(f"F degrees of freedom must be positive, got ({d1}, {d2})")
    if not f >= 0:
        raise DomainError(f"F value must be nonnegative, got {f}")


def f_sf(f: float, d1: float, d2: float) -> float:
    """Upper tail ``P(F_{d1,d2} > f)``."""
    _check_f_args(f, d1, d2)
    if math.isinf(f):
        return 0.0
    return reg_inc_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0)


def f_cdf(f: float, d1: float, d2: float) -> float:
    return 1.0 - f_sf(f, d1, d2)


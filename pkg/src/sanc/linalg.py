"""Dense vector helpers, the matrix-free symmetric operator, and finite-difference oracles."""

from __future__ import annotations

from typing import Callable

import numpy as np


class NonFiniteError(FloatingPointError):
    """Raised when NaN or Inf would enter algorithm state."""


def as_vector(x, name: str = "vector") -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array (copying only when needed)."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return v


def dot(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(a @ b)


def norm(a) -> float:
    return float(np.linalg.norm(a))


class LinearOperator:
    """Symmetric operator known only through products ``v -> A v``.

    Parameters
    ----------
    dim : int
        Size of the (square) operator.
    apply : callable
        Maps a length-``dim`` vector to a length-``dim`` vector. Must be linear
        and symmetric; the library never materializes the matrix.
    """

    def __init__(self, dim: int, apply: Callable[[np.ndarray], np.ndarray]):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        self._apply = apply

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"expected shape ({self.dim},), got {v.shape}")
        out = np.asarray(self._apply(v), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("operator product has non-finite entries")
        return out

    __call__ = apply

    def __matmul__(self, v):
        return self.apply(v)

    @classmethod
    def from_matrix(cls, A) -> "LinearOperator":
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        return cls(A.shape[0], lambda v: A @ v)

    def to_dense(self) -> np.ndarray:
        """Assemble the matrix column by column (tests and small problems only)."""
        eye = np.eye(self.dim)
        return np.column_stack([self.apply(eye[:, i]) for i in range(self.dim)])


def symmetry_defect(op: LinearOperator, n_probes: int = 20, seed: int = 0) -> float:
    """Largest ``|u.Bv - v.Bu| / (|u||v| |B|_probe)`` over random probe pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        u = rng.standard_normal(op.dim)
        v = rng.standard_normal(op.dim)
        Bu, Bv = op.apply(u), op.apply(v)
        scale = max(norm(Bu) / norm(u), norm(Bv) / norm(v), np.finfo(float).tiny)
        worst = max(worst, abs(u @ Bv - v @ Bu) / (norm(u) * norm(v) * scale))
    return worst


def linearity_defect(op: LinearOperator, n_probes: int = 20, seed: int = 0) -> float:
    """Largest relative error of ``B(au + bv)`` against ``aBu + bBv``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        u = rng.standard_normal(op.dim)
        v = rng.standard_normal(op.dim)
        a, b = rng.standard_normal(2)
        lhs = op.apply(a * u + b * v)
        rhs = a * op.apply(u) + b * op.apply(v)
        worst = max(worst, norm(lhs - rhs) / max(norm(rhs), np.finfo(float).tiny))
    return worst


def finite_diff_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    if not h > 0:
        raise ValueError("step h must be positive")
    x = as_vector(x, "x")
    grad = np.empty_like(x)
    e = np.zeros_like(x)
    for i in range(x.size):
        e[i] = h
        fp, fm = f(x + e), f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError(f"non-finite function value along coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
        e[i] = 0.0
    return grad


def finite_diff_hvp(grad: Callable[[np.ndarray], np.ndarray], x, v, h: float = 1e-5) -> np.ndarray:
    """Central difference of the gradient along ``v``; an oracle for ``H(x) v``.

    The step is taken along ``v`` as given (not normalized), so the result is
    exact for quadratics regardless of the scale of ``v``.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    x = as_vector(x, "x")
    v = as_vector(v, "v")
    if norm(v) == 0.0:
        raise ValueError("direction v must be nonzero")
    gp = np.asarray(grad(x + h * v), dtype=np.float64)
    gm = np.asarray(grad(x - h * v), dtype=np.float64)
    if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gm))):
        raise NonFiniteError("non-finite gradient in finite_diff_hvp")
    return (gp - gm) / (2.0 * h)

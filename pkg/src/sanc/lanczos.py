"""Lanczos tridiagonalization over the Krylov space of (g, B) and Ritz extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .linalg import LinearOperator, as_vector


@dataclass(frozen=True)
class KrylovBasis:
    """Orthonormal Krylov basis ``Q`` (columns) and tridiagonal ``T = Q^T B Q``."""

    Q: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    gamma0: float
    breakdown: bool

    @property
    def size(self) -> int:
        return self.alphas.size

    def T(self) -> np.ndarray:
        return np.diag(self.alphas) + np.diag(self.betas, 1) + np.diag(self.betas, -1)


@dataclass(frozen=True)
class RitzPair:
    value: float
    vector: np.ndarray


def lanczos_expand(
    B: LinearOperator, g, j_max: int = 5, breakdown_tol: float = 1e-12
) -> KrylovBasis:
    """Run at most ``j_max`` Lanczos steps started from ``g``.

    Every new direction is reorthogonalized (twice) against all previous
    columns. The recurrence stops early when the next off-diagonal entry
    falls below ``breakdown_tol`` times the norm of the current product
    ``B q_k``, i.e. when the Krylov space has become invariant.

    Exactly one operator application is made per Lanczos step.
    """
    g = as_vector(g, "g")
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    gamma0 = float(np.linalg.norm(g))
    if gamma0 == 0.0:
        raise ValueError("Lanczos start vector g has zero norm")
    d = g.size
    j_max = min(j_max, d)

    Q = np.zeros((d, j_max))
    alphas: list[float] = []
    betas: list[float] = []
    Q[:, 0] = g / gamma0
    breakdown = False
    for k in range(j_max):
        w = B.apply(Q[:, k])
        scale = float(np.linalg.norm(w))
        alpha = float(Q[:, k] @ w)
        alphas.append(alpha)
        w = w - alpha * Q[:, k]
        if k > 0:
            w = w - betas[-1] * Q[:, k - 1]
        for _ in range(2):
            w = w - Q[:, : k + 1] @ (Q[:, : k + 1].T @ w)
        beta = float(np.linalg.norm(w))
        if beta <= breakdown_tol * scale or beta == 0.0:
            breakdown = True
            break
        if k + 1 == j_max:
            break
        betas.append(beta)
        Q[:, k + 1] = w / beta

    j = len(alphas)
    return KrylovBasis(
        Q=Q[:, :j].copy(),
        alphas=np.array(alphas),
        betas=np.array(betas[: j - 1]),
        gamma0=gamma0,
        breakdown=breakdown,
    )


def tridiag_eigen(alphas, betas) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and unit eigenvectors (columns) of a symmetric tridiagonal matrix."""
    alphas = np.asarray(alphas, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    if alphas.ndim != 1 or alphas.size < 1:
        raise ValueError("need at least one diagonal entry")
    if betas.shape != (alphas.size - 1,):
        raise ValueError("betas must have length len(alphas) - 1")
    if not (np.all(np.isfinite(alphas)) and np.all(np.isfinite(betas))):
        raise ValueError("non-finite tridiagonal entries")
    if alphas.size == 1:
        return alphas.copy(), np.ones((1, 1))
    return eigh_tridiagonal(alphas, betas)


def ritz_leftmost(basis: KrylovBasis) -> RitzPair:
    """Leftmost Ritz pair ``(lambda_1(T), Q y_1)`` of the Krylov basis."""
    if basis.size == 0:
        raise ValueError("empty Krylov basis")
    vals, vecs = tridiag_eigen(basis.alphas, basis.betas)
    v = basis.Q @ vecs[:, 0]
    v = v / np.linalg.norm(v)
    return RitzPair(value=float(vals[0]), vector=v)

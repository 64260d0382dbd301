"""Negative-curvature probe and the fallback direction used on rejected steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lanczos import KrylovBasis, ritz_leftmost
from .linalg import LinearOperator

NEGATIVE_CURVATURE = "negative_curvature"
GRADIENT = "gradient"


@dataclass(frozen=True)
class CurvatureProbe:
    v: np.ndarray
    curvature: float
    eps_prime: float


def curvature_probe(basis: KrylovBasis, B: LinearOperator, g, eps: float) -> CurvatureProbe:
    """Leftmost Ritz pair of ``basis`` as a curvature probe.

    The curvature is the Ritz value itself (equal to ``v.Bv`` up to the Lanczos
    relation), so ``B`` is not applied again; it is accepted so callers can
    refresh the value against the operator when they want to.
    """
    ritz = ritz_leftmost(basis)
    eps_prime = max(eps, float(np.linalg.norm(g))) / 2.0
    return CurvatureProbe(v=ritz.vector, curvature=ritz.value, eps_prime=eps_prime)


def nc_decrease_surrogate(c: float, L2: float, eps: float) -> float:
    """Expected decrease of the negative-curvature step with curvature ``c``."""
    return 2.0 * (-c) ** 3 / (3.0 * L2**2) - eps * c**2 / (6.0 * L2**2)


def gradient_decrease_surrogate(grad_norm: float, L1: float, eps_g: float) -> float:
    return grad_norm**2 / (4.0 * L1) - eps_g**2 / L1


def nc_direction(
    probe: CurvatureProbe, g, L1: float, L2: float, eps: float, eps_g: float, z: int
) -> tuple[np.ndarray, str]:
    """Pick between a scaled negative-curvature step and a gradient step.

    Returns ``-(2|c|/L2) z v`` when the negative-curvature surrogate strictly
    beats the gradient surrogate, otherwise ``-g/L1``.
    """
    if not (L1 > 0 and L2 > 0):
        raise ValueError("L1 and L2 must be positive")
    if z not in (-1, 1):
        raise ValueError("z must be +1 or -1")
    g = np.asarray(g, dtype=np.float64)
    c = probe.curvature
    if c >= 0 and not np.any(g):
        # Nothing to exploit: report a zero gradient step so the stop test can fire.
        return np.zeros_like(g), GRADIENT
    nc_gain = nc_decrease_surrogate(c, L2, eps)
    grad_gain = gradient_decrease_surrogate(float(np.linalg.norm(g)), L1, eps_g)
    if nc_gain > grad_gain:
        return -(2.0 * abs(c) / L2) * z * probe.v, NEGATIVE_CURVATURE
    return -g / L1, GRADIENT

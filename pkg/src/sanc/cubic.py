"""Cubic-regularized local model and its minimization over a Krylov subspace."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .lanczos import KrylovBasis, tridiag_eigen
from .linalg import LinearOperator, as_vector

logger = logging.getLogger(__name__)


class SubproblemError(RuntimeError):
    """The reduced cubic subproblem could not be solved to tolerance."""


@dataclass(frozen=True)
class CubicModel:
    """``m(s) = f0 + g.s + s.Bs/2 + sigma |s|^3 / 3``."""

    f0: float
    g: np.ndarray
    B: LinearOperator
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not math.isfinite(self.f0):
            raise ValueError("f0 must be finite")


@dataclass(frozen=True)
class SubspaceSolution:
    u: np.ndarray
    s: np.ndarray
    model_value: float
    model_decrease: float
    cauchy_fallback: bool = False


def eval_model(m: CubicModel, s) -> float:
    s = as_vector(s, "s")
    ns = float(np.linalg.norm(s))
    return float(m.f0 + m.g @ s + 0.5 * (s @ m.B.apply(s)) + m.sigma * ns**3 / 3.0)


def reduced_model_value(u, alphas, betas, gamma0: float, sigma: float, f0: float = 0.0) -> float:
    """``f0 + gamma0 u_1 + u.Tu/2 + sigma |u|^3 / 3`` without forming ``T``."""
    u = np.asarray(u, dtype=np.float64)
    Tu = np.asarray(alphas) * u
    if u.size > 1:
        Tu[:-1] += np.asarray(betas) * u[1:]
        Tu[1:] += np.asarray(betas) * u[:-1]
    nu = float(np.linalg.norm(u))
    return float(f0 + gamma0 * u[0] + 0.5 * (u @ Tu) + sigma * nu**3 / 3.0)


def solve_tridiag_cubic(
    alphas, betas, gamma0: float, sigma: float, tol: float = 1e-10, max_iter: int = 100
) -> np.ndarray:
    """Global minimizer of ``gamma0 u_1 + u.Tu/2 + sigma |u|^3 / 3``.

    The minimizer satisfies ``(T + sigma r I) u = -gamma0 e_1`` with ``r = |u|``
    and ``T + sigma r I`` positive semidefinite. The scalar search runs over
    the smallest shifted eigenvalue ``theta = lambda_1 + sigma r``, which keeps
    full relative precision next to the pole ``theta = 0`` where ``|u|`` is
    most sensitive. Newton steps on ``1/|u| - 1/r`` are safeguarded by
    bisection on a bracket that always contains the root. If no root exists
    above the pole (hard case) the leftmost eigenvector is added to reach
    ``|u| = -lambda_1/sigma``.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if gamma0 < 0:
        raise ValueError("gamma0 must be nonnegative")
    lam, V = tridiag_eigen(alphas, betas)
    lam1 = float(lam[0])
    gaps = lam - lam1
    gaps[0] = 0.0
    j = alphas.size
    b = gamma0 * V[0, :]
    spread = max(abs(lam1), abs(float(lam[-1])), 1.0)

    if gamma0 == 0.0 and lam1 >= 0.0:
        return np.zeros(j)

    # Hard case: the gradient has (numerically) no component along the
    # leftmost eigenspace and the pseudo-solution at the pole is too short.
    if lam1 < 0.0:
        cluster = gaps <= 1e-12 * spread
        if np.all(np.abs(b[cluster]) <= 1e-14 * gamma0):
            rest = ~cluster
            up = float(np.linalg.norm(b[rest] / gaps[rest])) if rest.any() else 0.0
            if up <= -lam1 / sigma:
                return _hard_case(gaps, V, b, sigma, lam1, cluster)

    def radius(theta):
        return (theta - lam1) / sigma

    # theta_hi from |u| <= gamma0 / theta, written without cancellation.
    root = math.sqrt(lam1**2 + 4 * sigma * gamma0)
    theta_hi = 2 * sigma * gamma0 / (root - lam1) if lam1 < 0 else (lam1 + root) / 2
    lo, hi = max(lam1, 0.0), theta_hi
    theta = hi
    for _ in range(max_iter):
        shift = gaps + theta
        nu = float(np.linalg.norm(b / shift))
        r = radius(theta)
        if nu == r:
            break
        if nu > r:
            lo = theta
        else:
            hi = theta
        dnu = -float(np.sum(b**2 / shift**3)) / nu
        phi = 1.0 / nu - 1.0 / r
        dphi = -dnu / nu**2 + sigma / (theta - lam1) ** 2
        new = theta - phi / dphi if dphi > 0 else 0.5 * (lo + hi)
        if not (lo < new < hi) or not math.isfinite(new):
            new = 0.5 * (lo + hi)
        if abs(new - theta) <= 4 * np.finfo(float).eps * theta or hi - lo <= 4 * np.finfo(float).eps * hi:
            theta = new
            break
        theta = new
    else:
        raise SubproblemError("secular-equation iteration did not converge")

    u = -(V @ (b / (gaps + theta)))
    nu = float(np.linalg.norm(u))
    resid = _stationarity_residual(alphas, betas, gamma0, sigma, u)
    scale = max(1.0, gamma0, (spread + sigma * nu) * nu)
    if not math.isfinite(nu) or resid > tol * scale or lam1 + sigma * nu < -tol * spread:
        raise SubproblemError(f"reduced solution failed checks (residual {resid:.3e})")
    return u


def _hard_case(gaps, V, b, sigma, lam1, cluster) -> np.ndarray:
    r = -lam1 / sigma
    coeff = np.zeros(gaps.size)
    rest = ~cluster
    coeff[rest] = -b[rest] / gaps[rest]
    tau = math.sqrt(max(r**2 - float(coeff @ coeff), 0.0))
    coeff[0] = -tau if b[0] > 0 else tau
    return V @ coeff


def _stationarity_residual(alphas, betas, gamma0, sigma, u) -> float:
    Tu = alphas * u
    if u.size > 1:
        Tu[:-1] += betas * u[1:]
        Tu[1:] += betas * u[:-1]
    res = Tu + sigma * float(np.linalg.norm(u)) * u
    res[0] += gamma0
    return float(np.linalg.norm(res))


def cauchy_point(m: CubicModel) -> np.ndarray:
    """Minimizer of the model along ``-g``: ``s_c = -alpha_c g``."""
    g = as_vector(m.g, "g")
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        raise ValueError("Cauchy point undefined for zero gradient")
    return -cauchy_alpha(float(g @ m.B.apply(g)), gn, m.sigma) * g


def cauchy_alpha(gBg: float, gnorm: float, sigma: float) -> float:
    """Positive root of ``-|g|^2 + a gBg + sigma a^2 |g|^3 = 0``."""
    disc = math.sqrt(gBg**2 + 4.0 * sigma * gnorm**5)
    if gBg > 0:
        # Rationalized form avoids cancellation for large positive curvature.
        return 2.0 * gnorm**2 / (gBg + disc)
    return (-gBg + disc) / (2.0 * sigma * gnorm**3)


def minimize_over_krylov(m: CubicModel, basis: KrylovBasis, tol: float = 1e-10) -> SubspaceSolution:
    """Approximately minimize the cubic model over ``span(Q)``.

    A one-dimensional basis spans only ``g``, where the exact minimizer is the
    Cauchy point, so that case returns :func:`cauchy_point` directly. Otherwise
    the reduced problem is solved and the Cauchy point is used as fallback if
    the solver fails or does not improve on it.
    """
    gamma0 = basis.gamma0
    sigma = m.sigma
    if basis.size == 1:
        s = cauchy_point(m)
        u = np.array([float(basis.Q[:, 0] @ s)])
        return _solution(m, u, s, basis, cauchy=True)

    alpha_c = cauchy_alpha(gamma0**2 * basis.alphas[0], gamma0, sigma)
    uc = np.zeros(basis.size)
    uc[0] = -alpha_c * gamma0
    try:
        u = solve_tridiag_cubic(basis.alphas, basis.betas, gamma0, sigma, tol=tol)
    except SubproblemError as exc:
        logger.warning("cubic subproblem failed (%s); using Cauchy point", exc)
        u = None
    if u is not None:
        mu = reduced_model_value(u, basis.alphas, basis.betas, gamma0, sigma)
        mc = reduced_model_value(uc, basis.alphas, basis.betas, gamma0, sigma)
        if mu <= mc:
            return _solution(m, u, basis.Q @ u, basis)
        logger.debug("Krylov solution not below Cauchy point; using Cauchy point")
    s = cauchy_point(m)
    return _solution(m, basis.Q.T @ s, s, basis, cauchy=True)


def _solution(m, u, s, basis, cauchy=False) -> SubspaceSolution:
    value = reduced_model_value(u, basis.alphas, basis.betas, basis.gamma0, m.sigma, m.f0)
    return SubspaceSolution(
        u=u, s=s, model_value=value, model_decrease=m.f0 - value, cauchy_fallback=cauchy
    )


def verify_step_conditions(m: CubicModel, s) -> tuple[float, float]:
    """Return ``(g.s + s.Bs + sigma|s|^3, s.Bs + sigma|s|^3)``.

    For a minimizer over a subspace containing ``g`` the first vanishes and the
    second is nonnegative; thresholds are left to the caller.
    """
    s = as_vector(s, "s")
    sBs = float(s @ m.B.apply(s))
    cubic = m.sigma * float(np.linalg.norm(s)) ** 3
    return float(m.g @ s) + sBs + cubic, sBs + cubic

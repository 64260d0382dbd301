"""Adaptive cubic regularization with a negative-curvature fallback, and its baselines.

All methods share one driver, :func:`run`. Per iteration they draw fresh
gradient/Hessian batches, and the cubic methods minimize the local model over a
Lanczos basis of ``(g, B)``:

``sanc``  accept the model step when ``rho >= eta1``; otherwise move along a
          negative-curvature or gradient direction and grow ``sigma``.
``scr``   same acceptance test, but rejected steps leave ``x`` unchanged.
``cr``    fixed ``sigma``, every model step accepted.
``ncd``   always the negative-curvature/gradient rule.
``sgd``   ``x <- x - step * g``.

Oracle calls count per-example work: one gradient, one Hessian-vector product
or one function value of a single ``f_i`` each. Objective values written to the
trace are exact full-data values; they are only charged as oracle calls when
the algorithm itself needs them (``rho`` for ``sanc``/``scr``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cubic import CubicModel, SubproblemError, minimize_over_krylov
from .curvature import GRADIENT, curvature_probe, nc_direction
from .lanczos import lanczos_expand, ritz_leftmost
from .linalg import NonFiniteError
from .sampling import BatchSpec, draw_indices, make_streams, sample_batches, stochastic_gradient, stochastic_hvp_operator

logger = logging.getLogger(__name__)

KINDS = ("sanc", "scr", "cr", "ncd", "sgd")
NEWTON = "newton"
VERY_SUCCESSFUL, SUCCESSFUL, UNSUCCESSFUL = "very_successful", "successful", "unsuccessful"


@dataclass(frozen=True)
class SancConfig:
    gamma: float = 2.0
    eta1: float = 0.2
    eta2: float = 0.8
    sigma0: float = 1.0
    L1: float = 10.0
    L2: float = 10.0
    eps: float = 1e-3
    eps_g: float = 1e-4
    eps_B: float = 1e-3
    eps_s: float = 1e-8
    eps_m: float = float(np.finfo(np.float64).eps)
    j_max: int = 5
    batch: Optional[BatchSpec] = None  # None: full batches
    max_iter: int = 1000
    seed: int = 0
    budget: Optional[int] = None  # oracle-call budget
    f_mode: str = "exact"  # or "estimate": fresh batch of size |S_g| for rho
    cr_sigma: float = 5.0
    sgd_step: float = 0.01
    subproblem_tol: float = 1e-10

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError("gamma > 1 required")
        if not 0 < self.eta1 < self.eta2 < 1:
            raise ValueError("0 < eta1 < eta2 < 1 required")
        for name in ("sigma0", "L1", "L2", "eps_g", "eps_B", "eps_m", "cr_sigma", "sgd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.eps_s < 0:
            raise ValueError("eps_s must be nonnegative")
        if self.j_max < 1 or self.max_iter < 1:
            raise ValueError("j_max and max_iter must be >= 1")
        if self.f_mode not in ("exact", "estimate"):
            raise ValueError("f_mode must be 'exact' or 'estimate'")
        if self.budget is not None and self.budget <= 0:
            raise ValueError("budget must be positive")
        if not self.eps > 3 * self.eps_g or not self.eps > 144 * self.eps_B**2:
            logger.warning(
                "eps=%g does not dominate max(3 eps_g, 144 eps_B^2); complexity guarantee not implied",
                self.eps,
            )

    def sigma_max_bound(self) -> float:
        """Upper bound on sigma from the configured constants (diagnostic only)."""
        if self.eps_s == 0:
            return math.inf
        return max(self.sigma0, self.gamma * (1.5 * self.L2 + 3 * (self.eps_g + 0.5 * self.eps_B) / self.eps_s**2))


@dataclass(frozen=True)
class IterationRecord:
    t: int
    f_value: float  # objective at the iterate this iteration produced
    grad_norm: float
    sigma: Optional[float]
    rho: Optional[float]
    step_kind: str
    success_class: str
    ritz_value: Optional[float]
    step_norm: float
    oracle_calls_cum: int
    z: Optional[int] = None  # Rademacher sign drawn on this iteration, if any


@dataclass
class Trace:
    kind: str
    seed: int
    initial_f_value: float
    initial_oracle_calls: int = 0  # spent before the first iteration (exact f at x0)
    records: list = field(default_factory=list)
    final_x: Optional[np.ndarray] = None
    stop_reason: str = "max_iter"

    @property
    def unsuccessful(self) -> int:
        return sum(r.success_class == UNSUCCESSFUL for r in self.records)

    @property
    def oracle_calls(self) -> int:
        return self.records[-1].oracle_calls_cum if self.records else self.initial_oracle_calls

    @property
    def final_f_value(self) -> float:
        return self.records[-1].f_value if self.records else self.initial_f_value


class OracleCounter:
    def __init__(self):
        self.calls = 0

    def add(self, k: int) -> None:
        self.calls += int(k)


def rho(f_x: float, f_xs: float, model_value: float) -> Optional[float]:
    """Actual over predicted decrease; ``None`` when the prediction is numerically zero."""
    predicted = f_x - model_value
    if predicted <= 1e-15 * max(1.0, abs(f_x)):
        return None
    return (f_x - f_xs) / predicted


def classify(r: Optional[float], cfg: SancConfig) -> str:
    if r is None or r < cfg.eta1:
        return UNSUCCESSFUL
    return VERY_SUCCESSFUL if r > cfg.eta2 else SUCCESSFUL


def sigma_update(sigma: float, r: Optional[float], grad_norm: float, cfg: SancConfig) -> float:
    cls = classify(r, cfg)
    if cls == VERY_SUCCESSFUL:
        return max(min(sigma, grad_norm), cfg.eps_m)
    if cls == SUCCESSFUL:
        return sigma
    return cfg.gamma * sigma


def _check(x: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("iterate became non-finite")
    return x


@dataclass
class RunState:
    """Evolving iterate of one run; ``f_x`` is the exact objective at ``x``."""

    x: np.ndarray
    f_x: float
    sigma: float
    t: int = 0
    counter: OracleCounter = field(default_factory=OracleCounter)
    streams: dict = field(default_factory=dict)
    stop_reason: Optional[str] = None


def init_state(kind: str, model, cfg: SancConfig, x0=None) -> RunState:
    if kind not in KINDS:
        raise ValueError(f"unknown optimizer {kind!r}")
    x = np.array(model.initial_point() if x0 is None else x0, dtype=np.float64)
    state = RunState(
        x=_check(x),
        f_x=model.value(x),
        sigma=cfg.cr_sigma if kind == "cr" else cfg.sigma0,
        streams=make_streams(cfg.seed),
    )
    if kind in ("sanc", "scr") and cfg.f_mode == "exact":
        state.counter.add(model.n)
    return state


def step(kind: str, state: RunState, model, cfg: SancConfig) -> Optional[IterationRecord]:
    """Advance ``state`` by one iteration of ``kind``.

    Returns the iteration record, or ``None`` when the approximate
    second-order stationarity test fires before a step is taken (then
    ``state.stop_reason`` is set). A record may also set ``stop_reason`` when
    the rejected-step stopping pair (no move, tiny model step) holds.
    """
    n = model.n
    batch = cfg.batch or BatchSpec(n, n)
    streams, counter = state.streams, state.counter
    x, t = state.x, state.t
    S_g, S_B = sample_batches(n, batch, streams["batches-g"], streams["batches-B"])
    g = stochastic_gradient(model, x, S_g, counter)
    gn = float(np.linalg.norm(g))

    def finish(record):
        state.t += 1
        return record

    if kind == "sgd":
        d = -cfg.sgd_step * g
        state.x = _check(x + d)
        state.f_x = model.value(state.x)
        return finish(IterationRecord(
            t, state.f_x, gn, None, None, GRADIENT, SUCCESSFUL, None, float(np.linalg.norm(d)), counter.calls
        ))

    B = stochastic_hvp_operator(model, x, S_B, counter)
    if gn > 0:
        basis = lanczos_expand(B, g, cfg.j_max)
    else:
        # No gradient to start Krylov from: probe curvature from a random vector.
        basis = lanczos_expand(B, streams["init"].standard_normal(model.d), cfg.j_max)
    ritz = ritz_leftmost(basis).value
    if gn <= cfg.eps and ritz >= -cfg.eps:
        state.stop_reason = "converged"
        return None

    if kind == "ncd":
        probe = curvature_probe(basis, B, g, cfg.eps)
        z = int(streams["rademacher"].choice((-1, 1)))
        d, step_kind = nc_direction(probe, g, cfg.L1, cfg.L2, cfg.eps, cfg.eps_g, z)
        state.x = _check(x + d)
        state.f_x = model.value(state.x)
        if not np.any(d):
            state.stop_reason = "converged"
        return finish(IterationRecord(
            t, state.f_x, gn, None, None, step_kind, SUCCESSFUL, ritz, float(np.linalg.norm(d)), counter.calls, z
        ))

    adaptive = kind in ("sanc", "scr")
    exact_f = cfg.f_mode == "exact"
    sigma = state.sigma
    S_f, f_est = None, state.f_x
    if adaptive and not exact_f:
        S_f = draw_indices(n, batch.size_g, streams["batches-f"], batch.replacement)
        counter.add(S_f.size)
        f_est = model.value(x, S_f)
    if gn > 0:
        sol = minimize_over_krylov(CubicModel(f_est, g, B, sigma), basis, cfg.subproblem_tol)
        s, m_val = sol.s, sol.model_value
    else:
        s, m_val = np.zeros(model.d), f_est
    s_norm = float(np.linalg.norm(s))

    if kind == "cr":
        state.x = _check(x + s)
        state.f_x = model.value(state.x)
        return finish(IterationRecord(t, state.f_x, gn, sigma, None, NEWTON, SUCCESSFUL, ritz, s_norm, counter.calls))

    r = f_xs = None
    if s_norm > 0:
        if exact_f:
            counter.add(n)
            f_xs = model.value(x + s)
        else:
            counter.add(S_f.size)
            f_xs = model.value(x + s, S_f)
        r = rho(f_est, f_xs, m_val)
    cls = classify(r, cfg)

    z = None
    moved = True
    if cls != UNSUCCESSFUL:
        state.x = _check(x + s)
        state.f_x = f_xs if exact_f else model.value(state.x)
        step_kind, step_norm = NEWTON, s_norm
    elif kind == "sanc":
        probe = curvature_probe(basis, B, g, cfg.eps)
        if cfg.eps_B > probe.eps_prime / 12:
            logger.debug("t=%d: eps_B=%g exceeds eps'/12=%g; curvature-step decrease not guaranteed",
                         t, cfg.eps_B, probe.eps_prime / 12)
        z = int(streams["rademacher"].choice((-1, 1)))
        d, step_kind = nc_direction(probe, g, cfg.L1, cfg.L2, cfg.eps, cfg.eps_g, z)
        step_norm = float(np.linalg.norm(d))
        moved = step_norm > 0
        if moved:
            state.x = _check(x + d)
            if exact_f:
                counter.add(n)
            state.f_x = model.value(state.x)
    else:
        step_kind, step_norm, moved = NEWTON, 0.0, False

    state.sigma = sigma_update(sigma, r, gn, cfg)
    if cls == UNSUCCESSFUL and not moved and s_norm <= cfg.eps_s:
        state.stop_reason = "converged"
    return finish(IterationRecord(t, state.f_x, gn, sigma, r, step_kind, cls, ritz, step_norm, counter.calls, z))


def sanc_step(state: RunState, model, cfg: SancConfig) -> Optional[IterationRecord]:
    return step("sanc", state, model, cfg)


def baseline_step(kind: str, state: RunState, model, cfg: SancConfig) -> Optional[IterationRecord]:
    if kind == "sanc":
        raise ValueError("use sanc_step for sanc")
    return step(kind, state, model, cfg)


def run(kind: str, model, cfg: SancConfig, x0=None) -> Trace:
    """Run one optimizer until convergence, ``max_iter`` iterations or the oracle budget."""
    (cfg.batch or BatchSpec(model.n, model.n)).validate(model.n)
    state = init_state(kind, model, cfg, x0)
    if kind == "sanc":
        logger.debug("sigma upper bound from config constants: %g", cfg.sigma_max_bound())
    trace = Trace(kind=kind, seed=cfg.seed, initial_f_value=state.f_x, initial_oracle_calls=state.counter.calls)
    try:
        while state.t < cfg.max_iter:
            if cfg.budget is not None and state.counter.calls >= cfg.budget:
                state.stop_reason = "budget"
                break
            record = step(kind, state, model, cfg)
            if record is not None:
                trace.records.append(record)
            if state.stop_reason:
                break
    except (SubproblemError, NonFiniteError) as exc:
        logger.error("%s run (seed %d) aborted: %s", kind, cfg.seed, exc)
        state.stop_reason = "error"
    trace.stop_reason = state.stop_reason or "max_iter"
    trace.final_x = state.x
    return trace

"""Mini-batch estimators, seeded substreams, and sample-size bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import LinearOperator, as_vector

# Purpose names for independent random substreams of one run.
STREAMS = ("batches-g", "batches-B", "batches-f", "rademacher", "init")


@dataclass(frozen=True)
class BatchSpec:
    size_g: int
    size_B: int
    replacement: bool = False

    def validate(self, n: int) -> None:
        if self.size_g < 1 or self.size_B < 1:
            raise ValueError("batch sizes must be >= 1")
        if not self.replacement and (self.size_g > n or self.size_B > n):
            raise ValueError(f"batch size exceeds n={n} without replacement")


@dataclass(frozen=True)
class SamplingConstants:
    L0: float
    L1: float
    L2: float
    delta: float
    eps_g: float
    eps_B: float

    def __post_init__(self):
        for name in ("L0", "L1", "L2", "delta", "eps_g", "eps_B"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.delta < 1:
            raise ValueError("delta must be < 1")


def _ceil(x: float) -> int:
    # Snap values within a few ulps of an integer so exact cases stay exact.
    k = round(x)
    if abs(x - k) <= 8 * np.finfo(float).eps * max(1.0, abs(x)):
        return int(k)
    return math.ceil(x)


def gradient_bound(c: SamplingConstants) -> float:
    """``4 L0^2 (1 + 2 sqrt(log(1/delta)))^2 / eps_g^2`` before rounding."""
    return 4.0 * c.L0**2 * (1.0 + 2.0 * math.sqrt(math.log(1.0 / c.delta))) ** 2 / c.eps_g**2


def hessian_bound(c: SamplingConstants, d: int) -> float:
    """``16 L1^2 log(2d/delta) / eps_B^2`` before rounding."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return 16.0 * c.L1**2 * math.log(2.0 * d / c.delta) / c.eps_B**2


def gradient_batch_size(c: SamplingConstants) -> int:
    """Smallest integer ``|S_g|`` meeting :func:`gradient_bound`."""
    return _ceil(gradient_bound(c))


def hessian_batch_size(c: SamplingConstants, d: int) -> int:
    """Smallest integer ``|S_B|`` meeting :func:`hessian_bound`."""
    return _ceil(hessian_bound(c, d))


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """One counter-based (Philox) generator per purpose, all keyed off ``seed``."""
    return {
        name: np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(k,))))
        for k, name in enumerate(STREAMS)
    }


def draw_indices(n: int, size: int, rng: np.random.Generator, replacement: bool = False) -> np.ndarray:
    """Sorted index draw; sorting fixes the summation order of batch reductions."""
    if not replacement and size > n:
        raise ValueError(f"cannot draw {size} of {n} without replacement")
    if not replacement and size == n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=size, replace=replacement))


def sample_batches(
    n: int, spec: BatchSpec, rng_g: np.random.Generator, rng_B: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw the gradient and Hessian index sets from their own substreams."""
    spec.validate(n)
    return (
        draw_indices(n, spec.size_g, rng_g, spec.replacement),
        draw_indices(n, spec.size_B, rng_B, spec.replacement),
    )


def stochastic_gradient(model, x, S_g, counter=None) -> np.ndarray:
    """Average of per-example gradients over ``S_g``."""
    S_g = np.asarray(S_g)
    if S_g.size == 0:
        raise ValueError("empty gradient batch")
    if counter is not None:
        counter.add(S_g.size)
    return model.grad(as_vector(x, "x"), S_g)


def stochastic_hvp_operator(model, x, S_B, counter=None) -> LinearOperator:
    """Operator ``v -> mean_{i in S_B} H_i(x) v``; each product costs ``|S_B|`` oracle calls."""
    S_B = np.asarray(S_B)
    if S_B.size == 0:
        raise ValueError("empty Hessian batch")
    x = as_vector(x, "x").copy()
    cache = model.hvp_cache(x, S_B)

    def apply(v):
        if counter is not None:
            counter.add(S_B.size)
        return model.hvp_cached(cache, v)

    return LinearOperator(model.d, apply)

"""Finite-sum objectives ``f(x) = mean_i f_i(x)`` with analytic gradients and Hessian products.

Every model implements batch methods taking an index array ``idx`` (``None``
means the full dataset, routed through the same code path as ``arange(n)``)::

    value(x, idx)      mean of f_i(x)
    grad(x, idx)       mean of grad f_i(x)
    hvp(x, v, idx)     mean of H_i(x) v

plus ``hvp_cache``/``hvp_cached`` so a sampled Hessian operator can reuse the
per-example curvature weights across Lanczos steps.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .data import Dataset


class ObjectiveModel:
    n: int
    d: int
    lam: float = 0.0

    def _idx(self, idx):
        return np.arange(self.n) if idx is None else np.asarray(idx)

    def value(self, x, idx=None) -> float:
        raise NotImplementedError

    def grad(self, x, idx=None) -> np.ndarray:
        raise NotImplementedError

    def hvp_cache(self, x, idx=None):
        raise NotImplementedError

    def hvp_cached(self, cache, v) -> np.ndarray:
        raise NotImplementedError

    def hvp(self, x, v, idx=None) -> np.ndarray:
        return self.hvp_cached(self.hvp_cache(x, idx), np.asarray(v, dtype=np.float64))

    # per-example views
    def value_i(self, i: int, x) -> float:
        return self.value(x, np.array([i]))

    def grad_i(self, i: int, x) -> np.ndarray:
        return self.grad(x, np.array([i]))

    def hvp_i(self, i: int, x, v) -> np.ndarray:
        return self.hvp(x, v, np.array([i]))

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.d)


def _regularizer(w):
    """``sum w^2/(1+w^2)`` with its gradient and Hessian diagonal."""
    q = 1.0 + w * w
    return float(np.sum(w * w / q)), 2.0 * w / q**2, (2.0 - 6.0 * w * w) / q**3


class LogisticNonconvex(ObjectiveModel):
    """Binary cross-entropy with a sigmoid link plus ``lam * sum w^2/(1+w^2)``.

    Labels must be in {0, 1}. The regularizer is added once to the averaged
    loss, which is the same as adding it to every ``f_i``.
    """

    def __init__(self, X, y, lam: float = 1.0):
        self.X = sp.csr_matrix(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        if not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("logistic labels must be in {0, 1}")
        self.n, self.d = self.X.shape
        if self.y.shape != (self.n,):
            raise ValueError("label count does not match rows")
        self.lam = float(lam)

    def _rows(self, idx):
        return self.X[self._idx(idx)], self.y[self._idx(idx)]

    def value(self, x, idx=None):
        Xs, ys = self._rows(idx)
        z = Xs @ x
        reg, _, _ = _regularizer(x)
        return float(np.mean(np.logaddexp(0.0, z) - ys * z)) + self.lam * reg

    def grad(self, x, idx=None):
        Xs, ys = self._rows(idx)
        _, dreg, _ = _regularizer(x)
        return Xs.T @ (expit(Xs @ x) - ys) / ys.size + self.lam * dreg

    def hvp_cache(self, x, idx=None):
        Xs, _ = self._rows(idx)
        p = expit(Xs @ x)
        _, _, h = _regularizer(x)
        return Xs, p * (1.0 - p) / Xs.shape[0], self.lam * h

    def hvp_cached(self, cache, v):
        Xs, weights, reg_diag = cache
        return Xs.T @ (weights * (Xs @ v)) + reg_diag * v

    def initial_point(self):
        return np.ones(self.d)


class NonconvexSVM(ObjectiveModel):
    """``f_i(x) = 1 - tanh(r_i x.q_i) + lam |x|^2`` with labels ``r_i`` in {-1, +1}."""

    def __init__(self, X, r, lam: float = 1e-3):
        self.X = sp.csr_matrix(X, dtype=np.float64)
        self.r = np.asarray(r, dtype=np.float64)
        if not np.all(np.abs(self.r) == 1):
            raise ValueError("SVM labels must be in {-1, +1}")
        self.n, self.d = self.X.shape
        self.lam = float(lam)

    def value(self, x, idx=None):
        i = self._idx(idx)
        t = np.tanh(self.r[i] * (self.X[i] @ x))
        return float(np.mean(1.0 - t)) + self.lam * float(x @ x)

    def grad(self, x, idx=None):
        i = self._idx(idx)
        Xs, r = self.X[i], self.r[i]
        t = np.tanh(r * (Xs @ x))
        return -(Xs.T @ (r * (1.0 - t * t))) / i.size + 2.0 * self.lam * x

    def hvp_cache(self, x, idx=None):
        i = self._idx(idx)
        Xs = self.X[i]
        t = np.tanh(self.r[i] * (Xs @ x))
        return Xs, 2.0 * t * (1.0 - t * t) / i.size

    def hvp_cached(self, cache, v):
        Xs, weights = cache
        return Xs.T @ (weights * (Xs @ v)) + 2.0 * self.lam * v


class SyntheticSaddle(ObjectiveModel):
    """``f(w) = w_1^4/4 - w_1^2/2 + |w_{2:}|^2/2``: strict saddle at 0, minima at ``w_1 = +-1``."""

    def __init__(self, d: int = 10):
        if d < 2:
            raise ValueError("d must be >= 2")
        self.n, self.d = 1, int(d)

    def value(self, x, idx=None):
        self._idx(idx)
        return float(0.25 * x[0] ** 4 - 0.5 * x[0] ** 2 + 0.5 * (x[1:] @ x[1:]))

    def grad(self, x, idx=None):
        g = np.array(x, dtype=np.float64)
        g[0] = x[0] ** 3 - x[0]
        return g

    def hvp_cache(self, x, idx=None):
        h = np.ones(self.d)
        h[0] = 3.0 * x[0] ** 2 - 1.0
        return h

    def hvp_cached(self, cache, v):
        return cache * v


class Quadratic(ObjectiveModel):
    """``f_i(x) = x.A_i x / 2 + b_i.x`` from stacked ``A`` (n, d, d) and ``b`` (n, d)."""

    def __init__(self, A, b):
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if A.ndim == 2:
            A, b = A[None], b[None]
        self.A = 0.5 * (A + A.transpose(0, 2, 1))
        self.b = b
        self.n, self.d = b.shape

    def value(self, x, idx=None):
        i = self._idx(idx)
        return float(np.mean(0.5 * np.einsum("j,kjl,l->k", x, self.A[i], x) + self.b[i] @ x))

    def grad(self, x, idx=None):
        i = self._idx(idx)
        return np.mean(self.A[i] @ x + self.b[i], axis=0)

    def hvp_cache(self, x, idx=None):
        return np.mean(self.A[self._idx(idx)], axis=0)

    def hvp_cached(self, cache, v):
        return cache @ v


def logistic_nonconvex(dataset: Dataset, lam: float = 1.0) -> LogisticNonconvex:
    return LogisticNonconvex(dataset.X, dataset.labels, lam)


def nonconvex_svm(dataset: Dataset, lam: float = 1e-3) -> NonconvexSVM:
    return NonconvexSVM(dataset.X, dataset.labels, lam)


def synthetic_saddle(d: int = 10) -> SyntheticSaddle:
    return SyntheticSaddle(d)

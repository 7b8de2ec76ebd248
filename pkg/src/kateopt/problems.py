"""Differentiable objectives: GLM losses, their scaled variants, test functions.

The GLM objective is ``f(w) = (1/n) sum_i phi_i(x_i . w)``; with a diagonal
scaling V it becomes ``f_V(w) = (1/n) sum_i phi_i(x_i . (V w))``, i.e. the
same model fit on features ``V x_i``. The scaling is stored as a vector and
applied on the fly, never materialized into the feature matrix, so scaled
and unscaled evaluations share the exact same data.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import DimensionError, Rng, sample_batch
from .data import Dataset, ScalingSpec

__all__ = [
    "EvaluationError",
    "GlmProblem",
    "GradSample",
    "LossKind",
    "QuadraticProblem",
    "RosenbrockProblem",
    "smoothness_bound",
]


class EvaluationError(RuntimeError):
    """Objective or gradient could not be evaluated."""


class LossKind(enum.Enum):
    LOGISTIC = "logistic"
    SQUARED = "squared"


@dataclass(frozen=True)
class GradSample:
    """One stochastic gradient and the indices it averaged over."""

    g: np.ndarray
    batch_indices: np.ndarray


def _stable_sigmoid(v: np.ndarray) -> np.ndarray:
    # 1 / (1 + e^-v) without ever exponentiating a positive argument.
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _logistic_loss(margins: np.ndarray) -> np.ndarray:
    # log(1 + e^-m) = max(-m, 0) + log1p(e^-|m|); exact for |m| up to overflow.
    return np.maximum(-margins, 0.0) + np.log1p(np.exp(-np.abs(margins)))


class GlmProblem:
    """Logistic or squared loss over a dense dataset, optionally scaled.

    ``scaling`` may be a :class:`ScalingSpec`, a positive vector, or None.
    """

    def __init__(self, dataset: Dataset, loss: LossKind = LossKind.LOGISTIC, scaling=None):
        self.dataset = dataset
        self.loss = loss
        if isinstance(scaling, ScalingSpec):
            scaling = scaling.v_diag
        if scaling is not None:
            scaling = np.asarray(scaling, dtype=np.float64)
            if scaling.shape != (dataset.d,):
                raise DimensionError(
                    f"scaling has length {scaling.shape}, dataset has d={dataset.d}"
                )
            if not np.all(scaling > 0):
                raise ValueError("scaling entries must be positive")
        self.scaling = scaling

    @property
    def d(self) -> int:
        return self.dataset.d

    @property
    def n(self) -> int:
        return self.dataset.n

    def _check_point(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.d,):
            raise DimensionError(f"point has shape {w.shape}, expected ({self.d},)")
        if not np.all(np.isfinite(w)):
            raise EvaluationError("cannot evaluate at a non-finite point")
        return w

    def _effective(self, w: np.ndarray) -> np.ndarray:
        return w if self.scaling is None else self.scaling * w

    def objective(self, w) -> float:
        w = self._check_point(w)
        z = self.dataset.x @ self._effective(w)
        if self.loss is LossKind.LOGISTIC:
            return float(np.mean(_logistic_loss(self.dataset.y * z)))
        return float(np.mean((z - self.dataset.y) ** 2))

    def _loss_derivative(self, z: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.loss is LossKind.LOGISTIC:
            # phi'(z) = -y / (1 + e^{y z}) = -y * sigmoid(-y z)
            return -y * _stable_sigmoid(-y * z)
        return 2.0 * (z - y)

    def _gradient_over(self, w: np.ndarray, idx) -> np.ndarray:
        x = self.dataset.x if idx is None else self.dataset.x[idx]
        y = self.dataset.y if idx is None else self.dataset.y[idx]
        z = x @ self._effective(w)
        g = x.T @ self._loss_derivative(z, y) / x.shape[0]
        return g if self.scaling is None else self.scaling * g

    def gradient(self, w) -> np.ndarray:
        """Exact full gradient, averaged over all n samples."""
        return self._gradient_over(self._check_point(w), None)

    def batch_gradient(self, w, idx) -> np.ndarray:
        """Mean of per-sample gradients over the given index list."""
        return self._gradient_over(self._check_point(w), np.asarray(idx))

    def stochastic_gradient(self, w, rng: Rng, batch: int) -> GradSample:
        """Unbiased mini-batch gradient; indices drawn i.i.d. with replacement."""
        idx = sample_batch(rng, self.n, batch)
        return GradSample(g=self.batch_gradient(w, idx), batch_indices=idx)

    def accuracy(self, w) -> float:
        """Fraction of samples with y_i * (x_i . V w) >= 0 (ties correct)."""
        if self.loss is not LossKind.LOGISTIC:
            raise EvaluationError("accuracy is only defined for the logistic loss")
        w = self._check_point(w)
        margins = self.dataset.y * (self.dataset.x @ self._effective(w))
        return float(np.mean(margins >= 0.0))

    def gradient_norm_bound(self) -> float:
        """gamma with ||grad f(w)|| <= gamma for all w (logistic only).

        |phi'| <= 1 for the logistic loss, so the gradient norm is bounded
        by the largest effective feature-row norm.
        """
        if self.loss is not LossKind.LOGISTIC:
            raise EvaluationError("no uniform gradient bound for the squared loss")
        x = self.dataset.x if self.scaling is None else self.dataset.x * self.scaling
        return float(np.max(np.linalg.norm(x, axis=1)))


class QuadraticProblem:
    """f(w) = 0.5 w.A w - b.w with A symmetric positive semidefinite."""

    def __init__(self, a, b=None):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"A must be square, got {a.shape}")
        self.a = 0.5 * (a + a.T)
        self.b = np.zeros(a.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
        if self.b.shape != (a.shape[0],):
            raise DimensionError("b must match A's dimension")

    @classmethod
    def diagonal(cls, diag, b=None) -> "QuadraticProblem":
        return cls(np.diag(np.asarray(diag, dtype=np.float64)), b)

    @property
    def d(self) -> int:
        return self.a.shape[0]

    def objective(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        return float(0.5 * w @ self.a @ w - self.b @ w)

    def gradient(self, w) -> np.ndarray:
        return self.a @ np.asarray(w, dtype=np.float64) - self.b

    def w_star(self) -> np.ndarray:
        try:
            return np.linalg.solve(self.a, self.b)
        except np.linalg.LinAlgError as exc:
            raise EvaluationError(f"minimizer unavailable (singular A): {exc}") from exc

    def optimal_value(self) -> float:
        return self.objective(self.w_star())


class RosenbrockProblem:
    """Chained Rosenbrock function; non-convex, minimum 0 at the all-ones point."""

    def __init__(self, d: int):
        if d < 2:
            raise ValueError("Rosenbrock needs d >= 2")
        self.d = d

    def objective(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        head, tail = w[:-1], w[1:]
        return float(np.sum(100.0 * (tail - head**2) ** 2 + (1.0 - head) ** 2))

    def gradient(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        g = np.zeros_like(w)
        head, tail = w[:-1], w[1:]
        g[:-1] += -400.0 * head * (tail - head**2) - 2.0 * (1.0 - head)
        g[1:] += 200.0 * (tail - head**2)
        return g


def smoothness_bound(problem, rel_tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Smoothness constant L of a quadratic: largest eigenvalue of A.

    Power iteration with Rayleigh-quotient stopping at relative ``rel_tol``.
    Other problem types have no global constant and are rejected.
    """
    if not isinstance(problem, QuadraticProblem):
        raise EvaluationError(
            f"no global smoothness constant for {type(problem).__name__}; "
            "supply a box-local estimate instead"
        )
    a = problem.a
    v = np.ones(problem.d) / np.sqrt(problem.d)
    lam = float(v @ a @ v)
    for _ in range(max_iter):
        av = a @ v
        norm = np.linalg.norm(av)
        if norm == 0.0:
            return 0.0
        v = av / norm
        new_lam = float(v @ a @ v)
        if abs(new_lam - lam) <= rel_tol * max(1.0, abs(new_lam)):
            return new_lam
        lam = new_lam
    return lam

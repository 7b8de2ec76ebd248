"""Optimizer state machines sharing one step interface, plus the run loop.

All five methods consume a gradient estimate g_t and return the vector of
per-coordinate step sizes nu_t they actually applied:

* kate          w -= beta * sqrt(eta*b^2 + sum g^2/b^2) / b^2 * g,
                with b_t^2 = delta + sum_{tau<=t} g_tau^2
* adagrad       w -= beta / sqrt(delta + sum g^2) * g   (coordinate-wise)
* adagradnorm   w -= beta / sqrt(delta + sum ||g||^2) * g
* sgd_decay     w -= beta / (delta * sqrt(t+1)) * g     (t zero-based)
* sgd_constant  w -= beta / delta * g

kate's numerator m_t^2 is maintained in the closed form eta*b_t^2 + q_t with
q_t = sum_{tau<=t} g_tau^2 / b_tau^2; for delta = 0 this coincides exactly
with the recursive form m_t^2 = m_{t-1}^2 + eta g_t^2 + g_t^2/b_t^2, and it
stays well-defined for the delta > 0 experimental variant.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Rng, sample_batch
from .problems import GlmProblem, LossKind

__all__ = [
    "AdaGrad",
    "AdaGradNorm",
    "HyperParams",
    "Kate",
    "OPTIMIZER_NAMES",
    "RunResult",
    "SgdConstant",
    "SgdDecay",
    "StepError",
    "TraceRow",
    "grad_init_eta",
    "make_optimizer",
    "run",
]

log = logging.getLogger(__name__)

# A run is flagged as diverged once the objective exceeds this factor times
# (1 + |f(w_0)|). Saturating losses (logistic) blow up to huge but finite
# values, so a pure non-finite test would miss them.
DIVERGENCE_FACTOR = 1e6
# Hard abort threshold: beyond this the trace ends (terminal event).
DIVERGENCE_ABORT = 1e300


class StepError(RuntimeError):
    """Optimizer step received or produced non-finite values."""


@dataclass(frozen=True)
class HyperParams:
    """beta > 0, eta >= 0 (scalar broadcast or per-coordinate), delta >= 0."""

    beta: float
    eta: float | np.ndarray = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if not (np.isfinite(self.delta) and self.delta >= 0):
            raise ValueError(f"delta must be nonnegative and finite, got {self.delta}")
        eta = np.asarray(self.eta, dtype=np.float64)
        if np.any(eta < 0) or not np.all(np.isfinite(eta)):
            raise ValueError("eta entries must be nonnegative and finite")

    def eta_vector(self, d: int) -> np.ndarray:
        eta = np.asarray(self.eta, dtype=np.float64)
        if eta.ndim == 0:
            return np.full(d, float(eta))
        if eta.shape != (d,):
            raise ValueError(f"eta has shape {eta.shape}, expected ({d},) or scalar")
        return eta.copy()

    def eta_min(self, d: int) -> float:
        """eta_0 = min_k eta[k], the quantity entering the deterministic bound."""
        return float(np.min(self.eta_vector(d)))


def _check_gradient(g) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise StepError("non-finite gradient passed to optimizer step")
    return g


class _Optimizer:
    """Shared bookkeeping: current iterate, step counter, gradient checks."""

    def __init__(self, w0, hp: HyperParams):
        self.w = np.array(w0, dtype=np.float64, copy=True)
        if self.w.ndim != 1:
            raise ValueError("w0 must be a vector")
        self.hp = hp
        self.t = 0

    @property
    def d(self) -> int:
        return self.w.shape[0]

    def step(self, g) -> np.ndarray:
        g = _check_gradient(g)
        if g.shape != self.w.shape:
            raise ValueError(f"gradient shape {g.shape} != iterate shape {self.w.shape}")
        nu = self._step_sizes(g)
        if not np.all(np.isfinite(nu)):
            raise StepError("step sizes overflowed (accumulator out of range)")
        self.w -= nu * g
        self.t += 1
        return nu

    def _step_sizes(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Kate(_Optimizer):
    """Square-root-free AdaGrad with the growing compensating numerator."""

    def __init__(self, w0, hp: HyperParams):
        super().__init__(w0, hp)
        self.eta = hp.eta_vector(self.d)
        self.s_sq = np.zeros(self.d)  # sum of squared gradients per coordinate
        self.q = np.zeros(self.d)     # sum of g^2 / b^2 per coordinate

    def _step_sizes(self, g: np.ndarray) -> np.ndarray:
        self.s_sq += g * g
        b_sq = self.hp.delta + self.s_sq
        active = b_sq > 0.0
        # Coordinates with b^2 = 0 have seen only zero gradients: they take a
        # zero step and accumulate nothing (the unique continuous extension).
        self.q[active] += g[active] ** 2 / b_sq[active]
        m_sq = self.eta * b_sq + self.q
        nu = np.zeros(self.d)
        nu[active] = self.hp.beta * np.sqrt(m_sq[active]) / b_sq[active]
        return nu

    def b_sq(self) -> np.ndarray:
        return self.hp.delta + self.s_sq

    def m_sq(self) -> np.ndarray:
        return self.eta * self.b_sq() + self.q


class AdaGrad(_Optimizer):
    def __init__(self, w0, hp: HyperParams):
        super().__init__(w0, hp)
        self.acc = np.zeros(self.d)

    def _step_sizes(self, g: np.ndarray) -> np.ndarray:
        self.acc += g * g
        denom_sq = self.hp.delta + self.acc
        nu = np.zeros(self.d)
        active = denom_sq > 0.0
        nu[active] = self.hp.beta / np.sqrt(denom_sq[active])
        return nu


class AdaGradNorm(_Optimizer):
    def __init__(self, w0, hp: HyperParams):
        super().__init__(w0, hp)
        self.acc = 0.0

    def _step_sizes(self, g: np.ndarray) -> np.ndarray:
        self.acc += float(g @ g)
        denom_sq = self.hp.delta + self.acc
        scale = self.hp.beta / np.sqrt(denom_sq) if denom_sq > 0 else 0.0
        return np.full(self.d, scale)


class SgdDecay(_Optimizer):
    def __init__(self, w0, hp: HyperParams):
        if hp.delta <= 0:
            raise ValueError("sgd_decay requires delta > 0")
        super().__init__(w0, hp)

    def _step_sizes(self, g: np.ndarray) -> np.ndarray:
        scale = self.hp.beta / (self.hp.delta * np.sqrt(self.t + 1.0))
        return np.full(self.d, scale)


class SgdConstant(_Optimizer):
    def __init__(self, w0, hp: HyperParams):
        if hp.delta <= 0:
            raise ValueError("sgd_constant requires delta > 0")
        super().__init__(w0, hp)

    def _step_sizes(self, g: np.ndarray) -> np.ndarray:
        return np.full(self.d, self.hp.beta / self.hp.delta)


_OPTIMIZERS = {
    "kate": Kate,
    "adagrad": AdaGrad,
    "adagradnorm": AdaGradNorm,
    "sgd_decay": SgdDecay,
    "sgd_constant": SgdConstant,
}

OPTIMIZER_NAMES = tuple(_OPTIMIZERS)


def make_optimizer(kind: str, w0, hp: HyperParams) -> _Optimizer:
    try:
        cls = _OPTIMIZERS[kind]
    except KeyError:
        raise ValueError(
            f"unknown optimizer {kind!r}; choose from {', '.join(OPTIMIZER_NAMES)}"
        ) from None
    return cls(w0, hp)


def grad_init_eta(problem, w0=None) -> np.ndarray:
    """eta[k] = 1 / (grad_k f(w0))^2, the gradient-covariant initialization.

    Coordinates where the initial gradient vanishes get eta[k] = 0 (the
    reciprocal is undefined there); a warning is logged since those
    coordinates lose their eta * b^2 term.
    """
    w0 = np.zeros(problem.d) if w0 is None else np.asarray(w0, dtype=np.float64)
    g0 = problem.gradient(w0)
    eta = np.zeros_like(g0)
    nonzero = g0 != 0.0
    eta[nonzero] = 1.0 / g0[nonzero] ** 2
    if not np.all(nonzero):
        zeros = np.flatnonzero(~nonzero)
        log.warning(
            "grad-init eta: %d coordinate(s) %s have zero initial gradient; "
            "using eta=0 there",
            zeros.size,
            zeros.tolist()[:8],
        )
    return eta


@dataclass
class TraceRow:
    """One logged iteration; None fields serialize as empty CSV cells."""

    t: int
    fval: float
    accuracy: float | None
    grad_norm_sq: float
    gnorm_weighted: float | None
    nu_min: float | None
    nu_max: float | None
    diverged: bool


@dataclass
class RunResult:
    rows: list[TraceRow]
    diverged: bool
    w: np.ndarray
    steps_taken: int
    nu_history: np.ndarray | None = None
    grad_history: np.ndarray | None = None

    @property
    def final_fval(self) -> float:
        return self.rows[-1].fval

    def row_at(self, t: int) -> TraceRow | None:
        for row in self.rows:
            if row.t == t:
                return row
        return None


def _metrics(problem, w) -> tuple[float, float | None, float, float | None]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fval = problem.objective(w)
        gfull = problem.gradient(w)
        grad_norm_sq = float(gfull @ gfull)
    accuracy = None
    gnorm_weighted = None
    if isinstance(problem, GlmProblem):
        if problem.loss is LossKind.LOGISTIC:
            accuracy = problem.accuracy(w)
        if problem.scaling is not None:
            ratio = gfull / problem.scaling
            gnorm_weighted = float(ratio @ ratio)
    return fval, accuracy, grad_norm_sq, gnorm_weighted


def run(
    problem,
    optimizer: str,
    hp: HyperParams,
    T: int,
    batch: int | None = None,
    seed: int = 0,
    log_every: int = 1,
    w0=None,
    checkpoints=(),
    collect_history: bool = False,
) -> RunResult:
    """Drive ``T`` optimizer steps from w0 (default 0), logging a trace.

    ``batch=None`` runs deterministic full-gradient steps; otherwise each
    step averages a fresh uniform-with-replacement mini-batch. Rows are
    logged at t = 0, every ``log_every`` steps, at every t in
    ``checkpoints``, and at t = T. A non-finite gradient or objective (or
    |f| > 1e300) ends the trace early with the diverged flag set; merely
    exploding objectives keep running but are flagged once f exceeds
    1e6 * (1 + |f(w_0)|).
    """
    if T < 1:
        raise ValueError("iteration budget T must be >= 1")
    if log_every < 1:
        raise ValueError("log_every must be >= 1")
    if batch is not None and not isinstance(problem, GlmProblem):
        raise ValueError("mini-batch sampling requires a dataset-backed problem")

    w0 = np.zeros(problem.d) if w0 is None else np.asarray(w0, dtype=np.float64)
    opt = make_optimizer(optimizer, w0, hp)
    rng = Rng(seed)
    checkpoints = set(checkpoints)

    nu_hist = np.zeros((T, problem.d)) if collect_history else None
    grad_hist = np.zeros((T, problem.d)) if collect_history else None

    f0, acc0, gns0, gnw0 = _metrics(problem, opt.w)
    explode_at = DIVERGENCE_FACTOR * (1.0 + abs(f0))
    rows = [TraceRow(0, f0, acc0, gns0, gnw0, None, None, False)]
    diverged = False
    steps = 0

    for t in range(T):
        if batch is None:
            g = problem.gradient(opt.w)
        else:
            g = problem.batch_gradient(opt.w, sample_batch(rng, problem.n, batch))
        if not np.all(np.isfinite(g)):
            # Terminal event: the t-th step was never taken, so the trace
            # ends at the current iterate with the diverged flag set.
            diverged = True
            if rows[-1].t == t:
                rows[-1].diverged = True
            else:
                fval, acc, gns, gnw = _metrics(problem, opt.w)
                rows.append(TraceRow(t, fval, acc, gns, gnw, None, None, True))
            break
        nu = opt.step(g)
        steps = t + 1
        if collect_history:
            nu_hist[t] = nu
            grad_hist[t] = g
        if steps % log_every == 0 or steps == T or steps in checkpoints:
            fval, acc, gns, gnw = _metrics(problem, opt.w)
            if not np.isfinite(fval) or abs(fval) > DIVERGENCE_ABORT:
                diverged = True
                rows.append(
                    TraceRow(steps, fval, acc, gns, gnw, float(nu.min()), float(nu.max()), True)
                )
                break
            if abs(fval) > explode_at:
                diverged = True
            rows.append(
                TraceRow(steps, fval, acc, gns, gnw, float(nu.min()), float(nu.max()), diverged)
            )

    if collect_history and steps < T:
        nu_hist = nu_hist[:steps]
        grad_hist = grad_hist[:steps]
    return RunResult(
        rows=rows,
        diverged=diverged,
        w=opt.w.copy(),
        steps_taken=steps,
        nu_history=nu_hist,
        grad_history=grad_hist,
    )

"""Mechanical checks of the provable properties of the KATE step rule.

Four facts about the algorithm have runtime-checkable forms:

* scale-invariance: from w0 = 0 with delta = 0 and a scale-covariant eta,
  the loss trajectory on features x_i and on features V x_i is identical,
  the iterates satisfy w_t = V w_t^V, and the V^-2-weighted gradient norm
  of the scaled run equals the plain gradient norm of the unscaled run;
* monotone steps: with delta = 0 every per-coordinate step size nu_t[k]
  is nonincreasing in t;
* log-sum bound: with delta = 0, sum_t g_t^2[k]/b_t^2[k] <=
  log(b_T^2[k]/b_0^2[k]) + 1 per coordinate;
* deterministic bound: full-gradient runs with nu_0[k] <= 1/L satisfy
  min_t ||grad f(w_t)||^2 <= (2(f(w0)-f*)/(sqrt(eta_0) beta)
  + sum_k b_0[k])^2 / (T+1).

The checks here run the algorithm and compare against those statements
directly; they share no shortcuts with the step implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Rng, sample_batch
from .data import Dataset, ScalingSpec
from .optim import HyperParams, TraceRow, grad_init_eta, make_optimizer, run
from .problems import GlmProblem, LossKind, QuadraticProblem, smoothness_bound

__all__ = [
    "BoundReport",
    "InvarianceReport",
    "RateReport",
    "DeterministicBoundReport",
    "check_invariance",
    "check_logsum_bound",
    "check_monotone_steps",
    "check_stochastic_rate",
    "check_deterministic_bound",
    "finite_diff_gradient",
    "invariance_tolerance",
]


def finite_diff_gradient(problem, w, rel_h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient with per-coordinate step h_k = rel_h*(1+|w_k|)."""
    w = np.asarray(w, dtype=np.float64)
    g = np.zeros_like(w)
    for k in range(w.shape[0]):
        h = rel_h * (1.0 + abs(w[k]))
        wp = w.copy()
        wm = w.copy()
        wp[k] += h
        wm[k] -= h
        fp = problem.objective(wp)
        fm = problem.objective(wm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"objective non-finite near coordinate {k}")
        g[k] = (fp - fm) / (2.0 * h)
    return g


@dataclass
class InvarianceReport:
    """Worst-case relative deviations between a run and its rescaled twin."""

    max_rel_f_dev: float
    max_rel_w_dev: float
    max_rel_gnorm_dev: float
    T: int
    optimizer: str
    eta_mode: str
    exact: bool  # True when the identity is expected to hold (up to rounding)

    def to_dict(self) -> dict:
        return {
            "max_rel_f_dev": self.max_rel_f_dev,
            "max_rel_w_dev": self.max_rel_w_dev,
            "max_rel_gnorm_dev": self.max_rel_gnorm_dev,
            "T": self.T,
            "optimizer": self.optimizer,
            "eta_mode": self.eta_mode,
            "exact": self.exact,
        }


def invariance_tolerance(T: int) -> float:
    """Rounding budget for the invariance identities at horizon T.

    Exact in real arithmetic; the tolerance covers floating-point
    amplification under scalings up to e^10 per coordinate.
    """
    return 1e-9 if T <= 100 else 1e-5


def _resolve_invariance_eta(eta, unscaled, scaled, v_diag, d):
    """Per-run eta vectors plus a mode tag; see the constant-eta caveat below.

    A shared constant eta > 0 is only approximately scale-covariant, so that
    mode is reported without a pass expectation. An explicit eta vector
    cannot mean the same thing on both scalings and is rejected unless V = I.
    """
    w0 = np.zeros(d)
    if isinstance(eta, str):
        if eta != "grad_init":
            raise ValueError(f"unknown eta mode {eta!r}")
        return grad_init_eta(unscaled, w0), grad_init_eta(scaled, w0), "grad_init", True
    eta_arr = np.asarray(eta, dtype=np.float64)
    if eta_arr.ndim == 0:
        value = float(eta_arr)
        exact = value == 0.0
        mode = "zero" if exact else "constant(approximate)"
        return np.full(d, value), np.full(d, value), mode, exact
    if not np.all(v_diag == 1.0):
        raise ValueError(
            "a fixed eta vector is not comparable across scalings; "
            "use 'grad_init', a scalar, or V = I"
        )
    return eta_arr.copy(), eta_arr.copy(), "vector", True


def check_invariance(
    dataset: Dataset,
    scaling: ScalingSpec,
    hp: HyperParams,
    T: int,
    batch: int,
    seed: int,
    eta="grad_init",
    optimizer: str = "kate",
    collect_traces: bool = False,
):
    """Run the unscaled and V-scaled problems in lockstep and compare.

    Both runs start at w0 = 0 and consume the *same* mini-batch index
    sequence, so in exact arithmetic the logistic losses coincide for the
    KATE rule with delta = 0. Returns an :class:`InvarianceReport`, or
    ``(report, unscaled_rows, scaled_rows)`` when ``collect_traces``.
    """
    if hp.delta != 0:
        raise ValueError("scale invariance requires delta = 0")
    v_diag = scaling.v_diag if isinstance(scaling, ScalingSpec) else np.asarray(scaling)
    unscaled = GlmProblem(dataset, LossKind.LOGISTIC)
    scaled = GlmProblem(dataset, LossKind.LOGISTIC, scaling=v_diag)
    d = dataset.d

    eta_u, eta_s, mode, exact = _resolve_invariance_eta(eta, unscaled, scaled, v_diag, d)
    opt_u = make_optimizer(optimizer, np.zeros(d), HyperParams(hp.beta, eta_u, 0.0))
    opt_s = make_optimizer(optimizer, np.zeros(d), HyperParams(hp.beta, eta_s, 0.0))

    rng = Rng(seed)
    dev_f = dev_w = dev_g = 0.0
    rows_u: list[TraceRow] = []
    rows_s: list[TraceRow] = []

    def compare(t: int, nu_u, nu_s):
        nonlocal dev_f, dev_w, dev_g
        f_u = unscaled.objective(opt_u.w)
        f_s = scaled.objective(opt_s.w)
        g_u = unscaled.gradient(opt_u.w)
        g_s = scaled.gradient(opt_s.w)
        gn_u = float(g_u @ g_u)
        ratio = g_s / v_diag
        gn_s_weighted = float(ratio @ ratio)
        dev_f = max(dev_f, abs(f_u - f_s) / (1.0 + abs(f_u)))
        w_gap = float(np.max(np.abs(opt_u.w - v_diag * opt_s.w)))
        dev_w = max(dev_w, w_gap / (1.0 + float(np.max(np.abs(opt_u.w)))))
        dev_g = max(dev_g, abs(gn_u - gn_s_weighted) / (1.0 + gn_u))
        if collect_traces:
            nu_min_u = None if nu_u is None else float(np.min(nu_u))
            nu_max_u = None if nu_u is None else float(np.max(nu_u))
            nu_min_s = None if nu_s is None else float(np.min(nu_s))
            nu_max_s = None if nu_s is None else float(np.max(nu_s))
            rows_u.append(
                TraceRow(t, f_u, unscaled.accuracy(opt_u.w), gn_u, None,
                         nu_min_u, nu_max_u, False)
            )
            rows_s.append(
                TraceRow(t, f_s, scaled.accuracy(opt_s.w), float(g_s @ g_s),
                         gn_s_weighted, nu_min_s, nu_max_s, False)
            )

    compare(0, None, None)
    for t in range(T):
        idx = sample_batch(rng, dataset.n, batch)
        g_u = unscaled.batch_gradient(opt_u.w, idx)
        g_s = scaled.batch_gradient(opt_s.w, idx)
        nu_u = opt_u.step(g_u)
        nu_s = opt_s.step(g_s)
        compare(t + 1, nu_u, nu_s)

    report = InvarianceReport(
        max_rel_f_dev=dev_f,
        max_rel_w_dev=dev_w,
        max_rel_gnorm_dev=dev_g,
        T=T,
        optimizer=optimizer,
        eta_mode=mode,
        exact=exact and optimizer == "kate",
    )
    if collect_traces:
        return report, rows_u, rows_s
    return report


def check_monotone_steps(nu_history: np.ndarray) -> float:
    """Worst relative step increase max_{t,k} (nu_{t+1}[k]-nu_t[k])/nu_t[k].

    Defined over coordinates with nu_t[k] > 0; a coordinate whose step is
    still zero (no nonzero gradient seen yet) enters the comparison only
    from its first positive step onward. Monotone runs give a value <= 0
    up to rounding; the acceptance threshold is 1e-12.
    """
    nu = np.asarray(nu_history, dtype=np.float64)
    if nu.ndim != 2 or nu.shape[0] == 0:
        raise ValueError("need a nonempty (T, d) step-size history")
    if nu.shape[0] == 1:
        return 0.0
    prev = nu[:-1]
    nxt = nu[1:]
    active = prev > 0.0
    if not np.any(active):
        return 0.0
    ratios = (nxt[active] - prev[active]) / prev[active]
    return float(np.max(ratios))


@dataclass
class BoundReport:
    """An inequality lhs <= rhs with its slack."""

    lhs: float
    rhs: float

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "satisfied": self.satisfied,
            "slack": self.slack,
        }


def check_logsum_bound(grad_history: np.ndarray) -> dict[int, BoundReport]:
    """Per-coordinate check of sum_t g_t^2/b_t^2 <= log(b_T^2/b_0^2) + 1.

    ``grad_history`` holds the realized gradients of a delta = 0 run, one
    row per step. Coordinates with b_0^2 = 0 (zero first gradient) are
    skipped: the bound's reference point is undefined there.
    """
    g = np.asarray(grad_history, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] == 0:
        raise ValueError("need a nonempty (T, d) gradient history")
    g_sq = g * g
    b_sq = np.cumsum(g_sq, axis=0)
    reports: dict[int, BoundReport] = {}
    for k in range(g.shape[1]):
        if b_sq[0, k] <= 0.0:
            continue
        lhs = float(np.sum(g_sq[:, k] / b_sq[:, k]))
        rhs = float(np.log(b_sq[-1, k] / b_sq[0, k]) + 1.0)
        reports[k] = BoundReport(lhs=lhs, rhs=rhs)
    return reports


@dataclass
class DeterministicBoundReport:
    bound: BoundReport
    precondition_met: bool  # nu_0[k] <= 1/L held on the realized first step
    nu0_max: float
    smoothness: float
    T: int

    def to_dict(self) -> dict:
        out = self.bound.to_dict()
        out.update(
            {
                "precondition_met": self.precondition_met,
                "nu0_max": self.nu0_max,
                "smoothness": self.smoothness,
                "T": self.T,
            }
        )
        return out


def check_deterministic_bound(
    problem: QuadraticProblem, hp: HyperParams, T: int, w0=None
) -> DeterministicBoundReport:
    """Deterministic-bound check on a quadratic with known minimum.

    Runs delta = 0 full-gradient KATE for T steps and compares
    min_{t<=T} ||grad f(w_t)||^2 against
    (2 (f(w0)-f*) / (sqrt(eta_0) beta) + sum_k |grad_k f(w0)|)^2 / (T+1).
    Coordinates with zero initial gradient would stay frozen, so w0 is
    nudged there before the run. The nu_0 <= 1/L precondition is checked
    on the realized first step and reported, not enforced.
    """
    if hp.delta != 0:
        raise ValueError("the deterministic bound is stated for delta = 0")
    d = problem.d
    eta = hp.eta_vector(d)
    eta0 = float(np.min(eta))
    if eta0 <= 0:
        raise ValueError("the bound requires eta[k] > 0 for all k")
    w0 = np.zeros(d) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    g0 = problem.gradient(w0)
    if np.all(g0 == 0.0):
        # Already at a stationary point: every step is a no-op and both sides
        # of the bound are zero (b_0 = 0 and f(w0) = f*).
        return DeterministicBoundReport(
            bound=BoundReport(lhs=0.0, rhs=0.0),
            precondition_met=True,
            nu0_max=0.0,
            smoothness=smoothness_bound(problem),
            T=T,
        )
    frozen = g0 == 0.0
    if np.any(frozen):
        w0[frozen] += 1e-3 * (1.0 + np.abs(w0[frozen]))
        g0 = problem.gradient(w0)

    L = smoothness_bound(problem)
    f_star = problem.optimal_value()
    f0 = problem.objective(w0)

    result = run(
        problem, "kate", hp, T=T, batch=None, w0=w0, log_every=1, collect_history=True
    )
    min_gns = min(row.grad_norm_sq for row in result.rows)
    nu0_max = float(np.max(result.nu_history[0]))
    precondition_met = L > 0 and nu0_max <= (1.0 / L) * (1.0 + 1e-12)

    b0_sum = float(np.sum(np.abs(g0)))
    rhs = (2.0 * (f0 - f_star) / (np.sqrt(eta0) * hp.beta) + b0_sum) ** 2 / (T + 1.0)
    return DeterministicBoundReport(
        bound=BoundReport(lhs=min_gns, rhs=float(rhs)),
        precondition_met=bool(precondition_met),
        nu0_max=nu0_max,
        smoothness=L,
        T=T,
    )


@dataclass
class RateReport:
    """Seed-averaged min gradient norms at a short and a long horizon."""

    mean_short: float
    mean_long: float
    stderr_diff: float
    n_seeds: int
    T_short: int
    T_long: int
    gamma: float
    max_observed_grad_norm: float

    @property
    def rate_ok(self) -> bool:
        # Longer horizons may not increase the seed-mean min gradient norm
        # beyond two standard errors of the paired differences.
        return self.mean_long <= self.mean_short + 2.0 * self.stderr_diff

    @property
    def gamma_ok(self) -> bool:
        return self.max_observed_grad_norm <= self.gamma

    def to_dict(self) -> dict:
        return {
            "mean_short": self.mean_short,
            "mean_long": self.mean_long,
            "stderr_diff": self.stderr_diff,
            "n_seeds": self.n_seeds,
            "T_short": self.T_short,
            "T_long": self.T_long,
            "gamma": self.gamma,
            "max_observed_grad_norm": self.max_observed_grad_norm,
            "rate_ok": self.rate_ok,
            "gamma_ok": self.gamma_ok,
        }


def check_stochastic_rate(
    problem: GlmProblem,
    hp: HyperParams,
    T_short: int,
    T_long: int,
    batch: int,
    seeds,
) -> RateReport:
    """Qualitative stochastic-rate check over a sweep of seeds.

    For each seed the same trajectory provides min_{t<=T} ||grad f(w_t)||
    at both horizons (the long run extends the short one), so the paired
    differences are the statistic of interest. Also instruments the
    trajectory-wide gradient bound gamma = max_i ||x_i||.
    """
    if not 0 < T_short < T_long:
        raise ValueError("need 0 < T_short < T_long")
    gamma = problem.gradient_norm_bound()
    mins_short = []
    mins_long = []
    max_norm = 0.0
    for seed in seeds:
        result = run(problem, "kate", hp, T=T_long, batch=batch, seed=seed, log_every=1)
        norms = np.sqrt([row.grad_norm_sq for row in result.rows])
        ts = np.asarray([row.t for row in result.rows])
        mins_short.append(float(np.min(norms[ts <= T_short])))
        mins_long.append(float(np.min(norms)))
        max_norm = max(max_norm, float(np.max(norms)))
    mins_short = np.asarray(mins_short)
    mins_long = np.asarray(mins_long)
    diffs = mins_long - mins_short
    n = diffs.size
    stderr = float(np.std(diffs, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return RateReport(
        mean_short=float(np.mean(mins_short)),
        mean_long=float(np.mean(mins_long)),
        stderr_diff=stderr,
        n_seeds=n,
        T_short=T_short,
        T_long=T_long,
        gamma=gamma,
        max_observed_grad_norm=max_norm,
    )

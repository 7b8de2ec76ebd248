"""Scale-invariant adaptive gradient optimization: KATE, baselines, checks.

The package splits into a numerical substrate (:mod:`kateopt.core`),
objectives (:mod:`kateopt.problems`), optimizer state machines and the run
loop (:mod:`kateopt.optim`), dataset handling (:mod:`kateopt.data`), checks
of the method's provable properties (:mod:`kateopt.verify`), and the
experiment harness behind the ``opt`` CLI (:mod:`kateopt.harness`).
"""

from .core import Rng, elementwise, sample_batch
from .data import Dataset, ScalingSpec, gen_synthetic, parse_libsvm, serialize_libsvm
from .optim import HyperParams, OPTIMIZER_NAMES, grad_init_eta, make_optimizer, run
from .problems import (
    GlmProblem,
    LossKind,
    QuadraticProblem,
    RosenbrockProblem,
    smoothness_bound,
)
from .verify import (
    check_invariance,
    check_logsum_bound,
    check_monotone_steps,
    check_stochastic_rate,
    check_deterministic_bound,
    finite_diff_gradient,
)

__all__ = [
    "Dataset",
    "GlmProblem",
    "HyperParams",
    "LossKind",
    "OPTIMIZER_NAMES",
    "QuadraticProblem",
    "Rng",
    "RosenbrockProblem",
    "ScalingSpec",
    "check_invariance",
    "check_logsum_bound",
    "check_monotone_steps",
    "check_stochastic_rate",
    "check_deterministic_bound",
    "elementwise",
    "finite_diff_gradient",
    "gen_synthetic",
    "grad_init_eta",
    "make_optimizer",
    "parse_libsvm",
    "run",
    "sample_batch",
    "serialize_libsvm",
    "smoothness_bound",
]

__version__ = "0.1.0"

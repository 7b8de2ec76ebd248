"""Robustness to the accumulator initializer delta.

Every method here has a step size built from beta and delta. Plain SGD needs
delta to encode the smoothness constant: too small and it diverges. The
adaptive methods self-correct, and kate converges fast across the whole
sweep. This is a desk-scale version of the benchmark grid; bump T and the
grid for the full picture (see the `opt sweep` command).
"""

import numpy as np

from kateopt import GlmProblem, HyperParams, LossKind, Rng, gen_synthetic, run

dataset, scaling, w_star = gen_synthetic(Rng(1), n=1000, d=20)
problem = GlmProblem(dataset, LossKind.LOGISTIC, scaling=scaling)
beta = problem.objective(np.zeros(20)) - problem.objective(w_star)
print(f"beta = f(w0) - f(w*) = {beta:.4f}\n")

optimizers = ("kate", "adagrad", "adagradnorm", "sgd_decay", "sgd_constant")
print(f"{'delta':>8} | " + " | ".join(f"{name:>12}" for name in optimizers))
for delta in (1e-8, 1e-4, 1.0, 1e4):
    cells = []
    for name in optimizers:
        hp = HyperParams(beta=beta, eta=1.0, delta=delta)
        result = run(problem, name, hp, T=3000, batch=10, seed=51, log_every=1000)
        cells.append("diverged" if result.diverged else f"{result.final_fval:.2e}")
    print(f"{delta:>8.0e} | " + " | ".join(f"{c:>12}" for c in cells))

print("\nsmall delta sinks plain SGD (step ~ beta/delta) while the adaptive "
      "methods shrug it off.")

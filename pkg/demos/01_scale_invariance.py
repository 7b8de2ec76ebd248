"""Scale-invariance demo.

Fits logistic regression on synthetic data twice: once on raw features and
once with every feature column rescaled by a random factor between e^-10 and
e^10. With the square-root-free step rule, the two loss trajectories are the
same sequence of numbers, and the iterates agree through w = V w_scaled.
AdaGrad, run the same way, visibly loses this property.
"""

import numpy as np

from kateopt import HyperParams, Rng, check_invariance, gen_synthetic

dataset, scaling, w_star = gen_synthetic(Rng(0), n=1000, d=20)
print(f"dataset: n={dataset.n}, d={dataset.d}, "
      f"feature scalings span [{scaling.v_diag.min():.2e}, {scaling.v_diag.max():.2e}]")

hp = HyperParams(beta=0.01, eta=0.0, delta=0.0)
for optimizer in ("kate", "adagrad"):
    report = check_invariance(
        dataset, scaling, hp, T=2000, batch=10, seed=0,
        eta="grad_init", optimizer=optimizer,
    )
    print(f"\n{optimizer}: worst relative deviation over {report.T} steps")
    print(f"  loss values     {report.max_rel_f_dev:.3e}")
    print(f"  iterate identity {report.max_rel_w_dev:.3e}")
    print(f"  weighted |grad|^2 {report.max_rel_gnorm_dev:.3e}")

print("\nkate's deviations are pure rounding; adagrad's are O(1): the "
      "trajectory genuinely depends on how the data was scaled.")

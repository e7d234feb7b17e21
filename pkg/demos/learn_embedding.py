"""Learning a two-dimensional embedding of a ten-dimensional function.

A function that varies only along two hidden directions of [-1, 1]^10 is
probed 30 times. BALD picks each query to be maximally informative about
the embedding; the random design spends the same budget blindly. After the
budget is spent we compare the subspaces the two runs recovered with the
true one, and their test error. Only the subspace is identifiable: rotating
the two rows of the embedding changes no prediction.

Run with ``python demos/learn_embedding.py`` (about a minute).
"""

import numpy as np
from scipy.linalg import subspace_angles

from gpembed import harness

config = harness.ExperimentConfig(D=10, d=2, budget=30, n_box=1000, n_sphere=1000,
                                  methods=("bald", "rand"), repetitions=1, seed=0)
problem = harness.make_problem(config, 0)
eval_seed = harness.derive_seed(config.seed, "eval", 0)
problem.eval_split(config.n_train, config.n_test, eval_seed)
pool = harness.make_pool(config, problem, 0)

print("true embedding rows (norms):", np.round(np.linalg.norm(problem.R, axis=1), 3))
for method in config.methods:
    rec = harness.run_active_loop(config, method, 0, problem, pool)
    R_hat = np.asarray(rec.R_hat)
    angles = np.degrees(subspace_angles(problem.R.T, R_hat.T))
    score = harness.evaluate_embedding(rec, problem, config.n_train, config.n_test, eval_seed)
    radius = np.abs(rec.X).max(axis=1).mean()
    print(f"{method.upper():>5}: principal angles to truth {np.round(angles, 1)} deg, "
          f"test RMSE {score.rmse:.4f}, mean |x|_inf of queries {radius:.2f}")

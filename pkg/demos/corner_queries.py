"""Where do BALD and uncertainty sampling put their queries?

On a function of one hidden direction in the square [-1, 1]^2, the
predictive variance keeps growing towards the box corners aligned with the
embedding, so uncertainty sampling drifts there. BALD divides by the MAP
variance and instead favours points whose outputs would discriminate
between embeddings. The extreme corners and the minimum-variance preimage
of a target embedded value show the geometry the two criteria exploit.

Run with ``python demos/corner_queries.py``.
"""

import numpy as np

from gpembed import acquisition, harness

config = harness.ExperimentConfig(D=2, d=1, budget=20, n_box=1000, n_sphere=1000,
                                  methods=("bald", "unc"), repetitions=1, seed=3)
problem = harness.make_problem(config, 0)
pool = harness.make_pool(config, problem, 0)
print("true embedding:", np.round(problem.R[0], 3))

for method in config.methods:
    rec = harness.run_active_loop(config, method, 0, problem, pool)
    X = rec.X
    print(f"\n{method.upper()} queries (mean |x|_inf = {np.abs(X).max(1).mean():.3f}):")
    for row in np.round(X[:10], 2):
        print("   ", row)
    R_hat, Sigma = np.asarray(rec.R_hat), np.asarray(rec.Sigma)

top, bottom = acquisition.extreme_corners(R_hat)[0]
reach = np.abs(R_hat).sum()
print(f"\nlearned embedding {np.round(R_hat[0], 3)} reaches u in [{-reach:.2f}, {reach:.2f}]")
print("extreme corners:", top, bottom)
for u in (0.25 * reach, 0.75 * reach):
    x = acquisition.preimage(u, R_hat, Sigma)
    print(f"least-uncertain input with u = {u:.2f}: {np.round(x, 3)}, "
          f"x Sigma x^T = {x @ Sigma @ x:.2e}")

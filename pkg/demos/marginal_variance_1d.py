"""How much does hyperparameter uncertainty widen a GP's error bars?

A one-dimensional function is observed at five points. We fit the
length scale by MAP, put a Laplace approximation on it, and compare three
predictive variances along a grid:

* MAP ignores the length-scale uncertainty,
* BBQ adds the spread of the predictive mean across plausible length scales,
* MGP additionally accounts for how the predictive variance itself moves.

A long slice-sampling run gives the reference. Run with
``python demos/marginal_variance_1d.py``.
"""

import numpy as np

from gpembed import gp, laplace, marginal, sampling

rng = np.random.default_rng(0)
X = np.array([[-0.8], [-0.35], [0.0], [0.3], [0.85]])
Y = np.sin(4 * X[:, 0]) + 0.05 * rng.standard_normal(5)
data = gp.Dataset(X, Y)
template = gp.Hyperparameters([[0.0]], log_noise=np.log(0.05))
prior = laplace.EmbeddingPrior(3.0)

post = laplace.laplace_approximation(data, prior, template, init=[3.0], n_restarts=3, rng=1)
print(f"MAP inverse length scale {post.hp.R[0, 0]:.3f}, "
      f"Laplace std {np.sqrt(post.Sigma[0, 0]):.3f}")

grid = np.linspace(-1.2, 1.2, 13)[:, None]
state = gp.PosteriorState(data, post.hp)
preds = marginal.marginal_predictions(state, post.Sigma, grid)

samples = sampling.slice_sample_posterior(data, prior, post.hp, 3000, 300, rng=2,
                                          theta_init=post.hp.theta())
ref = sampling.mcmc_predictive(samples, data, post.hp, grid)

print(f"{'x':>6} {'MAP':>9} {'BBQ':>9} {'MGP':>9} {'slice':>9}")
for i, x in enumerate(grid[:, 0]):
    print(f"{x:6.2f} " + " ".join(f"{preds[m].variance[i]:9.5f}" for m in ("MAP", "BBQ", "MGP"))
          + f" {ref.variance[i]:9.5f}")

ratio = {m: np.median(preds[m].variance / ref.variance) for m in ("MAP", "BBQ", "MGP")}
print("median variance ratio to slice sampling: "
      + ", ".join(f"{m} {v:.2f}" for m, v in ratio.items()))

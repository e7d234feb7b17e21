"""Independent reference computations shared by the test modules.

Nothing here calls into the structured code paths it is used to check:
finite differences only evaluate values, and the dense references build
matrices entry by entry.
"""

import numpy as np
from scipy.stats import multivariate_normal

from gpembed import gp


def central_difference(f, x, h=1e-5):
    """Gradient (or Jacobian, for vector ``f``) by central differences."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def relative_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


def close_enough(analytic, numeric, rel, abs_tol=1e-8):
    """Componentwise: relative error below ``rel`` or absolute below
    ``abs_tol`` for components near zero."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    err = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(numeric), np.max(np.abs(numeric)) * 1e-3)
    return bool(np.all((err <= rel * scale) | (err <= abs_tol)))


def random_instance(rng, N, D, d, free_scale=False, free_noise=False, R_scale=0.8):
    """A dataset with O(1) kernel correlations and hyperparameters at a
    generic point."""
    X = rng.uniform(-1, 1, size=(N, D))
    Y = rng.standard_normal(N)
    hp = gp.Hyperparameters(R_scale * rng.standard_normal((d, D)),
                            log_scale=rng.uniform(-0.3, 0.3),
                            log_noise=rng.uniform(-1.5, -0.8),
                            mean=rng.uniform(-0.2, 0.2),
                            free_scale=free_scale, free_noise=free_noise)
    return gp.Dataset(X, Y), hp


def brute_kernel(A, B, hp):
    """Kernel matrix by a double loop over the defining formula."""
    M = hp.R.T @ hp.R
    out = np.empty((A.shape[0], B.shape[0]))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            diff = a - b
            out[i, j] = hp.scale2 * np.exp(-0.5 * diff @ M @ diff)
    return out


def dense_log_likelihood(data, hp):
    """Log density of Y under the GP marginal via scipy's dense MVN."""
    G = brute_kernel(data.X, data.X, hp) + hp.noise_variance * np.eye(data.N)
    return multivariate_normal(np.full(data.N, hp.mean), G).logpdf(data.Y)


def conditional_gaussian(data, hp, xstar):
    """Predictive mean/variance of f(x*) by conditioning the joint
    covariance of (f(x*), Y) with a dense inverse."""
    Z = np.vstack([xstar[None, :], data.X])
    C = brute_kernel(Z, Z, hp)
    C[1:, 1:] += hp.noise_variance * np.eye(data.N)
    Sinv = np.linalg.inv(C[1:, 1:])
    mean = hp.mean + C[0, 1:] @ Sinv @ (data.Y - hp.mean)
    var = C[0, 0] - C[0, 1:] @ Sinv @ C[1:, 0]
    return mean, var

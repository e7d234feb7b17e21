"""Univariate slice sampling used as the ground-truth posterior oracle."""

from dataclasses import dataclass

import numpy as np

from . import gp, laplace
from .exceptions import NumericalError


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray
    variance: np.ndarray


def _slice_1d(logf, x, i, logy, width, max_steps, rng):
    """One stepping-out + shrinkage update of coordinate ``i``."""
    x0 = x[i]
    left = x0 - width * rng.uniform()
    right = left + width
    j = int(rng.uniform() * max_steps)
    k = max_steps - 1 - j
    xt = x.copy()
    while j > 0:
        xt[i] = left
        if logf(xt) <= logy:
            break
        left -= width
        j -= 1
    while k > 0:
        xt[i] = right
        if logf(xt) <= logy:
            break
        right += width
        k -= 1
    while True:
        xt[i] = left + rng.uniform() * (right - left)
        lp = logf(xt)
        if lp > logy:
            return xt, lp
        if xt[i] < x0:
            left = xt[i]
        else:
            right = xt[i]
        if right - left < 1e-300:
            raise NumericalError("slice shrank to zero width")


def slice_sample(logf, x0, n_samples, burn_in=0, rng=None, width=1.0, max_steps=50):
    """Coordinate-wise slice sampler with stepping out and shrinkage.

    Parameters
    ----------
    logf : callable
        Log density (up to a constant) of a 1-d parameter array.
    x0 : array_like
        Starting point; ``logf(x0)`` must be finite.
    n_samples, burn_in : int
        Returned draws, after discarding ``burn_in`` sweeps.
    width : float
        Initial bracket width per coordinate.
    max_steps : int
        Limit on stepping-out expansions per coordinate update.

    Returns
    -------
    ndarray, shape (n_samples, dim)
    """
    rng = np.random.default_rng(rng)
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()

    def checked(z):
        v = logf(z)
        if np.isnan(v) or v == np.inf:
            raise NumericalError(f"log density is {v} at {z.tolist()}")
        return v

    lp = checked(x)
    if not np.isfinite(lp):
        raise NumericalError(f"log density is not finite at the start point {x.tolist()}")
    out = np.empty((n_samples, x.size))
    for s in range(burn_in + n_samples):
        for i in range(x.size):
            logy = lp + np.log(rng.uniform())
            x, lp = _slice_1d(checked, x, i, logy, width, max_steps, rng)
        if s >= burn_in:
            out[s - burn_in] = x
    return out


def slice_sample_posterior(data, prior, hp, n_samples, burn_in, rng=None,
                           width=1.0, max_steps=50, theta_init=None):
    """Slice-sample the hyperparameter posterior over the free ``theta`` of
    ``hp`` (raw entries of R, log scale, log noise)."""
    def logf(theta):
        try:
            value = laplace.log_posterior_value(theta, data, prior, hp)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"log posterior failed at theta={theta.tolist()}: {exc}")
        if not np.isfinite(value):
            raise NumericalError(f"log posterior is {value} at theta={theta.tolist()}")
        return value

    x0 = hp.theta() if theta_init is None else theta_init
    return slice_sample(logf, x0, n_samples, burn_in, rng, width, max_steps)


def mcmc_predictive(samples, data, hp, xstar):
    """Moment-matched Gaussian of the mixture of per-sample GP predictives
    for the latent ``f`` at ``xstar``."""
    samples = np.atleast_2d(samples)
    if samples.shape[0] == 0:
        raise ValueError("need at least one sample")
    Xs = np.atleast_2d(xstar)
    s1 = np.zeros(Xs.shape[0])
    s2 = np.zeros(Xs.shape[0])
    for theta in samples:
        p = gp.PosteriorState(data, hp.with_theta(theta)).predict(Xs)
        s1 += p.mean
        s2 += p.variance + p.mean**2
    n = samples.shape[0]
    mean = s1 / n
    var = np.maximum(s2 / n - mean**2, 0.0)
    return GaussianSummary(mean, var)

"""Evaluation metrics for Gaussian predictive distributions."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import DataError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class MetricReport:
    nll: float = float("nan")
    rmse: float = float("nan")
    skld: float = float("nan")
    n_test: int = 0
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _aligned(*arrays):
    arrays = [np.atleast_1d(np.asarray(a, dtype=float)) for a in arrays]
    if len({a.shape for a in arrays}) != 1:
        raise DataError(f"length mismatch: {[a.shape for a in arrays]}")
    return arrays


def gaussian_kl(m1, v1, m2, v2):
    """KL(N(m1, v1) || N(m2, v2)) in nats, elementwise."""
    return 0.5 * (np.log(v2 / v1) + (v1 + (m1 - m2) ** 2) / v2 - 1.0)


def skld(p, q):
    """Symmetrized KL divergence: the mean of both directions.

    ``p`` and ``q`` are objects with ``mean`` and ``variance`` (scalars or
    arrays); the result is elementwise.
    """
    m1, v1, m2, v2 = _aligned(p.mean, p.variance, q.mean, q.variance)
    if np.any(v1 <= 0) or np.any(v2 <= 0):
        raise DataError("SKLD needs strictly positive variances")
    out = 0.5 * (gaussian_kl(m1, v1, m2, v2) + gaussian_kl(m2, v2, m1, v1))
    return float(out[0]) if np.ndim(p.mean) == 0 else out


def nll_metric(mean, variance, targets):
    """Mean negative log density of ``targets`` under N(mean, variance).

    Pass the predictive variance of the observations (latent variance plus
    noise).
    """
    mean, variance, targets = _aligned(mean, variance, targets)
    return float(np.mean(0.5 * (LOG_2PI + np.log(variance)
                                + (targets - mean) ** 2 / variance)))


def rmse_metric(mean, targets):
    mean, targets = _aligned(mean, targets)
    return float(np.sqrt(np.mean((mean - targets) ** 2)))

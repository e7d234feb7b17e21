"""Exception hierarchy shared by the library and the command-line harness."""

import numpy as np


class GPEmbedError(Exception):
    """Base class for all errors raised by gpembed."""


class DataError(GPEmbedError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(GPEmbedError):
    """A numerical procedure could not produce a usable result."""


class FactorizationError(NumericalError, np.linalg.LinAlgError):
    """Cholesky factorization failed even after jitter escalation."""


class OptimizationError(NumericalError):
    """Every optimizer start failed to produce a finite objective."""


class DegenerateVarianceError(NumericalError):
    """A predictive variance that must be positive was not."""


class InfeasibleError(GPEmbedError, ValueError):
    """A constrained program has an empty feasible set."""


class PoolExhaustedError(GPEmbedError):
    """All candidates of a pool have already been selected."""

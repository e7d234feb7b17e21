"""Exact Gaussian process regression under a linear input embedding.

The covariance is the Mahalanobis exponentiated quadratic

    k(x, x') = gamma^2 exp(-0.5 (x - x') R^T R (x - x')^T)

with ``R`` a ``d x D`` embedding matrix, so the GP depends on inputs only
through ``u = x R^T``.  The ARD kernel is the special case ``d = D`` with a
diagonal ``R`` (use ``R_mask`` to keep the off-diagonal entries fixed at 0).

Free hyperparameters are vectorized in a fixed order: the free entries of
``R`` in row-major order, then ``log gamma``, then ``log sigma``.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .exceptions import DataError, FactorizationError

LOG_2PI = np.log(2.0 * np.pi)

#: Jitter schedule: ``JITTER_BASE * gamma^2 * 10**k`` for ``k = 0..JITTER_STEPS``.
JITTER_BASE = 1e-10
JITTER_STEPS = 6


@dataclass(frozen=True)
class Dataset:
    """Inputs ``X`` (N x D) and observations ``Y`` (N,).

    ``noise_variance`` is the nominal observation noise of the data source;
    the GP itself reads its noise level from :class:`Hyperparameters`.
    """

    X: np.ndarray
    Y: np.ndarray
    noise_variance: float | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise DataError(f"X must be a 2-d array, got shape {X.shape}")
        if X.shape[0] != Y.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DataError("dataset contains non-finite values")
        if self.noise_variance is not None and self.noise_variance < 0:
            raise DataError("noise variance must be non-negative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @classmethod
    def empty(cls, D, noise_variance=None):
        return cls(np.empty((0, D)), np.empty(0), noise_variance)

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def D(self):
        return self.X.shape[1]

    def append(self, x, y):
        """Return a new dataset with the rows ``x`` and values ``y`` added."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return Dataset(np.vstack([self.X, x]), np.concatenate([self.Y, y]),
                       self.noise_variance)

    def subset(self, index):
        return Dataset(self.X[index], self.Y[index], self.noise_variance)


@dataclass(frozen=True)
class Hyperparameters:
    """Embedding ``R`` plus log output scale, log noise and a constant mean.

    The ``free_*`` flags (and ``R_mask`` for individual entries of ``R``)
    select which quantities make up the parameter vector ``theta`` that is
    optimized, differentiated and marginalized.
    """

    R: np.ndarray
    log_scale: float = 0.0
    log_noise: float = float(np.log(0.1))
    mean: float = 0.0
    R_mask: np.ndarray | None = field(default=None, compare=False)
    free_R: bool = True
    free_scale: bool = False
    free_noise: bool = False

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if R.ndim != 2:
            raise DataError(f"R must be a d x D matrix, got shape {R.shape}")
        d, D = R.shape
        if not 1 <= d <= D:
            raise DataError(f"embedding needs 1 <= d <= D, got d={d}, D={D}")
        if not np.all(np.isfinite(R)):
            raise DataError("embedding has non-finite entries")
        mask = np.ones(R.shape, dtype=bool) if self.R_mask is None \
            else np.asarray(self.R_mask, dtype=bool)
        if mask.shape != R.shape:
            raise DataError(f"R_mask shape {mask.shape} does not match R {R.shape}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "R_mask", mask)
        object.__setattr__(self, "log_scale", float(self.log_scale))
        object.__setattr__(self, "log_noise", float(self.log_noise))
        object.__setattr__(self, "mean", float(self.mean))

    @property
    def d(self):
        return self.R.shape[0]

    @property
    def D(self):
        return self.R.shape[1]

    @property
    def scale2(self):
        """Output variance gamma^2."""
        return float(np.exp(2.0 * self.log_scale))

    @property
    def noise_variance(self):
        return float(np.exp(2.0 * self.log_noise))

    @property
    def n_free_R(self):
        return int(self.R_mask.sum()) if self.free_R else 0

    @property
    def n_free(self):
        return self.n_free_R + int(self.free_scale) + int(self.free_noise)

    @property
    def scale_index(self):
        return self.n_free_R if self.free_scale else None

    @property
    def noise_index(self):
        return self.n_free_R + int(self.free_scale) if self.free_noise else None

    def theta(self):
        parts = [self.R[self.R_mask]] if self.free_R else []
        if self.free_scale:
            parts.append([self.log_scale])
        if self.free_noise:
            parts.append([self.log_noise])
        return np.concatenate(parts) if parts else np.empty(0)

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_free:
            raise DataError(f"expected {self.n_free} parameters, got {theta.size}")
        R = self.R.copy()
        k = self.n_free_R
        if self.free_R:
            R[self.R_mask] = theta[:k]
        log_scale, log_noise = self.log_scale, self.log_noise
        if self.free_scale:
            log_scale = theta[k]
            k += 1
        if self.free_noise:
            log_noise = theta[k]
        return replace(self, R=R, log_scale=log_scale, log_noise=log_noise)

    def with_free(self, R=None, scale=None, noise=None):
        """Copy with some of the free flags changed (``None`` keeps them)."""
        return replace(
            self,
            free_R=self.free_R if R is None else R,
            free_scale=self.free_scale if scale is None else scale,
            free_noise=self.free_noise if noise is None else noise,
        )

    def free_R_indices(self):
        """Flat (row-major) indices into ``R`` of its free entries."""
        if not self.free_R:
            return np.empty(0, dtype=int)
        return np.flatnonzero(self.R_mask.ravel())


@dataclass(frozen=True)
class Predictive:
    mean: np.ndarray
    variance: np.ndarray


def _check_inputs(A, hp, name="x"):
    A = np.asarray(A, dtype=float)
    if A.shape[-1] != hp.D:
        raise DataError(f"{name} has {A.shape[-1]} columns, embedding expects D={hp.D}")
    return A


def kernel_eval(x, x2, hp):
    """Covariance between two single inputs."""
    x = _check_inputs(np.reshape(x, -1), hp)
    x2 = _check_inputs(np.reshape(x2, -1), hp)
    u = hp.R @ (x - x2)
    return hp.scale2 * float(np.exp(-0.5 * u @ u))


def kernel_matrix(A, B, hp):
    A = _check_inputs(np.atleast_2d(A), hp, "A")
    B = _check_inputs(np.atleast_2d(B), hp, "B")
    if A.shape[0] == 0 or B.shape[0] == 0:
        return np.zeros((A.shape[0], B.shape[0]))
    UA = A @ hp.R.T
    UB = B @ hp.R.T
    return hp.scale2 * np.exp(-0.5 * cdist(UA, UB, "sqeuclidean"))


def cholesky_with_jitter(G, scale2=1.0):
    """Lower Cholesky factor of ``G``, escalating diagonal jitter on failure.

    Returns ``(L, jitter)`` where ``jitter`` is the amount actually added.
    """
    try:
        return cholesky(G, lower=True, check_finite=False), 0.0
    except np.linalg.LinAlgError:
        pass
    n = G.shape[0]
    for k in range(JITTER_STEPS + 1):
        jitter = JITTER_BASE * scale2 * 10.0**k
        try:
            return cholesky(G + jitter * np.eye(n), lower=True, check_finite=False), jitter
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(
        f"covariance matrix of size {n} is not positive definite after jitter "
        f"{JITTER_BASE * scale2 * 10.0**JITTER_STEPS:.1e}")


def pair_contract(C, U, X):
    """``sum_ij C_ij (U_i - U_j)_k (X_i - X_j)_l`` as a ``d x D`` matrix.

    Costs O(N^2 (d + D) + N d D) rather than materializing the pairwise
    differences.
    """
    r = C.sum(axis=1)
    c = C.sum(axis=0)
    return (U.T * (r + c)) @ X - U.T @ (C @ X) - U.T @ (C.T @ X)


class PosteriorState:
    """Cached factorization of ``G = K_XX + sigma^2 I`` for one dataset and
    hyperparameter setting.

    Attributes
    ----------
    L : ndarray, shape (N, N)
        Lower Cholesky factor of ``G`` (including any jitter added).
    Gamma : ndarray, shape (N,)
        ``G^{-1} (Y - mu)``.
    G_inv : ndarray, shape (N, N)
    U : ndarray, shape (N, d)
        Embedded training inputs ``X R^T``.
    """

    def __init__(self, data, hp):
        if data.D != hp.D:
            raise DataError(f"dataset has D={data.D}, embedding has D={hp.D}")
        self.data = data
        self.hp = hp
        self.U = data.X @ hp.R.T
        self.K = kernel_matrix(data.X, data.X, hp)
        self.resid = data.Y - hp.mean
        N = data.N
        if N == 0:
            self.L = np.zeros((0, 0))
            self.jitter = 0.0
            self.Gamma = np.zeros(0)
            return
        G = self.K + hp.noise_variance * np.eye(N)
        self.L, self.jitter = cholesky_with_jitter(G, hp.scale2)
        self.Gamma = cho_solve((self.L, True), self.resid, check_finite=False)

    @cached_property
    def G_inv(self):
        if self.data.N == 0:
            return np.zeros((0, 0))
        return cho_solve((self.L, True), np.eye(self.data.N), check_finite=False)

    @property
    def G(self):
        return self.K + (self.hp.noise_variance + self.jitter) * np.eye(self.data.N)

    def solve(self, b):
        return cho_solve((self.L, True), b, check_finite=False)

    def predict(self, xstar):
        """Posterior mean and variance of the latent ``f`` at ``xstar``.

        ``xstar`` may be a single D-vector (scalars returned) or an M x D
        array.
        """
        single = np.ndim(xstar) == 1
        Xs = _check_inputs(np.atleast_2d(xstar), self.hp)
        if self.data.N == 0:
            mean = np.full(Xs.shape[0], self.hp.mean)
            var = np.full(Xs.shape[0], self.hp.scale2)
        else:
            Ks = kernel_matrix(Xs, self.data.X, self.hp)
            mean = self.hp.mean + Ks @ self.Gamma
            V = solve_triangular(self.L, Ks.T, lower=True, check_finite=False)
            var = np.clip(self.hp.scale2 - np.sum(V * V, axis=0), 0.0, self.hp.scale2)
        if single:
            return Predictive(float(mean[0]), float(var[0]))
        return Predictive(mean, var)

    def log_likelihood(self):
        N = self.data.N
        if N == 0:
            return 0.0
        quad = self.resid @ self.Gamma
        logdet = 2.0 * np.sum(np.log(np.diag(self.L)))
        return float(-0.5 * (quad + logdet + N * LOG_2PI))

    def log_likelihood_gradient(self):
        """Gradient of the log likelihood over the free hyperparameters.

        Component for theta is ``0.5 Gamma^T dG Gamma - 0.5 tr(G^{-1} dG)``.
        """
        hp = self.hp
        grad = np.zeros(hp.n_free)
        if self.data.N == 0:
            return grad
        W = 0.5 * (np.outer(self.Gamma, self.Gamma) - self.G_inv)
        if hp.free_R:
            # dK_ij/dR_kl = -K_ij (u_i - u_j)_k (x_i - x_j)_l
            gR = -pair_contract(W * self.K, self.U, self.data.X)
            grad[:hp.n_free_R] = gR[hp.R_mask]
        if hp.free_scale:
            grad[hp.scale_index] = 2.0 * np.sum(W * self.K)
        if hp.free_noise:
            grad[hp.noise_index] = 2.0 * hp.noise_variance * np.trace(W)
        return grad


def fit_posterior(data, hp):
    return PosteriorState(data, hp)


def predict(state, xstar):
    return state.predict(xstar)


def log_likelihood(data, hp):
    return PosteriorState(data, hp).log_likelihood()


def log_likelihood_gradient(data, hp):
    return PosteriorState(data, hp).log_likelihood_gradient()


def pairwise_differences(X):
    """``Delta[l, i, j] = X[i, l] - X[j, l]``, shape (D, N, N)."""
    return X.T[:, :, None] - X.T[:, None, :]


def covariance_derivatives(data, hp):
    """Dense stack of ``dG/dtheta`` for every free parameter, shape (P, N, N).

    Materializes O(P N^2) memory; intended for moderate sizes and as a
    reference for the structured paths.
    """
    X = data.X
    N = X.shape[0]
    K = kernel_matrix(X, X, hp)
    out = []
    if hp.free_R:
        Delta = pairwise_differences(X)
        RDelta = np.tensordot(hp.R, Delta, axes=1)
        Z = RDelta[:, None] * Delta[None]  # (d, D, N, N)
        dK = -K * Z.reshape(hp.d * hp.D, N, N)
        out.append(dK[hp.free_R_indices()])
    if hp.free_scale:
        out.append((2.0 * K)[None])
    if hp.free_noise:
        out.append((2.0 * hp.noise_variance * np.eye(N))[None])
    if not out:
        return np.zeros((0, N, N))
    return np.concatenate(out, axis=0)

"""Posterior inference over the embedding: MAP estimation, Hessians and the
Laplace approximation.

All quantities are over the free parameter vector ``theta`` of a
:class:`~gpembed.gp.Hyperparameters` template (row-major free entries of
``R``, then ``log gamma``, then ``log sigma``).
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import gp
from .exceptions import FactorizationError, OptimizationError

LOG_2PI = gp.LOG_2PI


@dataclass(frozen=True)
class EmbeddingPrior:
    """Independent Gaussian priors on the free hyperparameters.

    Entries of ``R`` are i.i.d. ``N(0, std^2)``; ``log gamma`` and
    ``log sigma`` (when free) get broad ``N(0, 4^2)`` priors by default.
    """

    std: float
    scale_std: float = 4.0
    noise_std: float = 4.0

    def __post_init__(self):
        if not (self.std > 0 and self.scale_std > 0 and self.noise_std > 0):
            raise ValueError("prior standard deviations must be positive")

    @classmethod
    def default(cls, D):
        """The diffuse embedding prior with standard deviation 5 / (4 D)."""
        return cls(std=1.25 / D)

    def stds(self, hp):
        """Prior standard deviation of every free parameter, in theta order."""
        s = [np.full(hp.n_free_R, self.std)]
        if hp.free_scale:
            s.append([self.scale_std])
        if hp.free_noise:
            s.append([self.noise_std])
        return np.concatenate(s)

    def log_density(self, theta, hp):
        """Value and gradient of the log prior density at ``theta``."""
        s = self.stds(hp)
        z = theta / s
        value = -0.5 * np.sum(z * z) - np.sum(np.log(s)) - 0.5 * theta.size * LOG_2PI
        return float(value), -theta / s**2

    def sample_R(self, rng, d, D):
        return self.std * rng.standard_normal((d, D))


def log_posterior(theta, data, prior, hp):
    """Unnormalized log posterior and its gradient over the free ``theta``."""
    theta = np.asarray(theta, dtype=float)
    h = hp.with_theta(theta)
    lp, dlp = prior.log_density(theta, hp)
    if data.N == 0:
        return lp, dlp
    state = gp.PosteriorState(data, h)
    return lp + state.log_likelihood(), dlp + state.log_likelihood_gradient()


def log_posterior_value(theta, data, prior, hp):
    """Log posterior without the gradient (cheaper, for samplers)."""
    theta = np.asarray(theta, dtype=float)
    lp, _ = prior.log_density(theta, hp)
    if data.N == 0:
        return lp
    return lp + gp.PosteriorState(data, hp.with_theta(theta)).log_likelihood()


@dataclass(frozen=True)
class MapResult:
    hp: gp.Hyperparameters
    value: float
    grad_norm: float
    converged: bool
    n_starts: int

    @property
    def R(self):
        return self.hp.R


def map_embedding(data, prior, hp, init=None, n_restarts=1, rng=None,
                  maxiter=200, gtol_rel=1e-5):
    """Maximize the log posterior with L-BFGS from several starts.

    Starts are ``init`` (a theta vector, if given) followed by
    ``n_restarts`` draws of ``R`` from the prior (other free parameters
    start at their template values).  The best finite optimum wins.

    ``converged`` is False when the best run stopped with a gradient norm
    above ``gtol_rel * (1 + |value|)`` (e.g. at the iteration cap).
    """
    if n_restarts < 1:
        raise ValueError("n_restarts must be at least 1")
    rng = np.random.default_rng(rng)
    base = hp.theta()

    if data.N == 0:
        # prior mode; every prior mean is zero
        mode = np.zeros_like(base)
        value, grad = log_posterior(mode, data, prior, hp)
        return MapResult(hp.with_theta(mode), value, 0.0, True, 0)

    starts = []
    if init is not None:
        starts.append(np.asarray(init, dtype=float).reshape(-1))
    for _ in range(n_restarts):
        t = base.copy()
        if hp.free_R:
            t[:hp.n_free_R] = prior.sample_R(rng, hp.d, hp.D)[hp.R_mask]
        starts.append(t)

    def objective(theta):
        try:
            value, grad = log_posterior(theta, data, prior, hp)
        except FactorizationError:
            return np.inf, np.zeros_like(theta)
        if not np.isfinite(value):
            return np.inf, np.zeros_like(theta)
        return -value, -grad

    best = None
    for t0 in starts:
        f0, _ = objective(t0)
        if not np.isfinite(f0):
            continue
        res = minimize(objective, t0, jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-9})
        theta, f = res.x, res.fun
        # never accept a result worse than where the run started
        if not np.isfinite(f) or f > f0:
            theta, f = t0, f0
        if best is None or f < best[1]:
            best = (theta, f)
    if best is None:
        raise OptimizationError("log posterior was not finite at any start point")

    theta = best[0]
    value, grad = log_posterior(theta, data, prior, hp)
    gnorm = float(np.linalg.norm(grad))
    return MapResult(hp.with_theta(theta), value, gnorm,
                     gnorm <= gtol_rel * (1.0 + abs(value)), len(starts))


def _likelihood_hessian(state):
    """Dense Hessian of the log likelihood over the free parameters."""
    hp, data = state.hp, state.data
    P = hp.n_free
    N = data.N
    if N == 0:
        return np.zeros((P, P))
    G_inv, Gamma, K = state.G_inv, state.Gamma, state.K
    dG = gp.covariance_derivatives(data, hp)

    V = dG @ Gamma                                    # (P, N)
    A = G_inv[None] @ dG                              # (P, N, N)
    H = -V @ G_inv @ V.T
    H += 0.5 * np.einsum("pij,qji->pq", A, A)

    # second derivatives of G contracted with W' = (Gamma Gamma^T - G^-1) / 2
    Wp = 0.5 * (np.outer(Gamma, Gamma) - G_inv)
    Wt = Wp * K
    nR = hp.n_free_R
    if hp.free_R:
        idx = hp.free_R_indices()
        Delta = gp.pairwise_differences(data.X)
        RDelta = np.tensordot(hp.R, Delta, axes=1)
        Z = (RDelta[:, None] * Delta[None]).reshape(hp.d * hp.D, N * N)[idx]
        HRR = (Z * Wt.reshape(-1)) @ Z.T
        DD = (Delta.reshape(hp.D, -1) * Wt.reshape(-1)) @ Delta.reshape(hp.D, -1).T
        HRR -= np.kron(np.eye(hp.d), DD)[np.ix_(idx, idx)]
        H[:nR, :nR] += HRR
    if hp.free_scale:
        s = hp.scale_index
        H[s, s] += 4.0 * np.sum(Wt)
        if hp.free_R:
            gR = 2.0 * np.einsum("pij,ij->p", dG[:nR], Wp)
            H[s, :nR] += gR
            H[:nR, s] += gR
    if hp.free_noise:
        n = hp.noise_index
        H[n, n] += 4.0 * hp.noise_variance * np.trace(Wp)
    return 0.5 * (H + H.T)


def dense_hessian(data, prior, hp):
    """Hessian of the negative log posterior over the free parameters of
    ``hp``, evaluated at ``hp``."""
    state = gp.PosteriorState(data, hp)
    return -_likelihood_hessian(state) + np.diag(1.0 / prior.stds(hp) ** 2)


@dataclass(frozen=True)
class HessianPrecomp:
    """Arrays reused by every Hessian-vector product at a fixed ``R``.

    ``Delta`` (D, N, N) holds coordinate differences, ``RDelta`` (d, N, N)
    the embedded differences, ``Wt`` the N x N matrix
    ``(Gamma Gamma^T - G^-1) / 2 * K``.
    """

    hp: gp.Hyperparameters
    Delta: np.ndarray
    RDelta: np.ndarray
    K: np.ndarray
    Gamma: np.ndarray
    G_inv: np.ndarray
    Wt: np.ndarray
    prior_precision: float


def hessian_precompute(data, prior, hp):
    state = gp.PosteriorState(data, hp)
    Delta = gp.pairwise_differences(data.X)
    RDelta = np.tensordot(hp.R, Delta, axes=1)
    Wt = 0.5 * (np.outer(state.Gamma, state.Gamma) - state.G_inv) * state.K
    return HessianPrecomp(hp, Delta, RDelta, state.K, state.Gamma, state.G_inv,
                          Wt, 1.0 / prior.std**2)


def hessian_vector_product(precomp, g):
    """Product of the R-block of the negative log posterior Hessian with ``g``.

    ``g`` is a vector over the free entries of ``R`` (row-major).  Runs in
    O(N^2 d D) plus two O(N^3) products that do not depend on D, without
    forming the (dD)^2 matrix.
    """
    hp = precomp.hp
    g = np.asarray(g, dtype=float).reshape(-1)
    if g.size != hp.n_free_R:
        raise ValueError(f"g has {g.size} entries, expected {hp.n_free_R}")
    d, D = hp.d, hp.D
    N = precomp.K.shape[0]
    gm = np.zeros((d, D))
    gm[hp.R_mask] = g
    out = precomp.prior_precision * gm
    if N == 0:
        return out[hp.R_mask]

    Delta, RDelta, K, Gamma, G_inv, Wt = (precomp.Delta, precomp.RDelta, precomp.K,
                                          precomp.Gamma, precomp.G_inv, precomp.Wt)
    gDelta = np.tensordot(gm, Delta, axes=1)          # (d, N, N)
    S = np.einsum("aij,aij->ij", RDelta, gDelta)      # N x N, reused for every kl
    dG_g = -K * S
    w = G_inv @ (dG_g @ Gamma)
    B = G_inv @ dG_g @ G_inv
    C = np.outer(w, Gamma) * K - 0.5 * B * K + Wt * S
    Q = RDelta * C[None] - gDelta * Wt[None]
    HL = Q.reshape(d, N * N) @ Delta.reshape(D, N * N).T
    out -= HL
    return out[hp.R_mask]


def laplace_covariance(H):
    """Invert a Hessian after flooring its eigenvalues.

    Eigenvalues below ``max(1e-6, 1e-8 * lambda_max)`` are raised to that
    floor, so the result is always symmetric positive definite.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.size == 0:
        return np.zeros((0, 0))
    lam, Q = np.linalg.eigh(0.5 * (H + H.T))
    floor = max(1e-6, 1e-8 * lam.max())
    lam = np.maximum(lam, floor)
    Sigma = (Q / lam) @ Q.T
    return 0.5 * (Sigma + Sigma.T)


BLOCKS = ("R", "scale", "noise")


@dataclass(frozen=True)
class EmbeddingPosterior:
    """Gaussian approximation ``N(theta_hat, Sigma)``.

    ``hp`` sits at the mode and its free flags mark exactly the marginalized
    blocks, so ``Sigma`` lines up with ``hp.theta()``.
    """

    hp: gp.Hyperparameters
    Sigma: np.ndarray
    chol: np.ndarray
    log_posterior: float
    converged: bool

    @property
    def R_hat(self):
        return self.hp.R


def laplace_approximation(data, prior, hp, init=None, n_restarts=1, rng=None,
                          marginalize=("R",), maxiter=200):
    """MAP over the free parameters of ``hp``, then a Laplace covariance
    restricted to the ``marginalize`` blocks (marginal block of the full
    inverse Hessian)."""
    unknown = set(marginalize) - set(BLOCKS)
    if unknown:
        raise ValueError(f"unknown blocks {sorted(unknown)}")
    fit = map_embedding(data, prior, hp, init=init, n_restarts=n_restarts,
                        rng=rng, maxiter=maxiter)
    mode = fit.hp
    Sigma_full = laplace_covariance(dense_hessian(data, prior, mode))

    keep = []
    if mode.free_R:
        keep.append(np.full(mode.n_free_R, "R" in marginalize))
    if mode.free_scale:
        keep.append(["scale" in marginalize])
    if mode.free_noise:
        keep.append(["noise" in marginalize])
    keep = np.concatenate(keep).astype(bool) if keep else np.zeros(0, bool)
    Sigma = Sigma_full[np.ix_(keep, keep)]
    out_hp = mode.with_free(R=mode.free_R and "R" in marginalize,
                            scale=mode.free_scale and "scale" in marginalize,
                            noise=mode.free_noise and "noise" in marginalize)
    chol = np.linalg.cholesky(Sigma) if Sigma.size else Sigma
    return EmbeddingPosterior(out_hp, Sigma, chol, fit.value, fit.converged)

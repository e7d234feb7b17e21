"""Approximate marginalization of GP hyperparameters.

Given a Gaussian belief ``N(theta_hat, Sigma)`` over the free
hyperparameters of a posterior state, three predictive distributions for
the latent ``f(x*)`` are provided:

* MAP: the plug-in GP prediction at ``theta_hat``.
* BBQ: variance inflated by the sensitivity of the predictive mean,
  ``V + dm^T Sigma dm``.
* MGP: ``4/3 V + dm^T Sigma dm + dV^T Sigma dV / (3 V)``, which also
  accounts for the sensitivity of the predictive variance.

All three share the MAP mean.
"""

from dataclasses import dataclass

import numpy as np

from . import gp
from .exceptions import DegenerateVarianceError

#: Relative floor (times gamma^2) on the MAP variance before dividing by it.
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class PredictiveDerivatives:
    """MAP mean/variance and their gradients over the free parameters.

    ``dm`` and ``dV`` have shape (M, P) for M test points.
    """

    mean: np.ndarray
    variance: np.ndarray
    dm: np.ndarray
    dV: np.ndarray


@dataclass(frozen=True)
class MarginalPrediction:
    mean: np.ndarray
    variance: np.ndarray
    method: str


@dataclass(frozen=True)
class ExpansionSolution:
    """Expansion points and slopes of the local linear-Gaussian fits."""

    a_plus: np.ndarray
    a_minus: np.ndarray
    b_plus: float
    b_minus: float
    nu2: float
    fstar_plus: float
    fstar_minus: float


def _embedded_outer(c, Us, Xs, U, X):
    """``sum_i c_mi (us_m - u_i)_k (xs_m - x_i)_l`` for every test point m."""
    total = c.sum(axis=1)
    cX = c @ X
    cU = c @ U
    out = total[:, None, None] * Us[:, :, None] * Xs[:, None, :]
    out -= Us[:, :, None] * cX[:, None, :]
    out -= cU[:, :, None] * Xs[:, None, :]
    out += np.einsum("mi,ik,il->mkl", c, U, X)
    return out


def predictive_derivatives(state, xstar):
    """Analytic gradients of the MAP predictive mean and variance.

    Parameters
    ----------
    state : PosteriorState
        Posterior at ``theta_hat``; its hyperparameters' free flags define
        which parameters are differentiated.
    xstar : array_like, shape (M, D) or (D,)

    Returns
    -------
    PredictiveDerivatives
        With arrays of shape (M,) and (M, P).
    """
    hp = state.hp
    Xs = np.atleast_2d(np.asarray(xstar, dtype=float))
    if Xs.shape[1] != hp.D:
        raise ValueError(f"xstar has {Xs.shape[1]} columns, expected {hp.D}")
    M, N, P = Xs.shape[0], state.data.N, hp.n_free
    dm = np.zeros((M, P))
    dV = np.zeros((M, P))
    if N == 0:
        if hp.free_scale:
            dV[:, hp.scale_index] = 2.0 * hp.scale2
        return PredictiveDerivatives(np.full(M, hp.mean), np.full(M, hp.scale2), dm, dV)

    X, U, K, Gamma = state.data.X, state.U, state.K, state.Gamma
    Ks = gp.kernel_matrix(Xs, X, hp)
    alpha = Ks @ state.G_inv
    mean = hp.mean + Ks @ Gamma
    var = np.clip(hp.scale2 - np.sum(Ks * alpha, axis=1), 0.0, hp.scale2)

    if hp.free_R:
        Us = Xs @ hp.R.T
        KGamma = K @ Gamma
        Kalpha = alpha @ K                                  # rows: K alpha_m
        # alpha^T dG Gamma over all R entries
        r = alpha * KGamma
        c = Gamma * Kalpha
        t1 = np.einsum("mi,ik,il->mkl", r + c, U, X)
        t2 = np.einsum("mi,ik,il->mkl", alpha, U, K @ (Gamma[:, None] * X))
        t3 = np.einsum("mi,ik,il->mkl", alpha, K @ (Gamma[:, None] * U), X)
        aGg = -(t1 - t2 - t3)
        # alpha^T dG alpha
        t1 = np.einsum("mi,ik,il->mkl", 2.0 * alpha * Kalpha, U, X)
        aU_K = np.einsum("mi,ik,ij->mjk", alpha, U, K)
        t2 = np.einsum("mjk,mj,jl->mkl", aU_K, alpha, X)
        aGa = -(t1 - 2.0 * t2)
        dks_Gamma = -_embedded_outer(Ks * Gamma, Us, Xs, U, X)
        dks_alpha = -_embedded_outer(Ks * alpha, Us, Xs, U, X)
        idx = hp.free_R_indices()
        dm[:, :hp.n_free_R] = (dks_Gamma - aGg).reshape(M, -1)[:, idx]
        dV[:, :hp.n_free_R] = (-2.0 * dks_alpha + aGa).reshape(M, -1)[:, idx]
    if hp.free_scale:
        s = hp.scale_index
        aK = alpha @ K
        dm[:, s] = 2.0 * (Ks @ Gamma) - 2.0 * aK @ Gamma
        dV[:, s] = 2.0 * hp.scale2 - 4.0 * np.sum(Ks * alpha, axis=1) \
            + 2.0 * np.sum(aK * alpha, axis=1)
    if hp.free_noise:
        n = hp.noise_index
        dm[:, n] = -2.0 * hp.noise_variance * (alpha @ Gamma)
        dV[:, n] = 2.0 * hp.noise_variance * np.sum(alpha * alpha, axis=1)
    return PredictiveDerivatives(mean, var, dm, dV)


def _quad(D, Sigma):
    return np.einsum("mp,pq,mq->m", D, Sigma, D)


def _check_sigma(Sigma, P):
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float)) if P else np.zeros((0, 0))
    if Sigma.shape != (P, P):
        raise ValueError(f"Sigma has shape {Sigma.shape}, expected {(P, P)}")
    return Sigma


def _finish(values, single):
    if single:
        return tuple(float(v[0]) for v in values)
    return values


def map_predict(state, Sigma, xstar):
    """Plug-in prediction, packaged like the marginal methods."""
    single = np.ndim(xstar) == 1
    p = state.predict(np.atleast_2d(xstar))
    mean, var = _finish((p.mean, p.variance), single)
    return MarginalPrediction(mean, var, "MAP")


def bbq_predict(state, Sigma, xstar, derivs=None):
    single = np.ndim(xstar) == 1
    pd = derivs or predictive_derivatives(state, xstar)
    Sigma = _check_sigma(Sigma, state.hp.n_free)
    var = pd.variance + _quad(pd.dm, Sigma)
    mean, var = _finish((pd.mean, var), single)
    return MarginalPrediction(mean, var, "BBQ")


def mgp_variance(pd, Sigma, scale2):
    """Marginal MGP variance from precomputed derivatives.

    Below the floor ``VARIANCE_FLOOR * gamma^2`` the ``dV`` term is dropped,
    leaving ``4/3 V + dm^T Sigma dm``.
    """
    V = pd.variance
    out = 4.0 / 3.0 * V + _quad(pd.dm, Sigma)
    ok = V > VARIANCE_FLOOR * scale2
    if np.any(ok):
        out[ok] += _quad(pd.dV[ok], Sigma) / (3.0 * V[ok])
    return out


def mgp_predict(state, Sigma, xstar, derivs=None):
    single = np.ndim(xstar) == 1
    pd = derivs or predictive_derivatives(state, xstar)
    Sigma = _check_sigma(Sigma, state.hp.n_free)
    var = mgp_variance(pd, Sigma, state.hp.scale2)
    mean, var = _finish((pd.mean, var), single)
    return MarginalPrediction(mean, var, "MGP")


def marginal_predictions(state, Sigma, xstar):
    """MAP, BBQ and MGP predictions sharing one derivative computation."""
    pd = predictive_derivatives(state, xstar)
    return {
        "MAP": MarginalPrediction(pd.mean, pd.variance, "MAP"),
        "BBQ": bbq_predict(state, Sigma, np.atleast_2d(xstar), pd),
        "MGP": mgp_predict(state, Sigma, np.atleast_2d(xstar), pd),
    }


def expansion_solution(state, xstar):
    """Solve for the two expansion points ``m +- sqrt(V/3)`` and slopes
    ``a = dm +- dV / sqrt(3 V)`` at a single test input."""
    pd = predictive_derivatives(state, np.reshape(xstar, (1, -1)))
    m, V = float(pd.mean[0]), float(pd.variance[0])
    if not V > 0:
        raise DegenerateVarianceError(f"predictive variance {V} is not positive")
    dm, dV = pd.dm[0], pd.dV[0]
    shift = dV / np.sqrt(3.0 * V)
    a_plus, a_minus = dm + shift, dm - shift
    theta = state.hp.theta()
    half = np.sqrt(V / 3.0)
    return ExpansionSolution(a_plus, a_minus, m - a_plus @ theta, m - a_minus @ theta,
                             V, m + half, m - half)

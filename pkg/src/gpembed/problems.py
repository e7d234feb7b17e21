"""Test problems with known (or data-defined) low-dimensional structure.

Every problem exposes ``D``, ``R`` (``None`` for real data),
``observe(X, rng, index=None)`` and ``eval_split(n_train, n_test, seed)``.
``eval_split`` is memoized so deep copies of a problem made after the
first call share one evaluation set.
"""

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .exceptions import DataError, FactorizationError
from .gp import Dataset
from .laplace import EmbeddingPrior


class _Problem:
    noise_variance = 0.0

    def __init__(self):
        self._splits = {}

    def latent(self, X):
        raise NotImplementedError

    def observe(self, X, rng, index=None):
        """Noisy observations at the rows of ``X``."""
        X = np.atleast_2d(X)
        f = self.latent(X)
        if self.noise_variance > 0:
            f = f + np.sqrt(self.noise_variance) * rng.standard_normal(f.shape)
        return f

    def eval_split(self, n_train, n_test, seed):
        """Uniform train/test points with noisy observations."""
        if n_test < 1 or n_train < 1:
            raise DataError("evaluation needs at least one training and one test point")
        key = (n_train, n_test, seed)
        if key not in self._splits:
            rng = np.random.default_rng(seed)
            X = rng.uniform(-1.0, 1.0, size=(n_train + n_test, self.D))
            Y = self.observe(X, rng)
            data = Dataset(X, Y, self.noise_variance)
            self._splits[key] = (data.subset(slice(0, n_train)),
                                 data.subset(slice(n_train, None)))
        return self._splits[key]


class SyntheticProblem(_Problem):
    """A function drawn from the embedded GP itself.

    ``R`` is drawn from the embedding prior and the latent function from a
    zero-mean GP with unit output scale and unit length scale on ``u = x R^T``.
    Sample paths are built lazily: each new query is drawn jointly
    conditioned on every latent value drawn so far, so repeated queries are
    consistent.
    """

    def __init__(self, D, d, seed, noise_variance=0.01, prior_std=None, scale=1.0):
        super().__init__()
        if not 1 <= d <= D:
            raise DataError(f"need 1 <= d <= D, got d={d}, D={D}")
        self.D, self.d = D, d
        self.noise_variance = noise_variance
        self.scale2 = scale**2
        self._rng = np.random.default_rng(seed)
        prior = EmbeddingPrior(prior_std) if prior_std else EmbeddingPrior.default(D)
        self.R = prior.sample_R(self._rng, d, D)
        self._U = np.empty((0, d))
        self._f = np.empty(0)
        self._L = np.empty((0, 0))
        self._z = np.empty(0)   # L^{-1} f

    def _k(self, A, B):
        return self.scale2 * np.exp(-0.5 * cdist(A, B, "sqeuclidean"))

    def _match(self, U, tol=1e-10):
        """Index of an existing point equal to each row of ``U``, else -1."""
        if self._U.shape[0] == 0:
            return np.full(U.shape[0], -1)
        dist = cdist(U, self._U, "chebyshev")
        j = dist.argmin(axis=1)
        return np.where(dist[np.arange(U.shape[0]), j] <= tol * (1 + np.abs(U).max()), j, -1)

    def _extend(self, Unew):
        m = Unew.shape[0]
        Knn = self._k(Unew, Unew)
        if self._U.shape[0]:
            A = solve_triangular(self._L, self._k(self._U, Unew), lower=True)
            mean = A.T @ self._z
            cov = Knn - A.T @ A
        else:
            A = np.empty((0, m))
            mean = np.zeros(m)
            cov = Knn
        for jitter in 10.0 ** np.arange(-10, -1) * self.scale2:
            try:
                C = cholesky(cov + jitter * np.eye(m), lower=True)
                break
            except np.linalg.LinAlgError:
                continue
        else:
            raise FactorizationError("could not extend the latent sample path")
        z = self._rng.standard_normal(m)
        f = mean + C @ z
        n = self._L.shape[0]
        L = np.zeros((n + m, n + m))
        L[:n, :n] = self._L
        L[n:, :n] = A.T
        L[n:, n:] = C
        self._L = L
        self._z = np.concatenate([self._z, z])
        self._U = np.vstack([self._U, Unew])
        self._f = np.concatenate([self._f, f])

    def latent(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        U = X @ self.R.T
        idx = self._match(U)
        new = np.flatnonzero(idx < 0)
        if new.size:
            # collapse duplicates inside the batch before sampling
            Unew = U[new]
            same = cdist(Unew, Unew, "chebyshev") <= 1e-10 * (1 + np.abs(Unew).max())
            first = same.argmax(axis=1)
            keep = np.unique(first)
            self._extend(Unew[keep])
            idx = self._match(U)
        return self._f[idx]


def branin(a, b):
    """Standard Branin function on its usual domain [-5, 10] x [0, 15]."""
    return ((b - 5.1 / (4 * np.pi**2) * a**2 + 5.0 / np.pi * a - 6.0) ** 2
            + 10.0 * (1.0 - 1.0 / (8 * np.pi)) * np.cos(a) + 10.0)


class BraninProblem(_Problem):
    """Branin embedded in D dimensions through a prior-drawn 2 x D ``R``.

    Each embedded coordinate ``u_k`` ranges over ``[-c_k, c_k]`` with
    ``c_k = sum_j |R_kj|`` on the box; it is mapped affinely onto the Branin
    domain.  Observations are noiseless.
    """

    LOW = np.array([-5.0, 0.0])
    HIGH = np.array([10.0, 15.0])

    def __init__(self, D, seed, prior_std=None, noise_variance=0.0):
        super().__init__()
        if D < 2:
            raise DataError("Branin needs D >= 2")
        self.D, self.d = D, 2
        self.noise_variance = noise_variance
        rng = np.random.default_rng(seed)
        prior = EmbeddingPrior(prior_std) if prior_std else EmbeddingPrior.default(D)
        self.R = prior.sample_R(rng, 2, D)
        self._reach = np.abs(self.R).sum(axis=1)

    def latent(self, X):
        U = np.atleast_2d(X) @ self.R.T
        z = self.LOW + (U + self._reach) / (2 * self._reach) * (self.HIGH - self.LOW)
        return branin(z[:, 0], z[:, 1])


class DatasetProblem(_Problem):
    """A fixed (normalized) dataset; queries are answered by row index."""

    def __init__(self, data):
        super().__init__()
        self.data = data
        self.D = data.D
        self.R = None
        self._test_index = {}

    def observe(self, X, rng, index=None):
        if index is None:
            raise DataError("dataset problems are observed by pool index")
        return self.data.Y[np.atleast_1d(index)]

    def eval_split(self, n_train, n_test, seed):
        """Disjoint random train/test subsets of the dataset rows."""
        if n_test < 1 or n_train < 1:
            raise DataError("evaluation needs at least one training and one test point")
        if n_train + n_test > self.data.N:
            raise DataError(f"dataset has {self.data.N} rows, split needs "
                            f"{n_train + n_test}")
        key = (n_train, n_test, seed)
        if key not in self._splits:
            perm = np.random.default_rng(seed).permutation(self.data.N)
            self._splits[key] = (self.data.subset(np.sort(perm[n_test:n_test + n_train])),
                                 self.data.subset(np.sort(perm[:n_test])))
            self._test_index[key] = np.sort(perm[:n_test])
        return self._splits[key]

    def test_indices(self, n_train, n_test, seed):
        self.eval_split(n_train, n_test, seed)
        return self._test_index[(n_train, n_test, seed)]

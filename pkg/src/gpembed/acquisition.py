"""Active selection over candidate pools.

BALD scores a candidate by the ratio of the MGP marginal variance to the
MAP variance; uncertainty sampling (UNC) by the marginal variance itself.
Both are maximized over a fixed pool of points, with ties broken by the
lowest index.
"""

from dataclasses import dataclass

import numpy as np

from . import marginal
from .exceptions import InfeasibleError, PoolExhaustedError

BOX, SPHERE, DATASET = "box-uniform", "sphere-uniform", "dataset"


@dataclass(frozen=True)
class CandidatePool:
    points: np.ndarray
    provenance: np.ndarray

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class UtilityField:
    values: np.ndarray
    index: int
    method: str


def bald_utility(state, Sigma, x):
    """MGP variance divided by MAP variance; 4/3 where the MAP variance is
    degenerate."""
    single = np.ndim(x) == 1
    pd = marginal.predictive_derivatives(state, np.atleast_2d(x))
    V = pd.variance
    Vt = marginal.mgp_variance(pd, np.atleast_2d(Sigma) if np.size(Sigma) else
                               np.zeros((0, 0)), state.hp.scale2)
    ok = V > marginal.VARIANCE_FLOOR * state.hp.scale2
    out = np.full(V.shape, 4.0 / 3.0)
    out[ok] = Vt[ok] / V[ok]
    return float(out[0]) if single else out


def uncertainty_utility(state, Sigma, x):
    """MGP marginal variance (entropy is monotone in it)."""
    single = np.ndim(x) == 1
    pred = marginal.mgp_predict(state, Sigma if np.size(Sigma) else np.zeros((0, 0)),
                                np.atleast_2d(x))
    return float(pred.variance[0]) if single else pred.variance


UTILITIES = {"bald": bald_utility, "unc": uncertainty_utility}


def argmax_excluding(values, exclude=()):
    """Index of the largest value not in ``exclude``; lowest index on ties."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise PoolExhaustedError("empty pool")
    masked = values.copy()
    masked[np.isnan(masked)] = -np.inf
    excluded = np.zeros(values.size, dtype=bool)
    if len(exclude):
        excluded[np.asarray(list(exclude), dtype=int)] = True
    if excluded.all():
        raise PoolExhaustedError(f"all {values.size} candidates already selected")
    masked[excluded] = -np.inf
    top = masked[~excluded].max()
    return int(np.flatnonzero((masked == top) & ~excluded)[0])


def select_next(pool, utility_fn, exclude=()):
    """Deterministic pool argmax of ``utility_fn`` (maps M x D to M values)."""
    points = pool.points if isinstance(pool, CandidatePool) else np.atleast_2d(pool)
    if points.shape[0] == 0:
        raise PoolExhaustedError("empty pool")
    return argmax_excluding(utility_fn(points), exclude)


def utility_field(method, state, Sigma, points, exclude=()):
    values = UTILITIES[method](state, Sigma, points)
    return UtilityField(values, argmax_excluding(values, exclude), method.upper())


def generate_pool(D, n_box, n_sphere, rng=None):
    """``n_box`` uniform points in [-1, 1]^D followed by ``n_sphere``
    uniform points in the unit D-ball."""
    if n_box < 0 or n_sphere < 0:
        raise ValueError("pool sizes must be non-negative")
    rng = np.random.default_rng(rng)
    box = rng.uniform(-1.0, 1.0, size=(n_box, D))
    direction = rng.standard_normal((n_sphere, D))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.uniform(size=(n_sphere, 1)) ** (1.0 / D)
    ball = np.clip(direction * radius, -1.0, 1.0)
    provenance = np.array([BOX] * n_box + [SPHERE] * n_sphere, dtype=object)
    return CandidatePool(np.vstack([box, ball]), provenance)


def extreme_corners(R_hat):
    """For each row of ``R_hat`` the box corner maximizing that embedded
    coordinate, and its negation (the minimizer).

    Returns an array of shape (d, 2, D); ``[i, 0]`` is the maximizer.
    Zero entries get sign +1.
    """
    R_hat = np.atleast_2d(np.asarray(R_hat, dtype=float))
    sig = np.where(R_hat >= 0, 1.0, -1.0)
    return np.stack([sig, -sig], axis=1)


def _project_box_hyperplane(z, r, u, tol=1e-15):
    """Euclidean projection of ``z`` onto ``{x in [-1,1]^D : x . r = u}``."""
    def point(tau):
        return np.clip(z - tau * r, -1.0, 1.0)

    rr = r @ r
    span = (np.abs(z).max() + 1.0) / np.abs(r[r != 0]).min() + 1.0
    lo, hi = -span, span                 # phi(lo) >= u >= phi(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if point(mid) @ r > u:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, abs(mid)):
            break
    tau = 0.5 * (lo + hi)
    # exact correction on the active linear piece
    x = point(tau)
    free = (np.abs(z - tau * r) < 1.0) & (r != 0)
    denom = r[free] @ r[free]
    if denom > 1e-14 * rr:
        tau += (x @ r - u) / denom
        x = point(tau)
    return x


def preimage(u, R_hat, Sigma, max_iter=20000, tol=1e-13):
    """Least-uncertain input mapping to the embedded value ``u`` (d = 1).

    Minimizes ``x Sigma x^T`` over ``x`` in [-1, 1]^D subject to
    ``x R_hat^T = u`` by accelerated projected gradient, where projection
    onto the box-hyperplane intersection reduces to a scalar root search.
    """
    R_hat = np.atleast_2d(np.asarray(R_hat, dtype=float))
    if R_hat.shape[0] != 1:
        raise NotImplementedError("preimage is only available for d = 1")
    r = R_hat[0]
    D = r.size
    Sigma = np.asarray(Sigma, dtype=float).reshape(D, D)
    reach = np.abs(r).sum()
    if reach == 0.0 or abs(u) > reach * (1 + 1e-12):
        raise InfeasibleError(f"u={u} outside reachable interval [-{reach}, {reach}]")
    if abs(u) >= reach:
        return np.sign(u) * extreme_corners(R_hat)[0, 0]

    Sigma = 0.5 * (Sigma + Sigma.T)
    L = 2.0 * max(np.linalg.eigvalsh(Sigma).max(), 0.0)
    x = _project_box_hyperplane(np.zeros(D), r, u)
    if L == 0.0:
        return x
    y, t = x.copy(), 1.0
    obj = x @ Sigma @ x
    for _ in range(max_iter):
        x_new = _project_box_hyperplane(y - (2.0 / L) * (Sigma @ y), r, u)
        obj_new = x_new @ Sigma @ x_new
        if obj_new > obj and t > 1.0:
            # adaptive restart of the momentum
            y, t = x.copy(), 1.0
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        step = np.linalg.norm(x_new - x)
        x, t, obj = x_new, t_new, obj_new
        if step < tol:
            break
    return x

"""Passive designs and the LASSO baseline."""

import numpy as np

from .exceptions import DataError


def random_design(D, n, rng=None):
    """``n`` i.i.d. uniform points in [-1, 1]^D."""
    rng = np.random.default_rng(rng)
    return rng.uniform(-1.0, 1.0, size=(n, D))


def latin_hypercube(D, n, rng=None):
    """Latin hypercube design on [-1, 1]^D.

    Each coordinate places exactly one point in each of ``n`` equal-width
    bins, jittered uniformly within its bin; bin orders are independent
    random permutations per coordinate.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(rng)
    bins = np.column_stack([rng.permutation(n) for _ in range(D)])
    unit = (bins + rng.uniform(size=(n, D))) / n
    return 2.0 * unit - 1.0


def soft_threshold(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def lasso_objective(X, Y, w, lam, intercept=0.0):
    r = Y - X @ w - intercept
    return 0.5 * np.mean(r * r) + lam * np.sum(np.abs(w))


def lasso_coordinate_descent(X, Y, lam, w0=None, tol=1e-8, max_sweeps=10000,
                             history=None):
    """Minimize ``(1/2N) ||Y - X w||^2 + lam ||w||_1`` by cyclic coordinate
    descent with soft thresholding.

    Stops when the largest coefficient change in a sweep is below ``tol``.
    If ``history`` is a list, the objective after each sweep is appended.
    """
    N, D = X.shape
    w = np.zeros(D) if w0 is None else np.array(w0, dtype=float)
    col_sq = np.sum(X * X, axis=0) / N
    r = Y - X @ w
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(D):
            if col_sq[j] == 0.0:
                w[j] = 0.0
                continue
            rho = X[:, j] @ r / N + col_sq[j] * w[j]
            new = soft_threshold(rho, lam) / col_sq[j]
            if new != w[j]:
                r -= X[:, j] * (new - w[j])
                delta = max(delta, abs(new - w[j]))
                w[j] = new
        if history is not None:
            history.append(0.5 * np.mean(r * r) + lam * np.sum(np.abs(w)))
        if delta < tol:
            break
    return w


def default_lambda_grid(X, Y, n=50):
    """50 log-spaced values in [1e-6, 1e1] * max|X^T Y| / N."""
    scale = np.max(np.abs(X.T @ Y)) / X.shape[0]
    if scale == 0.0:
        scale = 1.0
    return np.logspace(-6, 1, n) * scale


def lasso_fit(X, Y, lambda_grid=None, fit_intercept=True, tol=1e-8):
    """Fit LASSO over a grid and keep the lambda with the smallest training
    squared loss (the largest such lambda on ties).

    Returns ``(weights, intercept, lam)``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise DataError("LASSO inputs must be finite")
    if fit_intercept:
        x_mean, y_mean = X.mean(axis=0), Y.mean()
    else:
        x_mean, y_mean = np.zeros(X.shape[1]), 0.0
    Xc, Yc = X - x_mean, Y - y_mean
    grid = default_lambda_grid(Xc, Yc) if lambda_grid is None else np.asarray(lambda_grid, float)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")

    best = None
    w = None
    # warm starts from large to small lambda
    for lam in sorted(grid, reverse=True):
        w = lasso_coordinate_descent(Xc, Yc, lam, w0=w, tol=tol)
        loss = np.mean((Yc - Xc @ w) ** 2)
        if best is None or loss < best[0]:
            best = (loss, w.copy(), lam)
    _, w, lam = best
    return w, y_mean - x_mean @ w, float(lam)

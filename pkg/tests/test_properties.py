import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gpembed import acquisition, baselines, gp, marginal, metrics
from gpembed.gp import Dataset
from gpembed.data import normalize
from gpembed.sampling import GaussianSummary

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
seeds = st.integers(0, 2**32 - 1)


def random_state(seed, N=6, D=3, d=1):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (N, D))
    hp = gp.Hyperparameters(rng.standard_normal((d, D)), log_noise=-2.0)
    state = gp.PosteriorState(Dataset(X, np.sin(X.sum(1))), hp)
    A = rng.standard_normal((d * D, d * D))
    return state, 0.05 * A @ A.T, rng


class TestKernelProperties:
    @given(seeds, st.integers(1, 3))
    @settings(max_examples=30, deadline=None)
    def test_symmetric_positive_semidefinite(self, seed, d):
        rng = np.random.default_rng(seed)
        hp = gp.Hyperparameters(rng.standard_normal((d, 4)))
        A = rng.uniform(-1, 1, (8, 4))
        K = gp.kernel_matrix(A, A, hp)
        np.testing.assert_allclose(K, K.T)
        assert np.linalg.eigvalsh(K).min() > -1e-10

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_invariant_to_rotating_the_embedding(self, seed):
        rng = np.random.default_rng(seed)
        R = rng.standard_normal((2, 4))
        Q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        A, B = rng.uniform(-1, 1, (5, 4)), rng.uniform(-1, 1, (3, 4))
        np.testing.assert_allclose(gp.kernel_matrix(A, B, gp.Hyperparameters(R)),
                                   gp.kernel_matrix(A, B, gp.Hyperparameters(Q @ R)),
                                   atol=1e-12)


class TestMarginalProperties:
    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_variance_ordering(self, seed):
        state, Sigma, rng = random_state(seed)
        pts = rng.uniform(-1.5, 1.5, (10, 3))
        p = marginal.marginal_predictions(state, Sigma, pts)
        np.testing.assert_array_equal(p["MAP"].mean, p["MGP"].mean)
        assert np.all(p["BBQ"].variance >= p["MAP"].variance - 1e-15)
        assert np.all(p["MGP"].variance >= p["BBQ"].variance - 1e-15)

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_bald_at_least_four_thirds(self, seed):
        state, Sigma, rng = random_state(seed)
        u = acquisition.bald_utility(state, Sigma, rng.uniform(-1, 1, (10, 3)))
        assert np.all(u >= 4 / 3 - 1e-12)


class TestSymmetryProperties:
    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_predictions_blind_to_embedding_rotation(self, seed):
        # R -> exp(tA) R leaves every prediction unchanged, so the predictive
        # derivatives have no component along the rotation tangent A R
        state, _, rng = random_state(seed, D=4, d=2)
        tangent = (np.array([[0.0, 1.0], [-1.0, 0.0]]) @ state.hp.R).ravel()
        pd = marginal.predictive_derivatives(state, rng.uniform(-1, 1, (10, 4)))
        scale = np.linalg.norm(tangent)
        assert np.all(np.abs(pd.dm @ tangent) <= 1e-9 * scale * (1 + np.abs(pd.dm).max()))
        assert np.all(np.abs(pd.dV @ tangent) <= 1e-9 * scale * (1 + np.abs(pd.dV).max()))


class TestSelectionProperties:
    @given(st.lists(finite, min_size=1, max_size=30), st.data())
    def test_argmax_respects_exclusion(self, values, data):
        excl = data.draw(st.sets(st.integers(0, len(values) - 1), max_size=len(values) - 1))
        i = acquisition.argmax_excluding(values, excl)
        assert i not in excl
        assert all(values[i] >= v for j, v in enumerate(values) if j not in excl)
        assert all(values[j] < values[i] for j in range(i) if j not in excl)


class TestGeometryProperties:
    @given(arrays(float, (2, 5), elements=finite))
    def test_corners_extremize_each_row(self, R):
        c = acquisition.extreme_corners(R)
        for i in range(2):
            np.testing.assert_allclose(c[i, 0] @ R[i], np.abs(R[i]).sum())
            np.testing.assert_allclose(c[i, 1] @ R[i], -np.abs(R[i]).sum())

    @given(seeds, st.floats(-0.95, 0.95))
    @settings(max_examples=40, deadline=None)
    def test_preimage_feasible(self, seed, frac):
        rng = np.random.default_rng(seed)
        r = rng.standard_normal(4)
        A = rng.standard_normal((4, 4))
        u = frac * np.abs(r).sum()
        x = acquisition.preimage(u, r[None], A @ A.T + 0.1 * np.eye(4))
        assert np.abs(x).max() <= 1 + 1e-12
        assert abs(x @ r - u) <= 1e-8 * (1 + abs(u))


class TestBaselineProperties:
    @given(arrays(float, 10, elements=finite), st.floats(0, 2))
    def test_soft_threshold_shrinks(self, z, lam):
        s = baselines.soft_threshold(z, lam)
        assert np.all(np.abs(s) <= np.abs(z))
        assert np.all(s * z >= 0)
        np.testing.assert_allclose(np.abs(z - s), np.minimum(np.abs(z), lam), atol=1e-12)

    @given(seeds, st.integers(1, 20), st.integers(1, 5))
    @settings(max_examples=30, deadline=None)
    def test_latin_hypercube_stratified(self, seed, n, D):
        X = baselines.latin_hypercube(D, n, rng=seed)
        bins = np.minimum(np.floor((X + 1) / 2 * n), n - 1).astype(int)
        for j in range(D):
            assert sorted(bins[:, j]) == list(range(n))


class TestMetricProperties:
    @given(finite, st.floats(0.01, 5), finite, st.floats(0.01, 5))
    def test_skld_non_negative_symmetric(self, m1, v1, m2, v2):
        p, q = GaussianSummary(m1, v1), GaussianSummary(m2, v2)
        a = metrics.skld(p, q)
        assert a >= -1e-12
        np.testing.assert_allclose(a, metrics.skld(q, p), rtol=1e-12, atol=1e-15)


class TestDataProperties:
    @given(seeds, st.integers(2, 30))
    @settings(max_examples=30, deadline=None)
    def test_normalize_round_trip(self, seed, N):
        rng = np.random.default_rng(seed)
        raw = Dataset(rng.uniform(-50, 50, (N, 3)), rng.standard_normal(N) * 7 + 3)
        ds, rec = normalize(raw)
        assert ds.X.min() >= -1 - 1e-12 and ds.X.max() <= 1 + 1e-12
        np.testing.assert_allclose(rec.inverse_X(ds.X), raw.X[:, rec.kept], atol=1e-9)
        np.testing.assert_allclose(rec.inverse_Y(ds.Y), raw.Y, atol=1e-9)

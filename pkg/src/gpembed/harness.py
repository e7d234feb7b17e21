"""Experiment orchestration: the active learning loop, baselines, and the
comparison of marginalization schemes.

Every random stream is derived from a master seed and a tuple of string or
integer keys, so runs are reproducible from ``(config, seed)`` and
independent of the order in which methods or repetitions execute.
"""

import copy
import json
import zlib
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import acquisition, baselines, gp, laplace, marginal, sampling
from .data import load_csv, normalize
from .exceptions import DataError, GPEmbedError
from .metrics import MetricReport, nll_metric, rmse_metric, skld
from .problems import BraninProblem, DatasetProblem, SyntheticProblem

METHODS = ("bald", "unc", "rand", "lh", "lasso")
PROBLEMS = ("synthetic", "branin", "csv")


def derive_seed(seed, *keys):
    """Integer seed for the stream named by ``keys`` under ``seed``."""
    words = [int(seed)] + [zlib.crc32(str(k).encode()) for k in keys]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def _rng(seed, *keys):
    return np.random.default_rng(derive_seed(seed, *keys))


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of an active learning experiment.

    ``learn_scale`` / ``learn_noise`` default to learning both for Branin
    and CSV problems and to fixing them at their true values for synthetic
    problems.
    """

    problem: str = "synthetic"
    D: int = 10
    d: int = 2
    csv_path: str | None = None
    target_column: str | None = None
    methods: tuple = ("bald", "rand", "lasso")
    budget: int = 30
    n_box: int = 1000
    n_sphere: int = 1000
    prior_std: float | None = None
    marginalize: tuple = ("R",)
    learn_scale: bool | None = None
    learn_noise: bool | None = None
    noise_variance: float = 0.01
    n_train: int = 100
    n_test: int = 1000
    repetitions: int = 5
    seed: int = 0
    n_restarts: int = 1
    maxiter: int = 200

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "marginalize", tuple(self.marginalize))
        if self.problem not in PROBLEMS:
            raise DataError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise DataError(f"unknown methods {bad}; choose from {METHODS}")
        if self.budget < 1:
            raise DataError("budget must be at least 1")
        if self.repetitions < 1:
            raise DataError("repetitions must be at least 1")
        if self.problem == "csv":
            if not self.csv_path or not self.target_column:
                raise DataError("csv problems need a path and a target column")
        elif not 1 <= self.d <= self.D:
            raise DataError(f"need 1 <= d <= D, got d={self.d}, D={self.D}")
        if self.problem == "branin" and self.d != 2:
            raise DataError("Branin has d = 2")
        if self.n_box < 0 or self.n_sphere < 0:
            raise DataError("pool sizes must be non-negative")
        if set(self.marginalize) - set(laplace.BLOCKS):
            raise DataError(f"marginalize must be a subset of {laplace.BLOCKS}")

    @property
    def scale_free(self):
        return self.problem != "synthetic" if self.learn_scale is None else self.learn_scale

    @property
    def noise_free(self):
        return self.problem != "synthetic" if self.learn_noise is None else self.learn_noise

    def to_dict(self):
        out = asdict(self)
        out["methods"] = list(self.methods)
        out["marginalize"] = list(self.marginalize)
        return out

    @classmethod
    def from_dict(cls, values):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names})


@dataclass
class StepRecord:
    step: int
    index: int
    x: list
    y: float
    utility: float
    log_posterior: float
    trace_sigma: float


@dataclass
class RunRecord:
    """Everything a run produced; ``save``/``load`` round-trip exactly."""

    method: str
    repetition: int
    seed: int
    config: dict
    steps: list = field(default_factory=list)
    R_hat: list | None = None
    Sigma: list | None = None
    log_scale: float = 0.0
    log_noise: float = 0.0
    lasso_weights: list | None = None
    lasso_intercept: float | None = None
    metrics: dict | None = None

    @property
    def X(self):
        return np.array([s.x for s in self.steps])

    @property
    def Y(self):
        return np.array([s.y for s in self.steps])

    def to_json(self):
        out = asdict(self)
        return json.dumps(out, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        values = json.loads(text)
        values["steps"] = [StepRecord(**s) for s in values["steps"]]
        return cls(**values)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_json(fh.read())
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise DataError(f"cannot load run record {path}: {exc}") from exc


def make_problem(config, repetition):
    """Problem instance for one repetition (shared by every method)."""
    seed = derive_seed(config.seed, "problem", repetition)
    if config.problem == "synthetic":
        return SyntheticProblem(config.D, config.d, seed, config.noise_variance,
                                config.prior_std)
    if config.problem == "branin":
        return BraninProblem(config.D, seed, config.prior_std)
    raw, _ = load_csv(config.csv_path, config.target_column)
    data, _ = normalize(raw)
    return DatasetProblem(data)


def make_pool(config, problem, repetition):
    """Candidate pool and the problem row index of each candidate.

    Dataset problems use every row outside the evaluation test set.
    """
    if isinstance(problem, DatasetProblem):
        test = problem.test_indices(config.n_train, config.n_test,
                                    derive_seed(config.seed, "eval", repetition))
        rows = np.setdiff1d(np.arange(problem.data.N), test)
        pool = acquisition.CandidatePool(
            problem.data.X[rows], np.full(rows.size, acquisition.DATASET, dtype=object))
        return pool, rows
    pool = acquisition.generate_pool(problem.D, config.n_box, config.n_sphere,
                                     derive_seed(config.seed, "pool", repetition))
    return pool, None


def template_hyperparameters(config, D, d):
    """Starting hyperparameters; R starts at the prior mean (zero)."""
    log_noise = 0.5 * np.log(config.noise_variance) if config.noise_variance > 0 \
        else np.log(1e-3)
    return gp.Hyperparameters(np.zeros((d, D)), log_scale=0.0, log_noise=log_noise,
                              free_scale=config.scale_free, free_noise=config.noise_free)


def _prior(config, D):
    return laplace.EmbeddingPrior(config.prior_std) if config.prior_std \
        else laplace.EmbeddingPrior.default(D)


def _posterior(data, prior, template, config, init, rng):
    if data.N == 0:
        return laplace.laplace_approximation(data, prior, template,
                                             marginalize=config.marginalize)
    return laplace.laplace_approximation(
        data, prior, template, init=init, n_restarts=config.n_restarts, rng=rng,
        marginalize=config.marginalize, maxiter=config.maxiter)


def _full_theta(template, post):
    return replace(template, R=post.hp.R, log_scale=post.hp.log_scale,
                   log_noise=post.hp.log_noise).theta()


def _design(config, method, problem, pool, rows, repetition):
    """Non-adaptive designs; RAND and LASSO share one design."""
    rng = _rng(config.seed, "design", repetition)
    n = config.budget
    if rows is not None:
        if n > len(pool):
            raise DataError(f"budget {n} exceeds the {len(pool)} available rows")
        if method == "lh":
            target = baselines.latin_hypercube(problem.D, n, rng)
            chosen = []
            for t in target:
                dist = np.sum((pool.points - t) ** 2, axis=1)
                dist[chosen] = np.inf
                chosen.append(int(np.argmin(dist)))
            idx = np.array(chosen)
        else:
            idx = rng.permutation(len(pool))[:n]
        return pool.points[idx], idx, rng
    X = baselines.latin_hypercube(problem.D, n, rng) if method == "lh" \
        else baselines.random_design(problem.D, n, rng)
    return X, np.full(n, -1), rng


def _observe(problem, x, rng, rows, index):
    if rows is not None:
        return float(problem.observe(None, rng, index=rows[index])[0])
    return float(problem.observe(x[None, :], rng)[0])


def run_active_loop(config, method, repetition, problem=None, pool=None):
    """One run of ``method``: select ``config.budget`` points, then store the
    final embedding posterior.

    Adaptive methods refit the Laplace approximation before every choice
    (the first choice uses the prior) and take the pool argmax of their
    utility, never choosing a candidate twice.  Passing ``problem`` lets
    several methods share one problem instance; it is deep-copied so the
    caller's copy is not advanced.
    """
    if method not in METHODS:
        raise DataError(f"unknown method {method!r}")
    problem = make_problem(config, repetition) if problem is None else copy.deepcopy(problem)
    if pool is None:
        pool, rows = make_pool(config, problem, repetition)
    else:
        pool, rows = pool
    D = problem.D
    d = config.d if config.problem != "csv" else min(config.d, D)
    prior = _prior(config, D)
    template = template_hyperparameters(config, D, d)
    run_seed = derive_seed(config.seed, method, repetition)
    rng = np.random.default_rng(run_seed)
    record = RunRecord(method, repetition, run_seed, config.to_dict())
    data = gp.Dataset.empty(D, problem.noise_variance)

    adaptive = method in acquisition.UTILITIES
    if adaptive:
        points, chosen = pool.points, []
    else:
        points, design_index, obs_rng = _design(config, method, problem, pool, rows,
                                                repetition)

    init = None
    for t in range(config.budget):
        try:
            if method == "lasso":
                post = None
            else:
                post = _posterior(data, prior, template, config, init, rng)
                init = _full_theta(template, post)
            if adaptive:
                state = gp.PosteriorState(data, post.hp)
                field_ = acquisition.utility_field(method, state, post.Sigma, points,
                                                   exclude=chosen)
                index, utility = field_.index, float(field_.values[field_.index])
                chosen.append(index)
                x = points[index]
                y = _observe(problem, x, rng, rows, index)
            else:
                index, utility = int(design_index[t]), float("nan")
                x = points[t]
                y = _observe(problem, x, obs_rng, rows, index)
        except GPEmbedError as exc:
            raise type(exc)(f"{method} step {t}: {exc}") from exc
        data = data.append(x, y)
        record.steps.append(StepRecord(
            t, int(index), x.tolist(), y, utility,
            float("nan") if post is None else float(post.log_posterior),
            float("nan") if post is None else float(np.trace(post.Sigma))))

    if method == "lasso":
        w, b, lam = baselines.lasso_fit(data.X, data.Y)
        record.lasso_weights, record.lasso_intercept = w.tolist(), float(b)
        return record
    try:
        post = _posterior(data, prior, template, config, init, rng)
    except GPEmbedError as exc:
        raise type(exc)(f"{method} final fit: {exc}") from exc
    record.R_hat = post.hp.R.tolist()
    record.Sigma = post.Sigma.tolist()
    record.log_scale, record.log_noise = post.hp.log_scale, post.hp.log_noise
    return record


def evaluate_embedding(record, problem, n_train=100, n_test=1000, seed=0):
    """Test-set NLL and RMSE of the model a run ended with.

    GP runs are scored by a GP with hyperparameters fixed at the final mode,
    conditioned on ``n_train`` fresh points; LASSO runs by their linear
    predictor (RMSE only).  The split depends only on ``seed``.
    """
    if n_test < 1:
        raise DataError("n_test must be at least 1")
    if not record.steps:
        raise DataError("record has no steps")
    train, test = problem.eval_split(n_train, n_test, seed)
    if record.method == "lasso":
        mean = test.X @ np.asarray(record.lasso_weights) + record.lasso_intercept
        return MetricReport(rmse=rmse_metric(mean, test.Y), n_test=test.N, seed=seed)
    if record.R_hat is None:
        raise DataError("record has no final embedding")
    hp = gp.Hyperparameters(np.asarray(record.R_hat), log_scale=record.log_scale,
                            log_noise=record.log_noise)
    pred = gp.PosteriorState(train, hp).predict(test.X)
    return MetricReport(nll=nll_metric(pred.mean, pred.variance + hp.noise_variance, test.Y),
                        rmse=rmse_metric(pred.mean, test.Y), n_test=test.N, seed=seed)


def run_experiment(config, progress=None):
    """All methods times all repetitions; returns evaluated run records.

    The evaluation split of each repetition is drawn before any method
    queries the problem, so every method is scored on the same points.
    """
    records = []
    for rep in range(config.repetitions):
        problem = make_problem(config, rep)
        eval_seed = derive_seed(config.seed, "eval", rep)
        problem.eval_split(config.n_train, config.n_test, eval_seed)
        pool = make_pool(config, problem, rep)
        for method in config.methods:
            rec = run_active_loop(config, method, rep, problem, pool)
            rec.metrics = evaluate_embedding(rec, problem, config.n_train, config.n_test,
                                             eval_seed).to_dict()
            records.append(rec)
            if progress:
                progress(rec)
    return records


@dataclass(frozen=True)
class MarginalConfig:
    """Settings for comparing MAP, BBQ and MGP against slice sampling.

    Data come from an ARD GP on [-1, 1]^D with ``10 D`` training points
    (by default) and test points a few length scales away from training
    points.  Length scales are ``length_scale * exp(log_length_std * z)``
    per dimension; the default of 0.25 leaves the hyperparameters only
    weakly determined by 10 D points, and ``prior_std`` on the inverse
    length scales is set to match.
    """

    D: int = 5
    n_train: int | None = None
    n_test: int | None = None
    repetitions: int = 20
    n_samples: int = 1000
    burn_in: int = 200
    length_scale: float = 0.25
    log_length_std: float = 0.5
    prior_std: float = 4.0
    noise_variance: float = 0.01
    n_restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if (self.D < 1 or self.repetitions < 1 or self.n_samples < 1 or self.burn_in < 0
                or self.length_scale <= 0):
            raise DataError("invalid marginal comparison settings")

    def to_dict(self):
        return asdict(self)


MARGINAL_METHODS = ("MAP", "BBQ", "MGP")


def _ard_instance(config, rep):
    rng = _rng(config.seed, "marginal", rep)
    D = config.D
    n_train = config.n_train or 10 * D
    n_test = config.n_test or 10 * D
    r = np.exp(config.log_length_std * rng.standard_normal(D)) / config.length_scale
    X = rng.uniform(-1.0, 1.0, size=(n_train, D))
    base = X[rng.integers(n_train, size=n_test)]
    v = rng.standard_normal((n_test, D))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    s = rng.uniform(1.0, 3.0, size=(n_test, 1))
    Xs = base + s * v / r
    Z = np.vstack([X, Xs])
    truth = gp.Hyperparameters(np.diag(r))
    K = gp.kernel_matrix(Z, Z, truth)
    L, _ = gp.cholesky_with_jitter(K, 1.0)
    f = L @ rng.standard_normal(Z.shape[0])
    y = f + np.sqrt(config.noise_variance) * rng.standard_normal(f.shape)
    train = gp.Dataset(X, y[:n_train], config.noise_variance)
    return train, Xs, y[n_train:], rng


def compare_marginal(config, progress=None):
    """Per repetition, a dict of :class:`MetricReport` keyed by method.

    NLL scores noisy test targets under each predictive (plus noise); SKLD
    compares each latent predictive with the moment-matched slice-sampling
    posterior.
    """
    out = []
    for rep in range(config.repetitions):
        train, Xs, ys, rng = _ard_instance(config, rep)
        D = config.D
        template = gp.Hyperparameters(
            np.eye(D), log_noise=0.5 * np.log(config.noise_variance),
            R_mask=np.eye(D, dtype=bool), free_scale=True)
        prior = laplace.EmbeddingPrior(config.prior_std)
        post = laplace.laplace_approximation(train, prior, template, init=template.theta(),
                                             n_restarts=config.n_restarts, rng=rng,
                                             marginalize=("R", "scale"))
        state = gp.PosteriorState(train, post.hp)
        preds = marginal.marginal_predictions(state, post.Sigma, Xs)
        samples = sampling.slice_sample_posterior(
            train, prior, post.hp, config.n_samples, config.burn_in, rng,
            theta_init=post.hp.theta())
        truth = sampling.mcmc_predictive(samples, train, post.hp, Xs)
        noise = post.hp.noise_variance
        seed = derive_seed(config.seed, "marginal", rep)
        reports = {}
        for name in MARGINAL_METHODS:
            p = preds[name]
            reports[name] = MetricReport(
                nll=nll_metric(p.mean, p.variance + noise, ys),
                rmse=rmse_metric(p.mean, ys),
                skld=float(np.mean(skld(p, truth))), n_test=len(ys), seed=seed)
        reports["MCMC"] = MetricReport(
            nll=nll_metric(truth.mean, truth.variance + noise, ys),
            rmse=rmse_metric(truth.mean, ys), skld=0.0, n_test=len(ys), seed=seed)
        out.append(reports)
        if progress:
            progress(rep, reports)
    return out

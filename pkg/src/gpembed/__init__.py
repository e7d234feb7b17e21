"""Active learning of linear embeddings for Gaussian process regression."""

from .exceptions import (DataError, DegenerateVarianceError, FactorizationError,
                         GPEmbedError, InfeasibleError, NumericalError,
                         OptimizationError, PoolExhaustedError)
from .gp import Dataset, Hyperparameters, PosteriorState, fit_posterior, predict
from .laplace import EmbeddingPrior, laplace_approximation, map_embedding
from .marginal import bbq_predict, map_predict, marginal_predictions, mgp_predict

__version__ = "0.1.0"

__all__ = [
    "DataError", "DegenerateVarianceError", "FactorizationError", "GPEmbedError",
    "InfeasibleError", "NumericalError", "OptimizationError", "PoolExhaustedError",
    "Dataset", "Hyperparameters", "PosteriorState", "fit_posterior", "predict",
    "EmbeddingPrior", "laplace_approximation", "map_embedding",
    "bbq_predict", "map_predict", "marginal_predictions", "mgp_predict",
]

"""Metric-learning recommender in the Poincare ball.

Learns user and item embeddings with a pull-push triplet hinge on squared
ball distances plus a distortion penalty, optimized by projected
Riemannian SGD. Euclidean and tangent-space variants share the same
storage, sampler, and candidate lists for controlled comparison.
"""

from .baselines import (euclidean_triplet_grad, euclidean_triplet_loss, from_tangent,
                        hyperts_step, to_tangent)
from .config import TrainConfig, load_config
from .data import (Dataset, Interaction, Triplet, build_candidate_cache,
                   build_dataset, build_eval_candidates, load_interactions,
                   sample_triplet, sample_triplets)
from .errors import (ConfigError, DataFormatError, InvalidInputError, NumericalError,
                     OutOfBallError, SamplingExhaustedError)
from .evaluation import EvalResult, evaluate, hr_at_k, ndcg_at_k, rank_ground_truth
from .gyrovector import (conformal_factor, distance, exp_map, exp_map_origin,
                         log_map, log_map_origin, mobius_add, mobius_scalar_mul,
                         mobius_sub, poincare_distance, project_to_ball)
from .model import (EmbeddingStore, InitConfig, Variant, init_embeddings,
                    load_embeddings, save_embeddings)
from .objective import (LossConfig, TripletGrad, distortion_loss, pull_push_loss,
                        total_loss, triplet_grad)
from .optimizer import OptimConfig, riemannian_rescale, rsgd_step
from .train import RunResult, fit, run_eval, run_sweep, run_train

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataFormatError", "Dataset", "EmbeddingStore", "EvalResult",
    "InitConfig", "Interaction", "InvalidInputError", "LossConfig", "NumericalError",
    "OptimConfig", "OutOfBallError", "RunResult", "SamplingExhaustedError",
    "TrainConfig", "Triplet", "TripletGrad", "Variant",
    "build_candidate_cache", "build_dataset", "build_eval_candidates",
    "conformal_factor", "distance", "distortion_loss", "euclidean_triplet_grad",
    "euclidean_triplet_loss", "evaluate", "exp_map", "exp_map_origin", "fit",
    "from_tangent", "hr_at_k", "hyperts_step", "init_embeddings", "load_config",
    "load_embeddings", "load_interactions", "log_map", "log_map_origin",
    "mobius_add", "mobius_scalar_mul", "mobius_sub", "ndcg_at_k",
    "poincare_distance", "project_to_ball", "pull_push_loss", "rank_ground_truth",
    "riemannian_rescale", "rsgd_step", "run_eval", "run_sweep", "run_train",
    "sample_triplet", "sample_triplets", "save_embeddings", "to_tangent",
    "total_loss", "triplet_grad",
]

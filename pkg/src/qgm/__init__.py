"""Hidden quantum Markov models trained on the complex Stiefel manifold."""

from .errors import (ConstraintError, DimensionError, NumericalError, ParseError,
                     ZeroProbabilityError)
from .quantum import (apply_channel, bayes_condition, choi_matrix, choi_psd_check,
                      kraus_tp_residual, random_density, random_stiefel,
                      stack_kraus, stiefel_residual, unstack_kraus,
                      validate_density)
from .hmm import (EmConfig, Hmm, baum_welch_fit, forward_log_likelihood,
                  oom_operators, sample_hmm)
from .hqmm import (Hqmm, encode_hmm, filter_step, log_likelihood,
                   log_likelihood_batch, random_hqmm, sample)
from .gradient import (finite_difference_gradient, gradient_check, loss_gradient,
                       wirtinger_fd)
from .optim import (OptimizerState, TrainConfig, cayley_retract,
                    cayley_retract_smw, descent_direction, train)
from .metrics import (accuracy, classify, da_score, da_scores, da_summary,
                      kfold_splits, squash_f)
from .data import (LabeledSequenceSet, WindowSet, gen_synthetic, load_dataset,
                   load_splice, save_dataset, window_sequences)
from .modelfile import load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "ConstraintError", "DimensionError", "NumericalError", "ParseError",
    "ZeroProbabilityError",
    "apply_channel", "bayes_condition", "choi_matrix", "choi_psd_check",
    "kraus_tp_residual", "random_density", "random_stiefel", "stack_kraus",
    "stiefel_residual", "unstack_kraus", "validate_density",
    "EmConfig", "Hmm", "baum_welch_fit", "forward_log_likelihood",
    "oom_operators", "sample_hmm",
    "Hqmm", "encode_hmm", "filter_step", "log_likelihood",
    "log_likelihood_batch", "random_hqmm", "sample",
    "finite_difference_gradient", "gradient_check", "loss_gradient",
    "wirtinger_fd",
    "OptimizerState", "TrainConfig", "cayley_retract", "cayley_retract_smw",
    "descent_direction", "train",
    "accuracy", "classify", "da_score", "da_scores", "da_summary",
    "kfold_splits", "squash_f",
    "LabeledSequenceSet", "WindowSet", "gen_synthetic", "load_dataset",
    "load_splice", "save_dataset", "window_sequences",
    "load_model", "save_model",
]

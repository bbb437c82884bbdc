"""Empirical Bayes multivariate normal means with mixture-of-normals priors."""

from ._ebmnm import (
    Dataset,
    EbmnmError,
    MixturePrior,
    ed_update,
    empirical_fsr,
    fa_update,
    fit,
    kl_divergence,
    log_likelihood,
    penalized_log_likelihood,
    random_init,
    responsibilities,
    scale_factor_update,
    simulate,
    summarize,
    ted_update,
)

__all__ = [
    "Dataset",
    "EbmnmError",
    "MixturePrior",
    "ed_update",
    "empirical_fsr",
    "fa_update",
    "fit",
    "kl_divergence",
    "log_likelihood",
    "penalized_log_likelihood",
    "random_init",
    "responsibilities",
    "scale_factor_update",
    "simulate",
    "summarize",
    "ted_update",
]

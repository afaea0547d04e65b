"""Exact outlier-robust multi-output Gaussian process regression (MO-RCGP)."""

from ._core import (
    Dataset,
    FitMethod,
    FitResult,
    FittedState,
    IcmParams,
    OptimizerConfig,
    Predictive,
    WeightKind,
    WeightSpec,
    WeightState,
    block_gram,
    build_weight_state,
    fast_mcd,
    fit,
    kl_gaussian,
    load_csv,
    mogp_predict,
    morcgp_predict,
    pif_curve,
    rmse,
    save_csv,
    simulate_preset,
    sq_exp,
)

__all__ = [
    "Dataset",
    "FitMethod",
    "FitResult",
    "FittedState",
    "IcmParams",
    "OptimizerConfig",
    "Predictive",
    "WeightKind",
    "WeightSpec",
    "WeightState",
    "block_gram",
    "build_weight_state",
    "fast_mcd",
    "fit",
    "kl_gaussian",
    "load_csv",
    "mogp_predict",
    "morcgp_predict",
    "pif_curve",
    "rmse",
    "save_csv",
    "simulate_preset",
    "sq_exp",
]

"""Neural survival regression with multiplicative frailty.

The conditional hazard is omega * exp(nu(t, z)) with a positive frailty
omega and a neural network log-hazard nu.  Marginalizing the frailty
gives closed-form cumulative hazard and survival curves, and the models
are fit by maximizing the censored-data log-likelihood directly.
"""

from .data import Dataset, Schema, load_csv, make_cv_plan
from .estimators import FrailtySurvivalRegressor
from .frailty import FrailtySpec
from .metrics import c_index, evaluation_report, ibs, inbll, km_censoring
from .model import (
    TrainConfig,
    cum_hazard,
    load_model,
    log_hazard,
    oll,
    save_model,
    survival,
    survival_curve,
    survival_matrix,
    train,
)
from .synth import SynthConfig, generate, holdout_points

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "FrailtySpec",
    "FrailtySurvivalRegressor",
    "Schema",
    "SynthConfig",
    "TrainConfig",
    "c_index",
    "cum_hazard",
    "evaluation_report",
    "generate",
    "holdout_points",
    "ibs",
    "inbll",
    "km_censoring",
    "load_csv",
    "load_model",
    "log_hazard",
    "make_cv_plan",
    "oll",
    "save_model",
    "survival",
    "survival_curve",
    "survival_matrix",
    "train",
]

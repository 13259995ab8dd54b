"""Regularized garrotized kernel machines for Cox regression.

The model is a Cox partially linear model ``x'beta + h(z)`` where ``x`` is a
low-dimensional clinical block fitted with a lasso penalty and ``h`` lives in
the RKHS of a Gaussian kernel whose coordinates are rescaled by nonnegative
garrote weights ``delta``. Fitting is by block coordinate ascent on the
penalized partial likelihood; penalties are picked by cross-validated partial
likelihood.
"""
from .coxlik import FitState, LambdaTriple
from .data import (SurvivalDataset, Standardizer, apply_standardization, read_csv,
                   standardize, write_csv)
from .errors import NotConverged, ReggkmError
from .fitter import FitConfig, FittedModel, fit, fit_lasso_cox
from .kernel import GarroteKernelSpec
from .metrics import auc_integrated, c_statistic, evaluate
from .simgen import SettingSpec, generate, run_benchmark
from .solvers import SpgConfig
from .tuning import CvPlan, cvpl, grid_search

__version__ = "0.1.0"

__all__ = [
    "CvPlan", "FitConfig", "FitState", "FittedModel", "GarroteKernelSpec", "LambdaTriple",
    "NotConverged", "ReggkmError", "SettingSpec", "SpgConfig", "Standardizer",
    "SurvivalDataset", "apply_standardization", "auc_integrated", "c_statistic", "cvpl",
    "evaluate", "fit", "fit_lasso_cox", "generate", "grid_search", "read_csv",
    "run_benchmark", "standardize", "write_csv",
]

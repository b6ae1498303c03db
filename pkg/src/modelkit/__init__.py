"""Numerical workbench for PLS, envelope, confidence, causal and finite quantum models."""

from modelkit.data_model import Dataset, Moments, center, load_csv, ols_fit, sample_moments
from modelkit.pls_sample import PlsFit, cross_validate, pls_fit, predict
from modelkit.pls_population import PopulationRegression, check_equivalence, population_pls

__version__ = "0.1.0"

__all__ = [
    "Dataset", "Moments", "center", "load_csv", "ols_fit", "sample_moments",
    "PlsFit", "cross_validate", "pls_fit", "predict",
    "PopulationRegression", "check_equivalence", "population_pls",
]

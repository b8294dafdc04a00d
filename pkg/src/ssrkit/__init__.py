"""Bohm-Bell jump processes, GRW flashes and numerical superselection checks."""
from .hilbert import HBAR, DomainError, PVM, ConfigurationSpace
from .models import Model, build_model, load_model_from_config

__version__ = "0.1.0"

__all__ = ["HBAR", "DomainError", "PVM", "ConfigurationSpace", "Model", "build_model",
           "load_model_from_config", "__version__"]

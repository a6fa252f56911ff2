"""Similarity condition embedding networks."""

from ._sce import (
    DimensionError,
    InputError,
    IoError,
    Model,
    NumericError,
    check_gradients,
    roc_auc,
    run,
)

__all__ = ["DimensionError", "InputError", "IoError", "Model", "NumericError", "check_gradients", "roc_auc", "run"]

"""Patch-based dictionary learning for head CT tissue segmentation."""

from ._core import (
    DegenerateClassError,
    FormatError,
    InputError,
    Model,
    dice,
    estimate,
    nonneg_lasso,
    omp,
    phantom,
    segment,
    train,
)

__all__ = [
    "DegenerateClassError",
    "FormatError",
    "InputError",
    "Model",
    "dice",
    "estimate",
    "nonneg_lasso",
    "omp",
    "phantom",
    "segment",
    "train",
]

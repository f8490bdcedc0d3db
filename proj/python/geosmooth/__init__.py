"""Certified robustness of image classifiers to rotations and translations."""
import json as _json

from ._core import (
    BackendError,
    Classifier,
    DomainError,
    FormatError,
    InfeasibleInput,
    apply_transform,
    apply_transform_interval,
    clopper_pearson_lower,
    clopper_pearson_upper,
    epsilon_concrete,
    invert,
    load_classifier,
    load_mnist,
    normal_quantile,
    radius_l2,
    radius_param,
    worst_of_k,
)
from . import _core


def certify(image, classifier, method="basespt", kind="rotation", gamma_pm=None, gamma_range=None, seed=0,
            **options):
    """Certificate for one image as a dict. Extra keyword arguments set smoothing and error-bound options."""
    return _json.loads(_core.certify(image, classifier, method, kind, gamma_pm, gamma_range, seed, options))


def estimate_error(images, labels, E, kind="rotation", gamma_pm=30.0, sigma_gamma=30.0, **options):
    """Distributional check of the error bound E over a dataset."""
    return _json.loads(_core.estimate_error(list(images), list(labels), E, kind, gamma_pm, sigma_gamma, options))


__all__ = [
    "BackendError", "Classifier", "DomainError", "FormatError", "InfeasibleInput", "apply_transform",
    "apply_transform_interval", "certify", "clopper_pearson_lower", "clopper_pearson_upper", "epsilon_concrete",
    "estimate_error", "invert", "load_classifier", "load_mnist", "normal_quantile", "radius_l2", "radius_param",
    "worst_of_k",
]

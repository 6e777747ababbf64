"""Subpixel localization: templates, accelerated NCC, quadratic peak fit."""

from .blur import BlurEstimate, estimate_blur
from .fit import FitRejected, QuadCoeffs, fit_quadratic, quadratic_subpixel, stationary_offset
from .locate import LocateRejected, SubpixelDetection, SubpixelParams, locate
from .ncc import CorrelationSurface, ExpandedFeatures, NCCError, expand_features, fast_ncc, naive_ncc
from .templates import Template, TemplateError, disambiguate, generate_templates, sample_vector

__all__ = [
    "BlurEstimate", "estimate_blur", "FitRejected", "QuadCoeffs", "fit_quadratic",
    "quadratic_subpixel", "stationary_offset", "LocateRejected", "SubpixelDetection",
    "SubpixelParams", "locate", "CorrelationSurface", "ExpandedFeatures", "NCCError",
    "expand_features", "fast_ncc", "naive_ncc", "Template", "TemplateError",
    "disambiguate", "generate_templates", "sample_vector",
]

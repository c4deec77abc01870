"""Negatively pinched holomorphic bisectional curvature on bounded domains.

Domains and sampling (:mod:`.domains`), metric jets (:mod:`.jets`), a zoo of
Kähler metrics (:mod:`.zoo`), curvature (:mod:`.curvature`), metric
combination and certificates (:mod:`.combiner`) and a CLI (:mod:`.cli`).
"""
from .combiner import (PinchCertificate, PinchConfig, pinch_combine, spherical_comparison,
                       spherical_comparison_at, wu_hbc_bound, wu_hsc_bound)
from .curvature import CURVATURE_SCALE, curvature_tensor, hbc, hbc_extrema, hsc, hsc_extrema, ricci
from .domains import Ball, Polydisc, lp_reinhardt, sample_collar, sample_compact, sample_global
from .jets import MetricField, MetricJet, jet_from_potential
from .zoo import ball_bergman, bump_perturbation, euclidean, metric_sum, polydisc_bergman, scale

__version__ = "0.1.0"

__all__ = [
    "Ball", "CURVATURE_SCALE", "MetricField", "MetricJet", "PinchCertificate", "PinchConfig", "Polydisc",
    "ball_bergman", "bump_perturbation", "curvature_tensor", "euclidean", "hbc", "hbc_extrema", "hsc",
    "hsc_extrema", "jet_from_potential", "lp_reinhardt", "metric_sum", "pinch_combine", "polydisc_bergman",
    "ricci", "sample_collar", "sample_compact", "sample_global", "scale", "spherical_comparison",
    "spherical_comparison_at", "wu_hbc_bound", "wu_hsc_bound",
]

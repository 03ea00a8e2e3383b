"""Quantitative comparison of homodyne and heterodyne Gaussian-state tomography.

The toolkit covers the full desk-scale loop: state and covariance types,
closed-form and numerical Fisher information with the matching Cramer-Rao
bounds, directional uncertainty regions, seeded synthetic sampling,
maximum-likelihood and moment estimators, and a CLI harness that writes
reproducible CSV/JSON tables.
"""

from ._version import __version__
from .core import (Covariance2, DomainError, GaussianStateSpec, SchemeKind,
                   delta_offset, effective_covariance, q_covariance,
                   rotate_covariance, squeezing_db, wigner_covariance)
from .estimation import (EstimationResult, MlOptions, UncertaintyEllipse,
                         estimate_heterodyne, estimate_homodyne_ml,
                         hs_distance_sq, project_physical,
                         single_angle_second_moment, to_ellipse)
from .fisher import (CrbReport, Fisher3, NumericalError, crb_het, crb_hom,
                     crb_hypothetical, crb_report, critical_lambda_for_gamma,
                     fisher_het, fisher_hom_closed, fisher_hom_quadrature,
                     gamma_surface, gamma_table_csv, small_eta_asymptote)
from .regions import (DirectionVariancePair, NumericalBracketError, RegionAreas,
                      conditional_std, critical_lambda_equal_areas,
                      marginal_std, region_area_scan_csv, region_areas,
                      region_boundaries)
from .sampling import (AnglePolicy, ContinuousSweep, PhaseSpaceSample,
                       QuadratureSample, SeedSpec, UniformGrid,
                       heterodyne_arrays, homodyne_arrays, raw_words,
                       sample_heterodyne, sample_homodyne)

__all__ = [
    "__version__",
    "Covariance2", "DomainError", "GaussianStateSpec", "SchemeKind",
    "delta_offset", "effective_covariance", "q_covariance",
    "rotate_covariance", "squeezing_db", "wigner_covariance",
    "CrbReport", "Fisher3", "NumericalError", "crb_het", "crb_hom",
    "crb_hypothetical", "crb_report", "critical_lambda_for_gamma",
    "fisher_het", "fisher_hom_closed", "fisher_hom_quadrature",
    "gamma_surface", "gamma_table_csv", "small_eta_asymptote",
    "DirectionVariancePair", "NumericalBracketError", "RegionAreas",
    "conditional_std", "critical_lambda_equal_areas", "marginal_std",
    "region_area_scan_csv", "region_areas", "region_boundaries",
    "AnglePolicy", "ContinuousSweep", "PhaseSpaceSample", "QuadratureSample",
    "SeedSpec", "UniformGrid", "heterodyne_arrays", "homodyne_arrays",
    "raw_words", "sample_heterodyne", "sample_homodyne",
    "EstimationResult", "MlOptions", "UncertaintyEllipse",
    "estimate_heterodyne", "estimate_homodyne_ml", "hs_distance_sq",
    "project_physical", "single_angle_second_moment", "to_ellipse",
]

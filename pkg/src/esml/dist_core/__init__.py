"""Marginals, copulas and movement distributions."""

from .copulas import (
    ArchimedeanCopula,
    GaussianCopula,
    GumbelGenerator,
    MonotoneReport,
    ProductCopula,
    bivariate_normal_cdf,
    copula_cdf,
    copula_density,
    copula_from_dict,
    copula_sample,
    generator_eval,
    generator_inverse,
    gumbel_copula,
    m_monotone_check,
)
from .marginals import STANDARD_NORMAL, GaussianMarginal, StudentTMarginal, marginal_from_dict
from .movement import (
    BivariateGaussian,
    ComposedMovement,
    halfspace_mass,
    movement_cdf,
    movement_density,
    movement_from_dict,
    movement_sample,
    plane_normal,
)

__all__ = [
    "ArchimedeanCopula", "BivariateGaussian", "ComposedMovement", "GaussianCopula",
    "GaussianMarginal", "GumbelGenerator", "MonotoneReport", "ProductCopula",
    "STANDARD_NORMAL", "StudentTMarginal", "bivariate_normal_cdf", "copula_cdf",
    "copula_density", "copula_from_dict", "copula_sample", "generator_eval",
    "generator_inverse", "gumbel_copula", "halfspace_mass", "m_monotone_check",
    "marginal_from_dict", "movement_cdf", "movement_density", "movement_from_dict",
    "movement_sample", "plane_normal",
]

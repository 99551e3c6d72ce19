"""Kronecker product structure test for moment covariance matrices."""

from ._core import (
    KpsError,
    KpsResult,
    NkpFit,
    __version__,
    chi2_cdf,
    chi2_quantile,
    chi2_sf,
    degrees_of_freedom,
    duplication_matrix,
    kpst,
    kpst_star,
    nearest_kps,
    noncentral_chi2_cdf,
    rearrange,
    simulate_local,
    simulate_null,
)

__all__ = [
    "KpsError",
    "KpsResult",
    "NkpFit",
    "__version__",
    "chi2_cdf",
    "chi2_quantile",
    "chi2_sf",
    "degrees_of_freedom",
    "duplication_matrix",
    "kpst",
    "kpst_star",
    "nearest_kps",
    "noncentral_chi2_cdf",
    "rearrange",
    "simulate_local",
    "simulate_null",
]

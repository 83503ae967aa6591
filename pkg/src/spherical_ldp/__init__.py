"""Spherical integrals, tilted Haar measures and the large deviations of spectral projections."""

__version__ = "0.1.0"

from .hciz import finite_rate, hciz_exact, hciz_mc, hciz_perm_sum, limit_I_estimate
from .measures import QuantileMeasure

__all__ = ["QuantileMeasure", "finite_rate", "hciz_exact", "hciz_mc", "hciz_perm_sum",
           "limit_I_estimate", "__version__"]

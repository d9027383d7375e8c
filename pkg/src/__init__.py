"""
Empirical likelihood estimation for longitudinal linear regression
with replicate, heterogeneously distributed covariate measurement errors
"""

__version__ = "1.0.0"

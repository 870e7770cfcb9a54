"""Conditional sharp large deviations and thinned-energy statistics for the
random field spin model ``H_n = sum_i h_i (sigma_i - m)``."""
__version__ = "0.1.0"

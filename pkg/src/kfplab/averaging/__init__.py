"""Velocity averaging: exponents, Fourier norms, microlocal split and the gain experiment."""
from .experiment import GainTable, averaging_gain_experiment, band_limited_noise, free_transport_average
from .exponents import ExponentTable, exponent_table, kappa_of
from .fourier import (SmoothBump, TXField, fractional_sobolev_norm, l2_norm, mollifier,
                      mollifier_scale, raised_cosine, velocity_average)
from .microlocal import MicrolocalSplit, m_schedule, microlocal_split, zeta

__all__ = [
    "ExponentTable", "exponent_table", "kappa_of",
    "TXField", "SmoothBump", "velocity_average", "fractional_sobolev_norm", "l2_norm",
    "raised_cosine", "mollifier", "mollifier_scale",
    "MicrolocalSplit", "microlocal_split", "zeta", "m_schedule",
    "GainTable", "averaging_gain_experiment", "band_limited_noise", "free_transport_average",
]

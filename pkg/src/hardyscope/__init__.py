"""Spectral calculus, Calderon reproducing formulas, tent spaces and Hardy atoms
for self-adjoint operators on finite metric measure spaces."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .mspace import Ball, MetricMeasureSpace, SetPair, build_circle, build_graph, set_pair
from .specop import (SelfAdjointOperator, circle_derivative, divergence_form_1d, hodge_dirac_graph,
                     spectral_apply)
from .profiles import BandlimitedProfile, HoloProfile, bump_deriv_profile, divide_power, multiply_power
from .calderon import LogGrid, build_partner, reproduce
from .tent import TentAtom, TentField, atomic_decompose, tent_norm
from .hardy import QSConfig, build_hardy_atom, q_apply, s_apply, verify_molecule

__all__ = [
    "Ball", "MetricMeasureSpace", "SetPair", "build_circle", "build_graph", "set_pair",
    "SelfAdjointOperator", "circle_derivative", "divergence_form_1d", "hodge_dirac_graph", "spectral_apply",
    "BandlimitedProfile", "HoloProfile", "bump_deriv_profile", "divide_power", "multiply_power",
    "LogGrid", "build_partner", "reproduce",
    "TentAtom", "TentField", "atomic_decompose", "tent_norm",
    "QSConfig", "build_hardy_atom", "q_apply", "s_apply", "verify_molecule",
]

"""Boltzmann weights, quadrature engine and identity checkers for a
basic-hypergeometric lattice spin model."""
from .qkernel import QContext, chiral_ratio, gamma_fn, k_alpha, k_crossing, qpoch_inf, qpoch_ratio
from .engine import FlavorParam, ParameterSet, ResidualReport, gen_balanced_params
from .weights import (PRINTED, SYMMETRIC, Convention, MultiSpin, SpectralPair, Spin,
                      boltzmann_w, face_weight_r, s_multi, self_weight_s)

__version__ = "0.1.0"

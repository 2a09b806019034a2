"""Exact corruption identification for semirandom planted XOR and CSP instances."""

from .config import RunConfig
from .csp_solver import fourier_coefficients, solve_semirandom_csp
from .gf2 import ParitySystem, solve_parity
from .instances import CspInstance, PlantingDistribution, Predicate, XorInstance
from .sdp import extract_rank1, solve_basic_sdp
from .xor_recovery import recover_assignment, run_kxor_recovery, solve_1xor

__version__ = "0.1.0"

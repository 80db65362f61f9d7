"""Total-variation blurring and deblurring of one-dimensional bar codes."""

__version__ = "0.1.0"

from .barcode import BarCode, GeneratorConfig, generate, membership, total_variation, x_dimension
from .certify import Certificate, certify_F1, certify_F2, certify_F3, unified_condition
from .convolve import (
    GridSignal,
    GridSpec,
    I_minus,
    I_plus,
    appendix_A_closed_forms,
    double_convolve,
    grid_convolve,
    hat_convolve,
    quadrature_oracle,
)
from .energy import EnergyParams, EnergyReport, dual_norm, evaluate, observation, trivial_thresholds
from .exceptions import TVBarError
from .kernel import Kernel, KernelAdmissibility, check_class_K, check_condition_J
from .oracle import OracleResult, SearchSpace, minimize, sweep_lambda
from .piecewise import PiecewisePoly
from .solver import NoiseConfig, SolverConfig, SolverResult, add_noise, deblur

__all__ = [
    "BarCode", "GeneratorConfig", "generate", "membership", "total_variation", "x_dimension",
    "Certificate", "certify_F1", "certify_F2", "certify_F3", "unified_condition",
    "GridSignal", "GridSpec", "I_minus", "I_plus", "appendix_A_closed_forms", "double_convolve",
    "grid_convolve", "hat_convolve", "quadrature_oracle",
    "EnergyParams", "EnergyReport", "dual_norm", "evaluate", "observation", "trivial_thresholds",
    "TVBarError", "Kernel", "KernelAdmissibility", "check_class_K", "check_condition_J",
    "OracleResult", "SearchSpace", "minimize", "sweep_lambda", "PiecewisePoly",
    "NoiseConfig", "SolverConfig", "SolverResult", "add_noise", "deblur",
]

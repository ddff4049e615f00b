"""Numerical checks of a sufficient condition for the local limit theorem."""

from .conditions import (
    ConditionReport,
    DominatorM,
    SlackParams,
    build_dominator,
    check_condition,
    check_tail,
    find_T,
    find_y0,
    pinned_C,
    verify_domination,
    zeta,
)
from .convolution import (
    ConvolutionResult,
    convolve_direct,
    monte_carlo_density,
    phi_n_direct,
    phi_n_spatial,
    phi_n_spectral,
)
from .density import (
    Density,
    GridFunction,
    MomentReport,
    make_density,
    moments,
    sample,
    scale_density,
    to_grid,
)
from .metrics import (
    ConvergenceReport,
    convergence_study,
    emit_report,
    gaussian_target,
    l1_spatial_distance,
    l1_spectral_distance,
    sup_distance,
)
from .spectrum import SpectralTable, chf_eval, chf_table, normalized_log_modulus, zero_limit

__version__ = "0.1.0"

"""Chebyshev-accelerated distributed average consensus."""

from .cheby_core import (
    ChebyParams,
    Succession,
    cheby_T,
    cheby_T_direct,
    conv_factor_nu,
    eval_T_on_succession,
    kappa1,
    p_poly,
    tau_complex,
    tau_real,
    worst_succession,
)
from .engine import (
    ConsensusRun,
    ConsensusTrace,
    Method,
    MethodSpec,
    SwitchingMatrices,
    cheby_run,
    consensus_value,
    fixed_gain_run,
    newton2_run,
    power_run,
)
from .graphs import Graph, Scenario, ScenarioConfig, evolve, is_connected, random_geometric
from .spectral import (
    Spectrum,
    SwitchingEnvelope,
    check_fixed_convergence,
    check_switching_convergence,
    corollary_asymmetric_params,
    corollary_symmetric_param,
    ellipse_contains,
    general_eigenvalues,
    optimal_params,
    safe_symmetric_bound,
    sym_eigenvalues,
)
from .weights import (
    WeightKind,
    WeightMatrix,
    best_constant_weights,
    local_degree_weights,
    nonsymmetric_weights,
    validate_assumption1,
    validate_assumption2,
)

__version__ = "0.1.0"

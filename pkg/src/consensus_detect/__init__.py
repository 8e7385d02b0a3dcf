"""Error exponents and Monte Carlo simulation of distributed detection over
randomly failing sensor networks."""

__version__ = "0.1.0"

from .models import (
    ChernoffResult, ConjugateResult, DiscreteModel, DistinguishabilityError,
    GaussianModel, Hypothesis, InvalidModelError, LaplaceModel, LlrMoments,
    SensorModel, chernoff, conjugate, llr_moments, lmgf, lmgf_derivatives,
    binary_model, model_from_dict, rate_function, sample_llr,
)
from .exponents import (
    Breakpoints, ConnectivityRate, DomainError, Ensemble, ExponentReport, analyze,
    binary_simplified_threshold, bound_curve, breakpoints, delta, exponent_bounds,
    exponent_bounds_piecewise, gamma_grid, hetero_bounds, hetero_optimal_threshold,
    hetero_threshold, optimal_threshold, optimality_threshold,
)
from .network import (
    AveragingMatrix, ConnectivityEstimate, EstimationError, LinkFailureModel, Topology,
    TopologyError, build_geometric_graph, build_regular_graph, estimate_r_empirical,
    estimate_r_spectral, explicit_topology, metropolis_matrices, regular_network_r,
    sample_weight_matrix,
)
from .detector import (
    Comparison, ConfigError, DetectorState, ExponentEstimate, InsufficientTrialsError,
    PairingError, SimConfig, TrialBatchResult, compare_theory, estimate_exponent,
    monte_carlo_error, run_trial,
)
from .config import ExperimentConfig, RunManifest, load_config, parse_config

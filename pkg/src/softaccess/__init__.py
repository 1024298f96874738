"""Soft-sensing overlay access toolkit.

Analytic rate/delay formulas, the primary-queue Markov chain, access
probability optimization, a slot-level Monte Carlo simulator, and a
sweep CLI for a network of TDMA primaries sharing a channel with
ALOHA secondaries that exploit soft energy sensing and, optionally,
the primaries' ARQ feedback.
"""
from .chain import (
    ChainDistribution,
    closed_form_distribution,
    default_truncation,
    delay_fb,
    delay_nofb,
    littles_law_delay,
    numeric_distribution,
    transition_matrix,
)
from .cli import Experiment, main, run_sweep, sweep_rows, validate_config
from .model import (
    AccessPolicy,
    NetworkConfig,
    Scheme,
    SensingConfig,
    bin_probabilities,
    clamp_probability,
    default_sensing,
    joint_access_probability,
    log_complement_outage,
    outage_probability,
)
from .optimize import (
    InnerMethod,
    OptimizerConfig,
    OptResult,
    baseline_genie,
    baseline_hard_decision,
    grid_search,
    hard_decision_sensing,
    inner_solve,
    kkt_residual_nofb,
    solve_feedback,
    solve_nofb,
)
from .rates import (
    ChainParams,
    StabilityReport,
    Unstable,
    chain_params,
    chain_params_from_rates,
    delta_pi0,
    log_secondary_throughput_fb,
    log_secondary_throughput_nofb,
    pi0_feedback,
    pi0_nofb,
    primary_outage,
    primary_service_rate_nofb,
    secondary_outage,
    secondary_throughput_fb,
    secondary_throughput_nofb,
    stability,
)
from .simulate import SimConfig, SimReport, estimate_pi0, run, run_traced

__version__ = "0.1.0"

__all__ = [
    "AccessPolicy",
    "ChainDistribution",
    "ChainParams",
    "Experiment",
    "InnerMethod",
    "NetworkConfig",
    "OptResult",
    "OptimizerConfig",
    "Scheme",
    "SensingConfig",
    "SimConfig",
    "SimReport",
    "StabilityReport",
    "Unstable",
    "baseline_genie",
    "baseline_hard_decision",
    "bin_probabilities",
    "chain_params",
    "chain_params_from_rates",
    "clamp_probability",
    "closed_form_distribution",
    "default_sensing",
    "default_truncation",
    "delay_fb",
    "delay_nofb",
    "delta_pi0",
    "estimate_pi0",
    "grid_search",
    "hard_decision_sensing",
    "inner_solve",
    "joint_access_probability",
    "kkt_residual_nofb",
    "littles_law_delay",
    "log_complement_outage",
    "log_secondary_throughput_fb",
    "log_secondary_throughput_nofb",
    "main",
    "numeric_distribution",
    "outage_probability",
    "pi0_feedback",
    "pi0_nofb",
    "primary_outage",
    "primary_service_rate_nofb",
    "run",
    "run_sweep",
    "run_traced",
    "secondary_outage",
    "secondary_throughput_fb",
    "secondary_throughput_nofb",
    "solve_feedback",
    "solve_nofb",
    "stability",
    "sweep_rows",
    "transition_matrix",
    "validate_config",
]

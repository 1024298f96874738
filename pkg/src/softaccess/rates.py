"""Closed-form throughput and occupancy expressions for both access schemes.

Notation used throughout: s0 and s1 are the probabilities that one
secondary user senses-and-accesses while the channel is idle or busy,
delta_bar = (1-P_pd)/M_p is the per-slot service probability of a primary
retransmission (own the slot, clear link), and gamma_p is the per-slot
first-transmission service probability, which also multiplies in the
chance that no secondary interferes.

The secondary-link complement (1 - P_sd) uses the same outage law as the
primary link; a superscript-zero variant of that symbol that appears in
one formula source is read as the same quantity (apparent typo).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

from .model import (
    AccessPolicy,
    NetworkConfig,
    Scheme,
    SensingConfig,
    clamp_probability,
    joint_access_probability,
    log_complement_outage,
    outage_probability,
)

__all__ = [
    "Unstable",
    "RateValue",
    "ChainParams",
    "StabilityReport",
    "primary_outage",
    "secondary_outage",
    "chain_params",
    "chain_params_from_rates",
    "primary_service_rate_nofb",
    "pi0_nofb",
    "pi0_feedback",
    "delta_pi0",
    "secondary_throughput_nofb",
    "secondary_throughput_fb",
    "log_secondary_throughput_nofb",
    "log_secondary_throughput_fb",
    "stability",
]


@dataclass(frozen=True)
class Unstable:
    """Marker result for queries outside the stability region.

    Sweeps record these as infeasible points instead of crashing. margin
    is the service headroom (service measure minus arrival rate), which
    is nonpositive whenever this marker is produced.
    """

    margin: float

    def __bool__(self) -> bool:
        return False


RateValue = Union[float, Unstable]


class StabilityReport(NamedTuple):
    stable: bool
    margin: float


@dataclass(frozen=True)
class ChainParams:
    """Per-slot transition probabilities of the primary-queue chain.

    gamma_p : success probability of a first transmission in a slot
    delta   : failure probability of a retransmission in a slot
    chi     : composite drift lambda_p*gamma_p + (1-lambda_p)*(1-delta)
    psi     : geometric load ratio lambda_p*(1-chi) / ((1-lambda_p)*chi)
    """

    gamma_p: float
    delta: float
    chi: float
    psi: float


def primary_outage(cfg: NetworkConfig) -> float:
    """Outage probability of the primary data link."""
    return outage_probability(cfg.G_p, cfg.r_pd, cfg.gamma, cfg.zeta, cfg.N_0)


def secondary_outage(cfg: NetworkConfig) -> float:
    """Outage probability of the secondary data link."""
    return outage_probability(cfg.G_s, cfg.r_sd, cfg.gamma, cfg.zeta, cfg.N_0)


def chain_params_from_rates(gamma_p: float, delta: float, lambda_p: float) -> ChainParams:
    """Assemble ChainParams from raw per-slot probabilities."""
    if not 0.0 <= gamma_p <= 1.0 or not 0.0 <= delta <= 1.0:
        raise ValueError("gamma_p and delta must lie in [0, 1]")
    if not 0.0 <= lambda_p <= 1.0:
        raise ValueError("lambda_p must lie in [0, 1]")
    lam_bar = 1.0 - lambda_p
    chi = clamp_probability(lambda_p * gamma_p + lam_bar * (1.0 - delta))
    if lambda_p == 0.0:
        psi = 0.0
    elif lam_bar * chi == 0.0:
        psi = math.inf
    else:
        psi = lambda_p * (1.0 - chi) / (lam_bar * chi)
    return ChainParams(gamma_p=gamma_p, delta=delta, chi=chi, psi=psi)


def chain_params(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy) -> ChainParams:
    """ChainParams for a concrete network, detector and access policy."""
    p_pd = primary_outage(cfg)
    s1 = joint_access_probability(policy, sensing.p1())
    base = (1.0 - p_pd) / cfg.M_p
    gamma_p = base * (1.0 - s1) ** cfg.M_s
    return chain_params_from_rates(gamma_p, 1.0 - base, cfg.lambda_p)


def primary_service_rate_nofb(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy) -> float:
    """Per-slot primary service rate mu_p = (1-P_pd)/M_p * (1-s1)^M_s.

    Identical to gamma_p of the chain (same code path, bit for bit).
    """
    return chain_params(cfg, sensing, policy).gamma_p


def pi0_nofb(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy) -> RateValue:
    """Empty-queue probability without feedback, 1 - lambda_p/mu_p by Little's law."""
    mu_p = primary_service_rate_nofb(cfg, sensing, policy)
    if cfg.lambda_p >= mu_p:
        return Unstable(mu_p - cfg.lambda_p)
    return 1.0 - cfg.lambda_p / mu_p


def pi0_feedback(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy) -> RateValue:
    """Empty-queue probability under the feedback scheme, (chi - lambda_p)/(1 - delta).

    The expanded equivalent 1 - lambda_p*(1 + M_p/(1-P_pd) - (1-s1)^M_s)
    is kept as a private twin; a standing test pins their agreement.
    """
    params = chain_params(cfg, sensing, policy)
    if cfg.lambda_p >= params.chi:
        return Unstable(params.chi - cfg.lambda_p)
    return (params.chi - cfg.lambda_p) / (1.0 - params.delta)


def _pi0_feedback_expanded(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy) -> float:
    # expanded form: 1 - lambda*(1 + M_p/(1-P_pd) - (1-s1)^M_s)
    p_pd = primary_outage(cfg)
    s1 = joint_access_probability(policy, sensing.p1())
    bracket = 1.0 + cfg.M_p / (1.0 - p_pd) - (1.0 - s1) ** cfg.M_s
    return 1.0 - cfg.lambda_p * bracket


def delta_pi0(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy) -> RateValue:
    """Gain in empty-queue probability from exploiting feedback.

    lambda_p*(1-gamma_p)/gamma_p * (1 - (1-s1)^M_s), nonnegative for any
    policy, zero exactly at a = 0 or lambda_p = 0.
    """
    if cfg.lambda_p == 0.0:
        return 0.0
    params = chain_params(cfg, sensing, policy)
    if cfg.lambda_p >= params.gamma_p:
        # no-feedback side unstable, difference undefined
        return Unstable(params.gamma_p - cfg.lambda_p)
    s1 = joint_access_probability(policy, sensing.p1())
    bracket = 1.0 - (1.0 - s1) ** cfg.M_s
    return cfg.lambda_p * (1.0 - params.gamma_p) / params.gamma_p * bracket


def _aloha_factor(s0: float, M_s: int) -> float:
    # one tagged secondary transmits, the other M_s-1 stay silent
    return s0 * (1.0 - s0) ** (M_s - 1)


def secondary_throughput_nofb(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy) -> RateValue:
    """Per-secondary throughput without feedback.

    pi0_nofb * (1-P_sd) * s0 * (1-s0)^(M_s-1), where s0 = sum_i p_i^0 a_i.
    Returns Unstable when lambda_p >= mu_p, since the Little's-law pi_0 is
    meaningless there.
    """
    pi0 = pi0_nofb(cfg, sensing, policy)
    if isinstance(pi0, Unstable):
        return pi0
    s0 = joint_access_probability(policy, sensing.p0())
    return pi0 * (1.0 - secondary_outage(cfg)) * _aloha_factor(s0, cfg.M_s)


def secondary_throughput_fb(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy) -> RateValue:
    """Per-secondary throughput with feedback exploitation.

    Same product as the no-feedback formula with the feedback pi_0.
    """
    pi0 = pi0_feedback(cfg, sensing, policy)
    if isinstance(pi0, Unstable):
        return pi0
    s0 = joint_access_probability(policy, sensing.p0())
    return pi0 * (1.0 - secondary_outage(cfg)) * _aloha_factor(s0, cfg.M_s)


def _log_aloha_factor(s0: float, M_s: int) -> float:
    if s0 <= 0.0:
        return -math.inf
    if s0 >= 1.0:
        return -math.inf if M_s > 1 else 0.0
    return math.log(s0) + (M_s - 1) * math.log1p(-s0)


def log_secondary_throughput_nofb(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy) -> RateValue:
    """log of secondary_throughput_nofb; -inf at zero throughput.

    Backs the optimizer; the direct formula is the public contract and a
    standing test pins exp(log form) to it.
    """
    mu_p = primary_service_rate_nofb(cfg, sensing, policy)
    if cfg.lambda_p >= mu_p:
        return Unstable(mu_p - cfg.lambda_p)
    s0 = joint_access_probability(policy, sensing.p0())
    log_pi0 = math.log1p(-cfg.lambda_p / mu_p) if cfg.lambda_p > 0.0 else 0.0
    log_clear = log_complement_outage(cfg.G_s, cfg.r_sd, cfg.gamma, cfg.zeta, cfg.N_0)
    return log_pi0 + log_clear + _log_aloha_factor(s0, cfg.M_s)


def log_secondary_throughput_fb(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy) -> RateValue:
    """log of secondary_throughput_fb; -inf at zero throughput."""
    params = chain_params(cfg, sensing, policy)
    if cfg.lambda_p >= params.chi:
        return Unstable(params.chi - cfg.lambda_p)
    s0 = joint_access_probability(policy, sensing.p0())
    log_pi0 = math.log(params.chi - cfg.lambda_p) - math.log1p(-params.delta)
    log_clear = log_complement_outage(cfg.G_s, cfg.r_sd, cfg.gamma, cfg.zeta, cfg.N_0)
    return log_pi0 + log_clear + _log_aloha_factor(s0, cfg.M_s)


def stability(cfg: NetworkConfig, sensing: SensingConfig, policy: AccessPolicy, scheme: Scheme) -> StabilityReport:
    """Stability predicate with its signed service margin.

    No-feedback and hard-decision queues need lambda_p < mu_p; the
    feedback queue needs lambda_p < chi; the genie queue sees no secondary
    interference at all, so its margin is (1-P_pd)/M_p - lambda_p.
    """
    params = chain_params(cfg, sensing, policy)
    if scheme is Scheme.FEEDBACK:
        margin = params.chi - cfg.lambda_p
    elif scheme is Scheme.GENIE:
        margin = (1.0 - params.delta) - cfg.lambda_p
    else:
        margin = params.gamma_p - cfg.lambda_p
    return StabilityReport(stable=margin > 0.0, margin=margin)

"""Slot-level Monte Carlo oracle for the whole system.

The simulator realizes the joint dynamics the analytic formulas describe:
TDMA-scheduled primaries with Bernoulli arrivals, backlogged secondaries
doing soft energy-based access, Rayleigh outages, and the retransmission
feedback loop. One kernel serves every scheme; it is compiled with numba
when available and falls back to the identical pure-Python body on the
same pre-drawn random streams, so both paths produce identical output.

Feedback semantics: a primary that fails (channel outage, secondary
interference, or simply not owning the slot while backlogged) sits in the
retransmission phase, and secondaries stay silent in a slot whose owner
is in that phase with a nonempty queue. A success or an emptied queue
returns the primary to the first-transmission phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import AccessPolicy, NetworkConfig, Scheme
from .rates import primary_outage, secondary_outage

__all__ = ["SimConfig", "SimReport", "run", "run_traced", "estimate_pi0"]

CAP = 1 << 16  # ring buffer slots per primary queue
CHUNK = 1 << 17

_SCHEME_ID = {
    Scheme.NO_FEEDBACK: 0,
    Scheme.HARD_DECISION: 0,
    Scheme.FEEDBACK: 1,
    Scheme.GENIE: 2,
}


@dataclass(frozen=True)
class SimConfig:
    slots: int = 1_000_000
    warmup: int = 10_000
    seed: int = 0
    replications: int = 10
    scheme: Optional[Scheme] = None
    # sensitivity mode: deterministic slot ownership instead of i.i.d. draws
    round_robin: bool = False

    def __post_init__(self):
        if self.slots <= 0:
            raise ValueError("slots must be positive")
        if not 0 <= self.warmup < self.slots:
            raise ValueError("warmup must lie in [0, slots)")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class SimReport:
    mu_s_hat: float
    se_mu_s: float
    mu_p_hat: float
    se_mu_p: float
    delay_hat: float
    se_delay: float
    pi0_hat: float
    se_pi0: float
    collisions: int
    arrivals: tuple
    departures: tuple
    final_backlog: tuple
    seed_used: int
    replications: int
    slots: int


# stats slots: 0 su_success, 1 mu_p_den, 2 mu_p_num, 3 pi0_cnt,
# 4 collisions, 5 delay_cnt, 6 delay_sum, 7 overflow flag
def _sim_chunk(t0, L, owner, arr_u, e_draws, acc_u, pu_u, su_u,
               queue, phase, buf, head,
               a_vec, n_bins, scheme, lam, clear_pd, clear_sd,
               scale_idle, scale_busy, a_genie, M_p, M_s, warmup,
               stats, arr_cnt, dep_cnt,
               trace_on, tr_owner, tr_q, tr_rmask, tr_sumask, tr_outcome, tr_fb):
    for i in range(L):
        t = t0 + i
        post = t >= warmup
        own = owner[i]
        owner_busy = own < M_p and queue[own] > 0

        if trace_on:
            tr_owner[i] = own
            rmask = 0
            for q in range(M_p):
                tr_q[i, q] = queue[q]
                if phase[q] == 1:
                    rmask |= 1 << q
            tr_rmask[i] = rmask

        if post:
            if not owner_busy:
                stats[3] += 1
            for q in range(M_p):
                if queue[q] > 0 and phase[q] == 0:
                    stats[1] += 1

        silent = scheme == 1 and owner_busy and phase[own] == 1
        su_mask = 0
        su_n = 0
        lone = -1
        if not silent:
            for k in range(M_s):
                if scheme == 2:
                    pa = 0.0 if owner_busy else a_genie
                else:
                    scale = scale_busy if owner_busy else scale_idle
                    idx = int(e_draws[i, k] * scale)
                    pa = a_vec[idx] if idx < n_bins else 0.0
                if pa > 0.0 and acc_u[i, k] < pa:
                    su_mask |= 1 << k
                    su_n += 1
                    lone = k

        outcome = 0
        fb = 0
        if owner_busy:
            was_first = phase[own] == 0
            if su_n == 0 and pu_u[i] < clear_pd:
                pos = head[own] % CAP
                at = buf[own, pos]
                head[own] += 1
                queue[own] -= 1
                dep_cnt[own] += 1
                phase[own] = 0
                outcome = 1
                fb = 1
                if post:
                    stats[5] += 1
                    stats[6] += t - at
                    if was_first:
                        stats[2] += 1
            else:
                if scheme == 1:
                    phase[own] = 1
                outcome = 2
                fb = 2
            if post and su_n >= 1:
                stats[4] += 1
        else:
            if su_n == 1:
                if su_u[i, lone] < clear_sd:
                    outcome = 3
                    if post:
                        stats[0] += 1
                else:
                    outcome = 5
            elif su_n >= 2:
                outcome = 4
                if post:
                    stats[4] += 1

        if scheme == 1:
            # backlogged non-owners heard no grant: they enter retransmission
            for q in range(M_p):
                if q != own and queue[q] > 0:
                    phase[q] = 1

        for q in range(M_p):
            if arr_u[i, q] < lam:
                pos = (head[q] + queue[q]) % CAP
                buf[q, pos] = t
                queue[q] += 1
                arr_cnt[q] += 1
                if queue[q] > CAP:
                    stats[7] = 1

        if trace_on:
            tr_sumask[i] = su_mask
            tr_outcome[i] = outcome
            tr_fb[i] = fb


try:
    from numba import njit

    _sim_chunk_jit = njit(cache=False)(_sim_chunk)
except ImportError:  # pragma: no cover
    _sim_chunk_jit = None


def _resolve(cfg: NetworkConfig, sensing, policy: AccessPolicy, sim: SimConfig):
    scheme = sim.scheme or policy.scheme
    scheme_id = _SCHEME_ID[scheme]
    if scheme is Scheme.GENIE:
        if policy.n != 1:
            raise ValueError("genie policy must have a single entry")
        a_vec = np.zeros(1)
        a_genie = float(policy.a[0])
        scale_idle = scale_busy = 1.0
        n_bins = 1
    else:
        if sensing is None:
            raise ValueError("sensing config required for sensing schemes")
        if policy.n != sensing.n:
            raise ValueError("policy length must match the number of bins")
        a_vec = np.asarray(policy.a, dtype=np.float64)
        a_genie = 0.0
        scale_idle = 2.0 * sensing.sigma0_sq * sensing.n / sensing.eta
        scale_busy = 2.0 * sensing.sigma1_sq * sensing.n / sensing.eta
        n_bins = sensing.n
    omega = cfg.omega_p if cfg.omega_p is not None else (1.0 / cfg.M_p,) * cfg.M_p
    cum_omega = np.cumsum(np.asarray(omega, dtype=np.float64))
    return scheme_id, a_vec, a_genie, scale_idle, scale_busy, n_bins, cum_omega


def _run_one(kernel, rng, cfg, sim, scheme_id, a_vec, a_genie,
             scale_idle, scale_busy, n_bins, cum_omega, trace_arrays=None):
    M_p, M_s = cfg.M_p, cfg.M_s
    lam = cfg.lambda_p
    clear_pd = 1.0 - primary_outage(cfg)
    clear_sd = 1.0 - secondary_outage(cfg)
    queue = np.zeros(M_p, dtype=np.int64)
    phase = np.zeros(M_p, dtype=np.int64)
    buf = np.zeros((M_p, CAP), dtype=np.int64)
    head = np.zeros(M_p, dtype=np.int64)
    stats = np.zeros(8, dtype=np.int64)
    arr_cnt = np.zeros(M_p, dtype=np.int64)
    dep_cnt = np.zeros(M_p, dtype=np.int64)
    empty_i = np.zeros(0, dtype=np.int64)
    empty_q = np.zeros((0, M_p), dtype=np.int64)

    t0 = 0
    while t0 < sim.slots:
        L = min(CHUNK, sim.slots - t0)
        if sim.round_robin:
            owner = (t0 + np.arange(L, dtype=np.int64)) % M_p
        else:
            owner = np.searchsorted(cum_omega, rng.random(L), side="right").astype(np.int64)
        arr_u = rng.random((L, M_p))
        e_draws = rng.standard_exponential((L, M_s))
        acc_u = rng.random((L, M_s))
        pu_u = rng.random(L)
        su_u = rng.random((L, M_s))
        if trace_arrays is None:
            kernel(t0, L, owner, arr_u, e_draws, acc_u, pu_u, su_u,
                   queue, phase, buf, head,
                   a_vec, n_bins, scheme_id, lam, clear_pd, clear_sd,
                   scale_idle, scale_busy, a_genie, M_p, M_s, sim.warmup,
                   stats, arr_cnt, dep_cnt,
                   False, empty_i, empty_q, empty_i, empty_i, empty_i, empty_i)
        else:
            tr_owner, tr_q, tr_rmask, tr_sumask, tr_outcome, tr_fb = trace_arrays
            kernel(t0, L, owner, arr_u, e_draws, acc_u, pu_u, su_u,
                   queue, phase, buf, head,
                   a_vec, n_bins, scheme_id, lam, clear_pd, clear_sd,
                   scale_idle, scale_busy, a_genie, M_p, M_s, sim.warmup,
                   stats, arr_cnt, dep_cnt,
                   True, tr_owner[t0:t0 + L], tr_q[t0:t0 + L],
                   tr_rmask[t0:t0 + L], tr_sumask[t0:t0 + L],
                   tr_outcome[t0:t0 + L], tr_fb[t0:t0 + L])
        if stats[7]:
            raise RuntimeError("primary queue exceeded the ring buffer capacity")
        t0 += L
    return stats, arr_cnt, dep_cnt, queue


def _estimates(stats, span: int, M_s: int):
    mu_s = stats[0] / (span * M_s)
    mu_p = stats[2] / stats[1] if stats[1] > 0 else math.nan
    pi0 = stats[3] / span
    delay = stats[6] / stats[5] if stats[5] > 0 else math.nan
    return float(mu_s), float(mu_p), float(pi0), float(delay)


def _mean_se(values):
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, math.nan
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def run(cfg: NetworkConfig, sensing, policy: AccessPolicy,
        sim: SimConfig | None = None, force_python: bool = False) -> SimReport:
    """Simulate and report point estimates with across-replication SEs.

    Replications use independent spawned seed streams, so the report is a
    deterministic function of (inputs, seed). SEs are nan at one
    replication.
    """
    sim = sim or SimConfig()
    parts = _resolve(cfg, sensing, policy, sim)
    kernel = _sim_chunk if (force_python or _sim_chunk_jit is None) else _sim_chunk_jit
    span = sim.slots - sim.warmup
    children = np.random.SeedSequence(sim.seed).spawn(sim.replications)
    per_rep = []
    collisions = 0
    arrivals = np.zeros(cfg.M_p, dtype=np.int64)
    departures = np.zeros(cfg.M_p, dtype=np.int64)
    backlog = np.zeros(cfg.M_p, dtype=np.int64)
    for child in children:
        rng = np.random.default_rng(child)
        stats, arr_cnt, dep_cnt, queue = _run_one(kernel, rng, cfg, sim, *parts)
        per_rep.append(_estimates(stats, span, cfg.M_s))
        collisions += int(stats[4])
        arrivals += arr_cnt
        departures += dep_cnt
        backlog += queue
    mu_s, se_mu_s = _mean_se([r[0] for r in per_rep])
    mu_p, se_mu_p = _mean_se([r[1] for r in per_rep])
    pi0, se_pi0 = _mean_se([r[2] for r in per_rep])
    delay, se_delay = _mean_se([r[3] for r in per_rep])
    return SimReport(
        mu_s_hat=mu_s, se_mu_s=se_mu_s,
        mu_p_hat=mu_p, se_mu_p=se_mu_p,
        delay_hat=delay, se_delay=se_delay,
        pi0_hat=pi0, se_pi0=se_pi0,
        collisions=collisions,
        arrivals=tuple(int(x) for x in arrivals),
        departures=tuple(int(x) for x in departures),
        final_backlog=tuple(int(x) for x in backlog),
        seed_used=sim.seed, replications=sim.replications, slots=sim.slots,
    )


def run_traced(cfg: NetworkConfig, sensing, policy: AccessPolicy,
               sim: SimConfig | None = None, force_python: bool = False):
    """Single-replication run returning (report, per-slot trace).

    The trace records slot-start state: owner, queue lengths, the
    retransmission mask, plus the slot's secondary mask, outcome code and
    feedback code. Outcomes: 0 quiet, 1 primary success, 2 primary loss,
    3 secondary success, 4 secondary collision, 5 secondary outage loss.
    Feedback: 0 none, 1 ack, 2 nack.
    """
    sim = sim or SimConfig()
    if sim.replications != 1:
        raise ValueError("run_traced requires replications == 1")
    parts = _resolve(cfg, sensing, policy, sim)
    kernel = _sim_chunk if (force_python or _sim_chunk_jit is None) else _sim_chunk_jit
    tr_owner = np.zeros(sim.slots, dtype=np.int64)
    tr_q = np.zeros((sim.slots, cfg.M_p), dtype=np.int64)
    tr_rmask = np.zeros(sim.slots, dtype=np.int64)
    tr_sumask = np.zeros(sim.slots, dtype=np.int64)
    tr_outcome = np.zeros(sim.slots, dtype=np.int64)
    tr_fb = np.zeros(sim.slots, dtype=np.int64)
    trace_arrays = (tr_owner, tr_q, tr_rmask, tr_sumask, tr_outcome, tr_fb)
    rng = np.random.default_rng(np.random.SeedSequence(sim.seed).spawn(1)[0])
    stats, arr_cnt, dep_cnt, queue = _run_one(kernel, rng, cfg, sim, *parts,
                                              trace_arrays=trace_arrays)
    span = sim.slots - sim.warmup
    mu_s, mu_p, pi0, delay = _estimates(stats, span, cfg.M_s)
    report = SimReport(
        mu_s_hat=mu_s, se_mu_s=math.nan,
        mu_p_hat=mu_p, se_mu_p=math.nan,
        delay_hat=delay, se_delay=math.nan,
        pi0_hat=pi0, se_pi0=math.nan,
        collisions=int(stats[4]),
        arrivals=tuple(int(x) for x in arr_cnt),
        departures=tuple(int(x) for x in dep_cnt),
        final_backlog=tuple(int(x) for x in queue),
        seed_used=sim.seed, replications=1, slots=sim.slots,
    )
    dtype = np.dtype([
        ("slot", "i8"), ("owner", "i8"), ("queues", "i8", (cfg.M_p,)),
        ("r_mask", "i8"), ("su_mask", "i8"), ("outcome", "i8"), ("feedback", "i8"),
    ])
    trace = np.zeros(sim.slots, dtype=dtype)
    trace["slot"] = np.arange(sim.slots, dtype=np.int64)
    trace["owner"] = tr_owner
    trace["queues"] = tr_q
    trace["r_mask"] = tr_rmask
    trace["su_mask"] = tr_sumask
    trace["outcome"] = tr_outcome
    trace["feedback"] = tr_fb
    return report, trace


def estimate_pi0(trace: np.ndarray, warmup: int = 0) -> float:
    """Fraction of post-warmup slots whose owner queue is empty at slot start."""
    rows = trace[trace["slot"] >= warmup]
    if rows.size == 0:
        raise ValueError("no slots beyond the warmup")
    M_p = rows["queues"].shape[1]
    own = rows["owner"]
    qsel = rows["queues"][np.arange(rows.size), np.minimum(own, M_p - 1)]
    empty = (own >= M_p) | (qsel == 0)
    return float(np.mean(empty))

"""Slot-level Monte Carlo simulator: determinism, accounting, traces."""
from __future__ import annotations

import numpy as np
import pytest

from softaccess import (
    AccessPolicy,
    NetworkConfig,
    Scheme,
    SimConfig,
    estimate_pi0,
    pi0_feedback,
    pi0_nofb,
    run,
    run_traced,
)

MU_P_SILENT = 0.24379849734332582
PI0_FB_SILENT = 0.5898251995410111

SMALL = dict(slots=20_000, warmup=1_000, replications=3)


@pytest.fixture(scope="module")
def aggressive():
    return AccessPolicy((1.0, 1.0, 1.0, 1.0), Scheme.FEEDBACK)


@pytest.fixture(scope="module")
def traced(ref_cfg, ref_sensing, aggressive):
    sim = SimConfig(slots=30_000, warmup=1_000, seed=5, replications=1,
                    scheme=Scheme.FEEDBACK)
    return run_traced(ref_cfg, ref_sensing, aggressive, sim)


class TestSimConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(slots=0), dict(slots=100, warmup=100), dict(warmup=-1),
        dict(replications=0), dict(seed=-1),
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SimConfig(**kwargs)

    def test_defaults(self):
        sim = SimConfig()
        assert sim.slots == 1_000_000
        assert sim.warmup == 10_000
        assert sim.replications == 10


class TestDeterminism:
    def test_same_seed_same_report(self, ref_cfg, ref_sensing):
        pol = AccessPolicy((1.0, 0.3, 0.0, 0.0), Scheme.FEEDBACK)
        sim = SimConfig(seed=4, scheme=Scheme.FEEDBACK, **SMALL)
        assert run(ref_cfg, ref_sensing, pol, sim) == run(ref_cfg, ref_sensing,
                                                          pol, sim)

    def test_seed_changes_report(self, ref_cfg, ref_sensing):
        pol = AccessPolicy((1.0, 0.3, 0.0, 0.0), Scheme.FEEDBACK)
        a = run(ref_cfg, ref_sensing, pol,
                SimConfig(seed=4, scheme=Scheme.FEEDBACK, **SMALL))
        b = run(ref_cfg, ref_sensing, pol,
                SimConfig(seed=5, scheme=Scheme.FEEDBACK, **SMALL))
        assert a != b

    def test_python_fallback_matches_kernel(self, ref_cfg, ref_sensing):
        small = dict(slots=4_000, warmup=400, replications=2)
        for scheme, a in ((Scheme.FEEDBACK, (1.0, 0.5, 0.2, 0.0)),
                          (Scheme.NO_FEEDBACK, (1.0, 0.5, 0.2, 0.0)),
                          (Scheme.GENIE, (0.5,))):
            pol = AccessPolicy(a, scheme)
            sim = SimConfig(seed=11, scheme=scheme, **small)
            fast = run(ref_cfg, ref_sensing, pol, sim)
            slow = run(ref_cfg, ref_sensing, pol, sim, force_python=True)
            assert fast == slow


class TestSilentPolicy:
    def test_reference_rates(self, ref_cfg, ref_sensing):
        pol = AccessPolicy((0.0, 0.0, 0.0, 0.0))
        rep = run(ref_cfg, ref_sensing, pol,
                  SimConfig(slots=100_000, warmup=5_000, seed=3,
                            replications=5))
        assert rep.mu_s_hat == 0.0
        assert abs(rep.mu_p_hat - MU_P_SILENT) <= 3.0 * rep.se_mu_p
        assert abs(rep.pi0_hat - PI0_FB_SILENT) <= 3.0 * rep.se_pi0
        assert rep.collisions == 0


class TestConservation:
    def test_flow_balance_every_primary(self, ref_cfg, ref_sensing, aggressive):
        rep = run(ref_cfg, ref_sensing, aggressive,
                  SimConfig(seed=21, scheme=Scheme.FEEDBACK, **SMALL))
        assert len(rep.arrivals) == ref_cfg.M_p
        for arr, dep, backlog in zip(rep.arrivals, rep.departures,
                                     rep.final_backlog):
            assert arr - dep == backlog
            assert backlog >= 0

    def test_rates_in_unit_interval(self, ref_cfg, ref_sensing, aggressive):
        rep = run(ref_cfg, ref_sensing, aggressive,
                  SimConfig(seed=22, scheme=Scheme.FEEDBACK, **SMALL))
        for v in (rep.mu_s_hat, rep.mu_p_hat, rep.pi0_hat):
            assert 0.0 <= v <= 1.0
        assert rep.delay_hat >= 1.0


class TestTrace:
    def test_nack_moves_owner_to_retransmission(self, traced):
        _, trace = traced
        nacks = np.flatnonzero(trace["feedback"][:-1] == 2)
        assert nacks.size > 0
        owners = trace["owner"][nacks]
        next_masks = trace["r_mask"][nacks + 1]
        assert np.all((next_masks >> owners) & 1 == 1)

    def test_secondaries_silent_during_retransmissions(self, traced):
        _, trace = traced
        owner = trace["owner"]
        owned = owner < 4
        backlog = np.zeros(len(trace), dtype=bool)
        backlog[owned] = trace["queues"][owned, owner[owned]] > 0
        in_retx = np.zeros(len(trace), dtype=bool)
        in_retx[owned] = (trace["r_mask"][owned] >> owner[owned]) & 1 == 1
        hot = owned & backlog & in_retx
        assert hot.sum() > 0
        assert np.all(trace["su_mask"][hot] == 0)

    def test_outcome_attribution(self, traced):
        _, trace = traced
        pop = np.array([bin(m).count("1") for m in trace["su_mask"]])
        out = trace["outcome"]
        assert np.all(pop[out == 0] == 0)
        assert np.all(pop[out == 3] == 1)
        assert np.all(pop[out == 4] >= 2)
        assert np.all(pop[out == 5] == 1)
        # ack exactly on primary success, nack exactly on primary loss
        assert np.array_equal(out == 1, trace["feedback"] == 1)
        assert np.array_equal(out == 2, trace["feedback"] == 2)
        # losses during retransmission slots can only come from fading
        owner = trace["owner"]
        owned = owner < 4
        in_retx = np.zeros(len(trace), dtype=bool)
        in_retx[owned] = (trace["r_mask"][owned] >> owner[owned]) & 1 == 1
        retx_losses = in_retx & (out == 2)
        assert np.all(trace["su_mask"][retx_losses] == 0)

    def test_queue_steps_are_unit(self, traced):
        _, trace = traced
        dq = trace["queues"][1:].astype(np.int64) - trace["queues"][:-1]
        assert dq.min() >= -1 and dq.max() <= 1
        # a drop needs a served owner: outcome 1 in that slot for that queue
        drops = np.argwhere(dq == -1)
        for t, j in drops[:200]:
            assert trace["outcome"][t] == 1 and trace["owner"][t] == j

    def test_estimate_matches_report(self, traced):
        report, trace = traced
        assert estimate_pi0(trace, warmup=1_000) == report.pi0_hat

    def test_estimate_bounds_and_empty(self, traced):
        _, trace = traced
        assert 0.0 <= estimate_pi0(trace) <= 1.0
        with pytest.raises(ValueError):
            estimate_pi0(trace, warmup=len(trace))


class TestSchemeContrast:
    def test_feedback_frees_more_idle_slots(self, ref_cfg, ref_sensing):
        a = (1.0, 1.0, 1.0, 1.0)
        sim = dict(slots=200_000, warmup=5_000, seed=9, replications=4)
        rf = run(ref_cfg, ref_sensing, AccessPolicy(a, Scheme.FEEDBACK),
                 SimConfig(scheme=Scheme.FEEDBACK, **sim))
        rn = run(ref_cfg, ref_sensing, AccessPolicy(a, Scheme.NO_FEEDBACK),
                 SimConfig(scheme=Scheme.NO_FEEDBACK, **sim))
        noise = 3.0 * (rf.se_pi0 ** 2 + rn.se_pi0 ** 2) ** 0.5
        assert rf.pi0_hat - rn.pi0_hat > noise
        pol = AccessPolicy(a)
        assert abs(rf.pi0_hat - pi0_feedback(ref_cfg, ref_sensing, pol)) <= 3.0 * rf.se_pi0
        assert abs(rn.pi0_hat - pi0_nofb(ref_cfg, ref_sensing, pol)) <= 3.0 * rn.se_pi0

    def test_no_arrivals_channel_always_free(self, ref_sensing):
        cfg = NetworkConfig(lambda_p=0.0)
        rep = run(cfg, ref_sensing, AccessPolicy((1.0, 0.5, 0.0, 0.0)),
                  SimConfig(seed=6, **SMALL))
        assert rep.pi0_hat == 1.0
        assert rep.mu_p_hat != rep.mu_p_hat  # nan: no busy slots observed


class TestConvergence:
    def test_standard_errors_shrink_with_span(self, ref_cfg, ref_sensing):
        pol = AccessPolicy((1.0, 0.25, 0.0, 0.0), Scheme.FEEDBACK)
        short = run(ref_cfg, ref_sensing, pol,
                    SimConfig(slots=20_000, warmup=1_000, seed=77,
                              replications=32, scheme=Scheme.FEEDBACK))
        long = run(ref_cfg, ref_sensing, pol,
                   SimConfig(slots=80_000, warmup=1_000, seed=77,
                             replications=32, scheme=Scheme.FEEDBACK))
        # 4x span should halve each SE; allow wide noise in the SE estimate
        for f in ("se_mu_s", "se_mu_p", "se_delay", "se_pi0"):
            ratio = getattr(long, f) / getattr(short, f)
            assert 0.3 < ratio < 0.75, f


class TestRoundRobin:
    def test_deterministic_ownership_smoke(self, ref_cfg, ref_sensing):
        pol = AccessPolicy((1.0, 0.3, 0.0, 0.0), Scheme.FEEDBACK)
        rep = run(ref_cfg, ref_sensing, pol,
                  SimConfig(seed=8, scheme=Scheme.FEEDBACK, round_robin=True,
                            **SMALL))
        for arr, dep, backlog in zip(rep.arrivals, rep.departures,
                                     rep.final_backlog):
            assert arr - dep == backlog
        assert 0.0 <= rep.mu_s_hat <= 1.0


class TestValidation:
    def test_run_traced_needs_single_replication(self, ref_cfg, ref_sensing):
        with pytest.raises(ValueError):
            run_traced(ref_cfg, ref_sensing, AccessPolicy((0.5,) * 4),
                       SimConfig(replications=2, **{k: v for k, v in
                                                    SMALL.items()
                                                    if k != "replications"}))

    def test_genie_policy_shape(self, ref_cfg, ref_sensing):
        with pytest.raises(ValueError):
            run(ref_cfg, ref_sensing, AccessPolicy((0.5, 0.5), Scheme.GENIE),
                SimConfig(**SMALL))

    def test_policy_bin_mismatch(self, ref_cfg, ref_sensing):
        with pytest.raises(ValueError):
            run(ref_cfg, ref_sensing, AccessPolicy((0.5, 0.5)),
                SimConfig(**SMALL))

"""Selection procedure contracts for both access algorithms."""

import math

import numpy as np
import pytest

from macdiv import _kernels, bounds, evt, simkit
from macdiv.channel import ChannelSet, RngStream, sample_channel_set
from macdiv.mathcore import ContractError, inv_reg_gamma_q
from macdiv.scheduler import COLLISION, IDLE, SERVED, channel_access, sic_select, sic_slot
from macdiv.simkit import SystemConfig


def _policy(u, K, r, k=1.0):
    return evt.ThresholdPolicy(u=u, k_target=k, K=K, r=r)


class TestChannelAccess:
    def test_all_below_is_idle(self):
        cs = sample_channel_set(RngStream(0, 0), 10, 2)
        out = channel_access(cs, _policy(1e9, 10, 2), 1.0)
        assert out.kind == IDLE and out.j == 0 and out.sum_capacity == 0.0

    def test_zero_threshold_collides(self):
        cs = sample_channel_set(RngStream(0, 1), 10, 2)
        out = channel_access(cs, _policy(0.0, 10, 2), 1.0)
        assert out.kind == COLLISION and out.j == 10 and out.sum_capacity == 0.0

    def test_served_sum_matches_rates(self):
        u = evt.threshold_for_rate(50, 2, 4)
        pol = _policy(u, 50, 4, 2)
        served = 0
        for t in range(60):
            cs = sample_channel_set(RngStream(5, t), 50, 4)
            out = channel_access(cs, pol, 1.0, "zf")
            j = int(np.sum(cs.norms_sq() > u))
            assert out.j == j
            if out.kind == SERVED:
                served += 1
                assert 1 <= j <= 4
                assert out.sum_capacity == pytest.approx(float(np.sum(out.rates)), rel=1e-12)
            else:
                assert out.rates is None and out.sum_capacity == 0.0
        assert served > 0

    def test_exceedance_counts_binomial(self):
        # engine j-counts against the Binomial mean K Q(r, u/2) = k
        cfg = SystemConfig(K=300, r=4, P=1.0, k_target=4.0, n_slots=50_000, seed=2)
        _, counts = simkit.slot_capacities(cfg)
        assert np.mean(counts) == pytest.approx(4.0, rel=0.01)

    def test_served_probability_poisson(self):
        cfg = SystemConfig(K=300, r=4, P=1.0, k_target=4.0, n_slots=100_000, seed=3)
        s = simkit.run_slots(cfg)
        pred = sum(math.exp(-4) * 4 ** j / math.factorial(j) for j in range(1, 5))
        assert s.served / s.n_slots == pytest.approx(pred, abs=0.01)

    def test_receiver_mismatch_rejected(self):
        cs = sample_channel_set(RngStream(0, 2), 10, 2)
        with pytest.raises(ContractError):
            channel_access(cs, _policy(1.0, 10, 3), 1.0)
        with pytest.raises(ContractError):
            channel_access(cs, _policy(1.0, 10, 2), 1.0, receiver="ml")

    def test_raising_threshold_reduces_exceedances(self):
        means = []
        for k in (6.0, 3.0, 1.0):  # increasing u
            cfg = SystemConfig(K=100, r=4, P=1.0, k_target=k, n_slots=20_000, seed=4)
            _, counts = simkit.slot_capacities(cfg)
            means.append(np.mean(counts))
        assert means[0] > means[1] > means[2]


class TestSicSelect:
    def test_r1_picks_global_argmax(self):
        cs = sample_channel_set(RngStream(1, 0), 20, 1)
        sel = sic_select(cs, 1)
        assert sel.order == [int(np.argmax(cs.norms_sq()))]

    def test_orthogonal_full_set_by_descending_norm(self):
        rng = np.random.default_rng(6)
        Q, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
        scales = np.array([3.0, 1.0, 2.0, 0.5])
        cs = ChannelSet(vectors=(Q * scales).T)
        sel = sic_select(cs, 4)
        assert sel.order == [0, 2, 1, 3]  # norms 9, 4, 1, 0.25
        assert sel.projected_norms == pytest.approx([9.0, 4.0, 1.0, 0.25], rel=1e-9)

    def test_stage_thresholds(self):
        cs = sample_channel_set(RngStream(2, 0), 30, 3)
        sel = sic_select(cs, 3, exceed_target=1.0)
        for l in range(3):
            expect = 2.0 * inv_reg_gamma_q(3 - l, 1.0 / 30)
            assert sel.thresholds[l] == pytest.approx(expect, rel=1e-12)
        lit = sic_select(cs, 3, exceed_target=1.0, paper_literal=True)
        assert lit.thresholds == pytest.approx([t / 2 for t in sel.thresholds], rel=1e-12)
        assert lit.order == sel.order  # thresholds don't change the argmax

    def test_needs_enough_users(self):
        cs = sample_channel_set(RngStream(0, 3), 2, 3)
        with pytest.raises(ContractError):
            sic_select(cs, 3)

    def test_high_rate_thresholds_rarely_missed(self):
        # with exceed target log K, the chance any stage max misses its
        # threshold is O(r/K); empirical failure rate <= 5 r / K
        K, r, trials = 300, 4, 10_000
        target = math.log(K)
        thresholds = np.array([2.0 * inv_reg_gamma_q(r - l + 1, target / K) for l in range(1, r + 1)])
        H = _kernels.channels(7, np.arange(trials, dtype=np.uint64), K, r)
        _, projn = _kernels.sic_chain(H, r)
        fails = np.any(projn <= thresholds, axis=1)
        assert np.mean(fails) <= 5 * r / K

    def test_matches_engine_kernel(self):
        H = _kernels.channels(8, np.arange(30, dtype=np.uint64), 40, 3)
        orders, projn = _kernels.sic_chain(H, 3)
        for b in range(30):
            sel = sic_select(ChannelSet(vectors=H[b]), 3)
            assert sel.order == list(orders[b])
            assert np.allclose(sel.projected_norms, projn[b], rtol=1e-8)


class TestSicSlot:
    def test_known_norms(self):
        cs = ChannelSet(vectors=np.array([[math.sqrt(3)], [math.sqrt(5)]], dtype=complex))
        out = sic_slot(cs, 1, 1.0)
        assert out.kind == SERVED
        assert out.sum_capacity == pytest.approx(math.log(6.0), rel=1e-12)

    def test_orthogonal_case(self):
        rng = np.random.default_rng(9)
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
        scales = np.array([2.0, 1.5, 1.0])
        cs = ChannelSet(vectors=(Q * scales).T)
        out = sic_slot(cs, 3, 2.0)
        expect = sum(math.log1p(2.0 * s * s) for s in scales)
        assert out.sum_capacity == pytest.approx(expect, rel=1e-9)

    def test_mean_between_bounds(self):
        cfg = SystemConfig(K=300, r=4, P=1.0, n_slots=10_000, seed=10, receiver="zfsic")
        s = simkit.run_slots(cfg)
        assert bounds.sic_lower(300, 4, 1.0) <= s.mean <= bounds.sic_upper(300, 4, 1.0)

    def test_stage_gumbel_fit(self):
        # stage-l maxima over fresh users follow the Gumbel law with the
        # stage constants (dof 2(r-l+1))
        K, r = 300, 4
        for l in (1, 3):
            c = evt.fast_constants(K, r - l + 1)
            _, cdf = evt.gumbel_stats(c)
            samples = simkit.max_norm_samples(K, r - l + 1, 10_000, seed=30 + l)
            assert simkit.ks_statistic(samples, cdf) <= 0.05

    def test_sic_beats_single_threshold_zf(self):
        sic = simkit.run_slots(SystemConfig(K=300, r=4, P=1.0, n_slots=5_000, seed=11, receiver="zfsic"))
        zf = simkit.run_slots(SystemConfig(K=300, r=4, P=1.0, k_target=4.0, n_slots=5_000, seed=11))
        assert sic.mean > zf.mean + 3 * (sic.stderr + zf.stderr)

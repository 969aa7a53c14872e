"""Engine contracts: determinism, sampler equivalence, aggregation."""

import math

import numpy as np
import pytest

from macdiv import channel, scheduler, evt, simkit
from macdiv.mathcore import DomainError
from macdiv.simkit import SystemConfig


class TestValidateConfig:
    def test_antenna_excess_names_fields(self):
        with pytest.raises(DomainError, match="K"):
            simkit.validate_config(SystemConfig(K=2, r=4, k_target=1.0))

    def test_zero_k_names_k(self):
        with pytest.raises(DomainError, match="k must be positive"):
            simkit.validate_config(SystemConfig(K=10, r=2, k_target=0.0))

    def test_collects_all_violations(self):
        with pytest.raises(DomainError) as err:
            simkit.validate_config(SystemConfig(K=10, r=2, k_target=1.0, P=-1.0,
                                                n_slots=0, receiver="svd"))
        msg = str(err.value)
        assert "P" in msg and "n_slots" in msg and "receiver" in msg

    def test_defaults_pass(self):
        cfg = simkit.validate_config(SystemConfig(K=10, r=2, k_target=1.0))
        assert cfg.P == 1.0 and cfg.log_base == "nats" and cfg.seed == 0


class TestDeterminism:
    def test_rerun_identical(self):
        cfg = SystemConfig(K=50, r=4, k_target=3.0, n_slots=2000, seed=5)
        a, ca = simkit.slot_capacities(cfg)
        b, cb = simkit.slot_capacities(cfg)
        assert np.array_equal(a, b) and np.array_equal(ca, cb)

    def test_thread_counts_equivalent(self, monkeypatch):
        cfg = SystemConfig(K=50, r=4, k_target=3.0, n_slots=50_000, seed=5)
        results = {}
        for n in ("1", "4", "16"):
            monkeypatch.setenv("MACDIV_THREADS", n)
            results[n] = simkit.run_slots(cfg)
        for n in ("4", "16"):
            assert results[n].mean == results["1"].mean
            assert results[n].variance == results["1"].variance
            assert np.array_equal(results[n].hist_counts, results["1"].hist_counts)

    def test_sic_rerun_identical(self):
        cfg = SystemConfig(K=40, r=3, n_slots=500, seed=7, receiver="zfsic")
        assert simkit.run_slots(cfg).mean == simkit.run_slots(cfg).mean


class TestSamplerEquivalence:
    def test_full_matches_slot_reference(self):
        # same streams through the batched engine and the slot-level API
        cfg = SystemConfig(K=30, r=3, P=2.0, k_target=2.0, n_slots=200, seed=13, sampler="full")
        caps, counts = simkit.slot_capacities(cfg)
        pol = evt.policy_for_rate(30, 2.0, 3)
        for t in range(200):
            cs = channel.sample_channel_set(channel.RngStream(13, t), 30, 3)
            out = scheduler.channel_access(cs, pol, 2.0, "zf")
            assert counts[t] == out.j
            assert caps[t] == pytest.approx(out.sum_capacity, rel=1e-9, abs=1e-12)

    def test_tail_matches_full_statistically(self):
        base = dict(K=300, r=4, P=1.0, k_target=4.0, n_slots=40_000)
        a = simkit.run_slots(SystemConfig(sampler="tail", seed=1, **base))
        b = simkit.run_slots(SystemConfig(sampler="full", seed=2, **base))
        z = abs(a.mean - b.mean) / math.sqrt(a.stderr ** 2 + b.stderr ** 2)
        assert z < 4.0
        # exceedance-count laws agree too
        ja = a.j_counts / a.j_counts.sum()
        jb = b.j_counts / b.j_counts.sum()
        m = min(ja.size, jb.size)
        assert np.max(np.abs(ja[:m] - jb[:m])) < 0.02

    def test_tail_radius_law(self):
        # tail sampler norms match the conditional chi-square law
        cfg = SystemConfig(K=300, r=4, P=1.0, k_target=4.0, n_slots=20_000, seed=3, sampler="tail")
        u = evt.threshold_for_rate(300, 4.0, 4)
        cumw = simkit._radius_mixture(u, 4)
        streams = np.arange(5000, dtype=np.uint64)
        H = simkit._sample_tail_actives(cfg.seed, streams, 1, 4, u, cumw)
        norms = np.einsum("brj,brj->b", H.conj(), H).real
        assert np.all(norms > u)
        from macdiv.mathcore import reg_gamma_q
        p = reg_gamma_q(4, u / 2)
        ks = simkit.ks_statistic(norms, lambda x: 1 - reg_gamma_q(4, np.asarray(x) / 2) / p)
        assert ks < 0.02


class TestRunSlots:
    def test_single_user_closed_form(self):
        # K = r = 1, u = 0: every slot serves the lone user, so the mean
        # is E log(1 + chi2_2) = e^(1/2) E1(1/2), via the quadrature oracle
        from scipy import integrate
        closed = math.exp(0.5) * integrate.quad(lambda t: math.exp(-t) / t, 0.5, np.inf)[0]
        assert closed == pytest.approx(0.9229106324, abs=1e-9)  # frozen
        cfg = SystemConfig(K=1, r=1, P=1.0, u=0.0, n_slots=100_000, seed=17)
        s = simkit.run_slots(cfg)
        assert s.served == s.n_slots
        assert abs(s.mean - closed) < 3 * s.stderr

    def test_unreachable_threshold_all_idle(self):
        cfg = SystemConfig(K=20, r=2, P=1.0, u=1e9, n_slots=3000, seed=18)
        s = simkit.run_slots(cfg)
        assert s.idle == s.n_slots and s.mean == 0.0 and s.served == 0

    def test_full_sampler_same_statistics(self):
        cfg = SystemConfig(K=20, r=2, P=1.0, u=1e9, n_slots=500, seed=18, sampler="full")
        s = simkit.run_slots(cfg)
        assert s.idle == s.n_slots and s.mean == 0.0

    def test_zero_threshold_full_load(self):
        # k = K means u = 0: with K = r every slot serves all users, and
        # the tail sampler's radius mixture degenerates to plain Gamma(r)
        for sampler in ("tail", "full"):
            cfg = SystemConfig(K=4, r=4, P=1.0, k_target=4.0, n_slots=4000,
                               seed=21, sampler=sampler)
            s = simkit.run_slots(cfg)
            assert s.served == s.n_slots
            assert s.mean > 0
        tail = simkit.run_slots(SystemConfig(K=4, r=4, P=1.0, k_target=4.0,
                                             n_slots=20_000, seed=22, sampler="tail"))
        full = simkit.run_slots(SystemConfig(K=4, r=4, P=1.0, k_target=4.0,
                                             n_slots=20_000, seed=23, sampler="full"))
        z = abs(tail.mean - full.mean) / math.hypot(tail.stderr, full.stderr)
        assert z < 4.0


class TestSummaries:
    def test_counts_partition_slots(self):
        cfg = SystemConfig(K=100, r=2, k_target=2.0, n_slots=5000, seed=9)
        s = simkit.run_slots(cfg)
        assert s.idle + s.collision + s.served == s.n_slots == 5000
        assert s.hist_counts.sum() == s.n_slots
        assert s.hist_counts[0] >= s.idle + s.collision

    def test_stderr_scales_as_root_n(self):
        base = dict(K=100, r=4, P=1.0, k_target=3.0)
        s1 = simkit.run_slots(SystemConfig(n_slots=20_000, seed=10, **base))
        s2 = simkit.run_slots(SystemConfig(n_slots=80_000, seed=10, **base))
        assert 1.8 <= s1.stderr / s2.stderr <= 2.2

    def test_served_idle_collision_binomial(self):
        K, r, k, n = 300, 4, 4.0, 50_000
        cfg = SystemConfig(K=K, r=r, k_target=k, n_slots=n, seed=11)
        s = simkit.run_slots(cfg)
        from macdiv.mathcore import reg_gamma_q
        p = reg_gamma_q(r, evt.threshold_for_rate(K, k, r) / 2)
        cdf = simkit._binomial_cdf(K, p)
        pmf = np.diff(np.concatenate([[0.0], cdf]))
        p_idle, p_served = pmf[0], pmf[1:r + 1].sum()
        for observed, prob in ((s.idle, p_idle), (s.served, p_served)):
            sd = math.sqrt(n * prob * (1 - prob))
            assert abs(observed - n * prob) < 4 * sd

    def test_pairwise_moments_match_numpy(self):
        rng = np.random.default_rng(0)
        x = rng.exponential(size=10_001)
        m, v = simkit._pairwise_moments(x)
        assert m == pytest.approx(float(np.mean(x)), rel=1e-12)
        assert v == pytest.approx(float(np.var(x, ddof=1)), rel=1e-12)

    def test_bits_rescaling(self):
        base = dict(K=50, r=2, k_target=1.5, n_slots=2000, seed=12)
        nats = simkit.run_slots(SystemConfig(log_base="nats", **base))
        bits = simkit.run_slots(SystemConfig(log_base="bits", **base))
        assert bits.mean == pytest.approx(nats.mean / math.log(2), rel=1e-12)


class TestRunSweep:
    def test_single_k_single_row(self):
        cfg = SystemConfig(K=50, r=2, n_slots=1000, seed=1)
        res = simkit.run_sweep(cfg, [1.5])
        assert len(res.rows) == 1
        row = res.rows[0]
        assert set(row) >= {"k", "mc_mean", "mc_stderr", "upper", "lower"}

    def test_rows_sorted_and_bounded(self):
        cfg = SystemConfig(K=300, r=4, n_slots=5000, seed=2)
        res = simkit.run_sweep(cfg, [1.0, 2.0, 3.0])
        ks = [row["k"] for row in res.rows]
        assert ks == sorted(ks)
        for row in res.rows:
            assert row["lower"] <= row["upper"]

    def test_optimal_k_below_r(self):
        cfg = SystemConfig(K=300, r=4, n_slots=10_000, seed=3)
        res = simkit.run_sweep(cfg, list(np.arange(0.5, 8.01, 0.5)))
        best = max(res.rows, key=lambda row: row["mc_mean"])
        assert best["k"] < 4

    def test_mmse_dominates_zf_rowwise(self):
        ks = [1.0, 3.0, 5.0]
        zf = simkit.run_sweep(SystemConfig(K=300, r=4, n_slots=5000, seed=4), ks)
        mm = simkit.run_sweep(SystemConfig(K=300, r=4, n_slots=5000, seed=4, receiver="mmse"), ks)
        for a, b in zip(mm.rows, zf.rows):
            assert a["mc_mean"] >= b["mc_mean"]

    def test_out_of_range_k_rejected(self):
        cfg = SystemConfig(K=10, r=2, n_slots=100, seed=0)
        with pytest.raises(DomainError):
            simkit.run_sweep(cfg, [20.0])


class TestDistributionReport:
    def test_single_user_system_degenerate(self):
        cfg = SystemConfig(K=1, r=1, u=0.0, n_slots=500, seed=5)
        rep = simkit.distribution_report(cfg, comparators=("single-random-user", "strongest-user"))
        a = rep["comparators"]["single-random-user"]
        b = rep["comparators"]["strongest-user"]
        assert a["mean_all"] == b["mean_all"]
        assert np.array_equal(a["hist_all"], b["hist_all"])

    def test_mean_ordering(self):
        cfg = SystemConfig(K=300, r=4, k_target=4.0, n_slots=3000, seed=6)
        rep = simkit.distribution_report(cfg)
        c = rep["comparators"]
        assert (c["single-random-user"]["mean_served"]
                < c["strongest-user"]["mean_served"]
                < c["zf-threshold-group"]["mean_served"]
                < c["zfsic-group"]["mean_served"])

    def test_strongest_user_gumbel_shape_r1(self):
        # log(1 + P max) against the transformed Gumbel law
        K, n = 300, 20_000
        cfg = SystemConfig(K=K, r=1, k_target=1.0, n_slots=n, seed=7)
        rep = simkit.distribution_report(cfg, comparators=("strongest-user",))
        del rep
        samples = simkit.max_norm_samples(K, 1, n, seed=7)
        caps = np.log1p(samples)
        _, cdf = evt.gumbel_stats(evt.fast_constants(K, 1))
        ks = simkit.ks_statistic(caps, lambda x: cdf(np.expm1(np.asarray(x))))
        assert ks <= 0.05


class TestDiagnostics:
    def test_report_meets_op_tolerances(self):
        cfg = SystemConfig(K=300, r=4, P=1.0, k_target=4.0, n_slots=1, seed=19)
        rep = simkit.diagnostics(cfg, n_cond=200_000)
        assert rep["tv_poisson"] <= 0.02
        assert rep["cond_norm_mean"] / rep["cond_norm_expected"] == pytest.approx(1.0, abs=0.02)
        assert rep["angle_ks"] <= 0.01
        assert rep["excess_ks"] <= 0.02


class TestStatsHelpers:
    def test_ks_statistic_exact_uniform(self):
        x = (np.arange(1000) + 0.5) / 1000
        assert simkit.ks_statistic(x, lambda t: np.asarray(t)) <= 0.001

    def test_ks_statistic_detects_shift(self):
        x = np.linspace(0.5, 1.0, 500)
        assert simkit.ks_statistic(x, lambda t: np.asarray(t)) >= 0.45

    def test_tv_hand_computed(self):
        # Binomial(2, 1/2) vs Poisson(1): pmfs (1/4, 1/2, 1/4, 0, ...) vs
        # e^-1 (1, 1, 1/2, 1/6, ...)
        e = math.exp(-1)
        expect = 0.5 * (abs(0.25 - e) + abs(0.5 - e) + abs(0.25 - e / 2) + (1 - e * (1 + 1 + 0.5)))
        assert simkit.tv_binomial_poisson(2, 0.5) == pytest.approx(expect, abs=1e-12)

    def test_sic_stage_rates_non_increasing(self):
        from macdiv import _kernels
        H = _kernels.channels(8, np.arange(3000, dtype=np.uint64), 300, 4)
        _, projn = _kernels.sic_chain(H, 4)
        stage_rates = np.mean(np.log1p(projn), axis=0)
        assert np.all(np.diff(stage_rates) < 0)

import math

import numpy as np
import pytest
from scipy import stats

from concentric_cqed.errors import DataError, InputError
from concentric_cqed.fitting import fit_exponential_decay
from concentric_cqed.spectra import CoupledSystem
from concentric_cqed.trace import (
    PhotonTrace,
    TraceConfig,
    alternating_sequence,
    detect_events,
    estimate_background,
    match_events,
    occupancy_intervals,
    occupied_fraction,
    simulate_trace,
    survival_experiment,
)
from concentric_cqed.units import MHZ

from .conftest import GAMMA, SURVIVAL_TAUS, SURVIVAL_TRIALS, coupled


class TestConfig:
    def test_rejects_inverted_rates(self):
        with pytest.raises(InputError):
            TraceConfig(background_rate=5e4, atom_rate=2e3)

    def test_rejects_bad_times(self):
        with pytest.raises(InputError):
            TraceConfig(bin_width=0.0)
        with pytest.raises(InputError):
            TraceConfig(lifetime_t0=-1.0)

    def test_n_bins(self):
        assert TraceConfig(duration=10.0, bin_width=1e-3).n_bins == 10_000


class TestSimulation:
    def test_null_process(self):
        cfg = TraceConfig(loading_rate=0.0, duration=100.0, seed=3)
        trace = simulate_trace(cfg)
        assert trace.counts.size == 100_000
        assert trace.truth_intervals == []
        expected = cfg.background_rate * cfg.bin_width
        assert abs(trace.counts.mean() - expected) < 5 * math.sqrt(expected / trace.counts.size)

    def test_zero_background_no_atom(self):
        trace = simulate_trace(TraceConfig(background_rate=0.0, loading_rate=0.0))
        assert not trace.counts.any()
        with pytest.raises(DataError):
            detect_events(trace)

    def test_duration(self):
        trace = simulate_trace(TraceConfig(duration=2.5, bin_width=5e-4))
        assert trace.duration == pytest.approx(2.5)
        assert trace.times[1] == pytest.approx(5e-4)

    def test_two_mode_histogram(self):
        cfg = TraceConfig(duration=1000.0, seed=5)
        counts = simulate_trace(cfg).counts
        hist = np.bincount(counts)
        split = int(round((cfg.background_rate + cfg.atom_rate) * cfg.bin_width / 2))
        low_mode = int(np.argmax(hist[:split]))
        high_mode = split + int(np.argmax(hist[split:]))
        low_width = counts[counts < split].std()
        high_width = counts[counts >= split].std()
        assert high_mode - low_mode > 5 * (low_width + high_width)
        # the clusters carry Poisson widths around their modes
        assert low_width == pytest.approx(math.sqrt(cfg.background_rate * cfg.bin_width), rel=0.1)

    def test_count_conservation(self):
        cfg = TraceConfig(duration=200.0, seed=9)
        trace = simulate_trace(cfg)
        occupied = sum(b - a for a, b in trace.truth_intervals)
        expected = cfg.background_rate * trace.duration + (cfg.atom_rate - cfg.background_rate) * occupied
        assert trace.counts.min() >= 0
        assert abs(trace.counts.sum() - expected) < 5 * math.sqrt(expected)

    def test_single_occupancy(self):
        intervals = occupancy_intervals(5.0, 0.23, 100.0, np.random.default_rng(0))
        for (_, end), (start, _) in zip(intervals, intervals[1:]):
            assert start > end

    def test_occupancy_fraction(self):
        """Long-run occupied fraction matches the alternating renewal process."""
        cfg = TraceConfig(duration=1000.0, seed=21)  # 10^6 bins
        trace = simulate_trace(cfg)
        frac = sum(b - a for a, b in trace.truth_intervals) / trace.duration
        on, off = 1 / cfg.lifetime_t0, cfg.loading_rate
        expected = off / (on + off)
        assert expected == pytest.approx(cfg.loading_rate * cfg.lifetime_t0 / (1 + cfg.loading_rate * cfg.lifetime_t0))
        # asymptotic variance of the time spent in one state of a two-state Markov chain
        sigma = math.sqrt(2 * on * off / (on + off) ** 3 / trace.duration)
        assert abs(frac - expected) < 3 * sigma

    def test_partial_bin_mixing(self):
        frac = occupied_fraction([(0.5, 2.25)], np.arange(4.0))
        np.testing.assert_allclose(frac, [0.5, 1.0, 0.25])
        assert not occupied_fraction([], np.arange(4.0)).any()

    def test_reproducible(self):
        a = simulate_trace(TraceConfig(seed=42))
        b = simulate_trace(TraceConfig(seed=42))
        assert np.array_equal(a.counts, b.counts)
        assert a.truth_intervals == b.truth_intervals
        assert detect_events(a) == detect_events(b)
        assert not np.array_equal(a.counts, simulate_trace(TraceConfig(seed=43)).counts)


class TestPhotonTrace:
    def test_rejects_negative_counts(self):
        with pytest.raises(DataError):
            PhotonTrace(np.array([1, -1]), 1e-3)

    def test_rejects_float_counts(self):
        with pytest.raises(DataError):
            PhotonTrace(np.array([1.5, 2.0]), 1e-3)

    def test_rejects_overlapping_truth(self):
        with pytest.raises(DataError):
            PhotonTrace(np.array([1, 2]), 1e-3, [(0.0, 1.0), (0.5, 2.0)])


class TestDetection:
    def test_noiseless_telegraph(self):
        counts = np.full(1000, 2)
        truth_bins = [(100, 180), (400, 402), (700, 1000)]
        for a, b in truth_bins:
            counts[a:b] = 50
        events = detect_events(PhotonTrace(counts, 1e-3))
        assert events == [(a * 1e-3, b * 1e-3) for a, b in truth_bins]

    def test_background_estimate(self):
        gen = np.random.default_rng(0)
        counts = gen.poisson(2.0, 100_000)
        counts[:60_000] += gen.poisson(48.0, 60_000)  # atom present most of the time
        assert estimate_background(counts) == pytest.approx(2.0, rel=0.02)

    def test_short_blip_rejected(self):
        counts = np.full(100, 2)
        counts[50] = 50
        assert detect_events(PhotonTrace(counts, 1e-3), min_bins=2) == []
        assert detect_events(PhotonTrace(counts, 1e-3), min_bins=1) == [(50 * 1e-3, 51 * 1e-3)]

    def test_empty_trace(self):
        with pytest.raises(DataError):
            detect_events(PhotonTrace(np.array([], dtype=int), 1e-3))

    def test_false_positive_rate(self):
        hits = sum(bool(detect_events(simulate_trace(TraceConfig(loading_rate=0.0, seed=s))))
                   for s in range(1000))
        assert hits / 1000 <= 0.01

    def test_roc_monotone(self):
        traces = [simulate_trace(TraceConfig(loading_rate=0.0, seed=s)) for s in range(200)]
        rates = [np.mean([bool(detect_events(t, threshold_sigma=k)) for t in traces])
                 for k in (1.5, 2.0, 2.5, 3.0, 4.0, 5.0)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))
        assert rates[0] > rates[-1]

    def test_boundary_benchmark(self):
        matched = within = total = 0
        for seed in range(1000):
            trace = simulate_trace(TraceConfig(seed=seed))
            m, w = match_events(detect_events(trace), trace.truth_intervals, 2 * trace.bin_width + 1e-12)
            matched += m
            within += w
            total += len(trace.truth_intervals)
        assert within / total >= 0.95


class TestMatching:
    def test_one_to_one(self):
        assert match_events([(0.0, 1.0)], [(0.0, 0.5), (0.6, 1.0)], 0.1) == (1, 0)

    def test_tolerance(self):
        assert match_events([(0.1, 1.0)], [(0.0, 1.05)], 0.1) == (1, 1)
        assert match_events([], [(0.0, 1.0)], 0.1) == (0, 0)


class TestSurvival:
    def test_zero_delay(self):
        rows = survival_experiment(TraceConfig(seed=1), [0.0], 1000)
        assert rows == [(0.0, 1000, 1000)]

    def test_one_lifetime(self):
        (tau, survived, trials), = survival_experiment(TraceConfig(seed=2), [0.230], 10_000)
        p = math.exp(-1)
        assert abs(survived / trials - p) < 3 * math.sqrt(p * (1 - p) / trials)

    def test_rejects_zero_trials(self):
        with pytest.raises(InputError):
            survival_experiment(TraceConfig(), [0.1], 0)

    def test_deterministic(self):
        a = survival_experiment(TraceConfig(seed=8), SURVIVAL_TAUS, 50)
        assert a == survival_experiment(TraceConfig(seed=8), SURVIVAL_TAUS, 50)

    def test_pipeline(self):
        rows = survival_experiment(TraceConfig(seed=0), SURVIVAL_TAUS, SURVIVAL_TRIALS)
        res = fit_exponential_decay([(t, k / n, n) for t, k, n in rows])
        assert abs(res["t0"] - 0.230) < 0.030


class TestAlternating:
    def test_far_detuned_probe(self, paper_budget):
        cfg = TraceConfig(duration=20.0, seed=4)
        seq = alternating_sequence(cfg, 1e-3, 1e-3, coupled(paper_budget, 5.0, 0.0), 1e5 * MHZ)
        expected = cfg.background_rate * 1e-3
        for mask in (seq.probe_occupancy == 1, seq.probe_occupancy == 0):
            counts = seq.probe.counts[mask]
            assert abs(counts.mean() - expected) < 5 * math.sqrt(expected / counts.size)

    def test_decoupled_atom_invisible(self, paper_budget):
        sys = coupled(paper_budget, 0.0, 0.0)
        passed = 0
        for seed in range(20):
            seq = alternating_sequence(TraceConfig(duration=20.0, seed=seed), 1e-3, 1e-3, sys, 0.0)
            occ, empty = seq.probe.counts[seq.probe_occupancy == 1], seq.probe.counts[seq.probe_occupancy == 0]
            passed += stats.ks_2samp(occ, empty).pvalue > 0.01
        assert passed >= 19  # one chance failure allowed across 20 independent seeds

    def test_joint_resonance_ratio(self, paper_budget):
        sys = coupled(paper_budget, 5.0, 0.0)
        cfg = TraceConfig(duration=100.0, seed=6)
        flux = 1e6
        seq = alternating_sequence(cfg, 1e-3, 1e-3, sys, 0.0, probe_flux=flux)
        bg = cfg.background_rate * 1e-3
        occ = seq.probe.counts[seq.probe_occupancy == 1] - bg
        empty = seq.probe.counts[seq.probe_occupancy == 0] - bg
        ratio = occ.mean() / empty.mean()
        sigma = ratio * math.hypot(occ.std() / occ.mean() / math.sqrt(occ.size),
                                   empty.std() / empty.mean() / math.sqrt(empty.size))
        c0 = sys.coupling_g0 ** 2 / (2 * sys.cavity_decay_kappa * GAMMA)
        expected = (1 + 2 * c0) ** -2
        assert expected == pytest.approx(0.73, abs=0.01)
        assert abs(ratio - expected) < 3 * sigma

    def test_cooling_marks_presence(self, paper_budget):
        cfg = TraceConfig(duration=20.0, seed=7)
        seq = alternating_sequence(cfg, 1e-3, 1e-3, coupled(paper_budget, 5.0, 0.0), 0.0)
        full = seq.cool.counts[seq.cool_occupancy == 1]
        none = seq.cool.counts[seq.cool_occupancy == 0]
        assert full.mean() > none.mean() + 5 * math.sqrt(none.mean())

    def test_rejects_bad_windows(self, paper_budget):
        with pytest.raises(InputError):
            alternating_sequence(TraceConfig(), 0.0, 1e-3, CoupledSystem(0.0, 1.0, 0.5, GAMMA), 0.0)

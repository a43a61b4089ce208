"""Photon-counting telegraph traces: simulation, event detection, survival runs.

Random numbers come from numpy's PCG64. A run seeded with ``seed`` uses the
``SeedSequence(seed)`` children as independent streams: in
:func:`simulate_trace` child 0 drives atom arrivals/dwells and child 1 the
photon counts; in :func:`survival_experiment` child ``k`` serves the k-th
delay; in :func:`alternating_sequence` child 0 is occupancy, 1 probe counts,
2 cooling counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DataError, InputError
from .spectra import CoupledSystem, transmission


@dataclass(frozen=True)
class TraceConfig:
    """Rates in counts/s or events/s, times in seconds.

    The default rates are synthetic: a 1 ms bin gives about 2 background
    counts and 50 with an atom in the trap, two well separated count modes.
    """

    background_rate: float = 2.0e3
    atom_rate: float = 5.0e4
    bin_width: float = 1.0e-3
    duration: float = 10.0
    loading_rate: float = 1.0
    lifetime_t0: float = 0.230
    seed: int = 0

    def __post_init__(self):
        if self.background_rate < 0:
            raise InputError("background rate must be >= 0")
        if not self.atom_rate > self.background_rate:
            raise InputError("atom rate must exceed the background rate")
        if not (self.bin_width > 0 and self.duration > 0 and self.lifetime_t0 > 0):
            raise InputError("bin width, duration and lifetime must be positive")
        if self.loading_rate < 0:
            raise InputError("loading rate must be >= 0")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InputError("seed must be an unsigned 64-bit integer")

    @property
    def n_bins(self) -> int:
        return int(round(self.duration / self.bin_width))


@dataclass(frozen=True)
class PhotonTrace:
    counts: np.ndarray
    bin_width: float
    truth_intervals: list | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1:
            raise DataError("counts must be one-dimensional")
        if counts.size and (not np.issubdtype(counts.dtype, np.integer) or counts.min() < 0):
            raise DataError("counts must be non-negative integers")
        object.__setattr__(self, "counts", counts.astype(np.int64))
        if not self.bin_width > 0:
            raise DataError("bin width must be positive")
        if self.truth_intervals is not None:
            prev_end = -math.inf
            for start, end in self.truth_intervals:
                if not (prev_end <= start <= end):
                    raise DataError("truth intervals must be ordered and non-overlapping")
                prev_end = end

    @property
    def duration(self) -> float:
        return self.counts.size * self.bin_width

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.counts.size) * self.bin_width


def _streams(seed, n):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(int(seed)).spawn(n)]


def occupancy_intervals(loading_rate, lifetime, duration, rng):
    """Alternating renewal process with at most one atom in the trap.

    The trap starts empty; waits are exponential with rate ``loading_rate``
    and dwells exponential with mean ``lifetime``. The last interval is cut at
    ``duration``.
    """
    intervals = []
    if loading_rate <= 0:
        return intervals
    t = 0.0
    while True:
        t += rng.exponential(1.0 / loading_rate)
        if t >= duration:
            return intervals
        end = t + rng.exponential(lifetime)
        intervals.append((t, min(end, duration)))
        if end >= duration:
            return intervals
        t = end


def occupied_fraction(intervals, edges):
    """Fraction of each bin [edges[i], edges[i+1]) covered by ``intervals``."""
    edges = np.asarray(edges, dtype=float)
    if not intervals:
        return np.zeros(edges.size - 1)
    starts = np.array([a for a, _ in intervals])
    ends = np.array([b for _, b in intervals])
    # covered(t) = occupied time in [0, t]
    lengths = np.concatenate(([0.0], np.cumsum(ends - starts)))

    def covered(t):
        k = np.searchsorted(starts, t, side="right")  # intervals starting at or before t
        full = lengths[np.maximum(k - 1, 0)]
        partial = np.where(k > 0, np.clip(t - starts[np.maximum(k - 1, 0)], 0.0,
                                          (ends - starts)[np.maximum(k - 1, 0)]), 0.0)
        return np.where(k > 0, full + partial, 0.0)

    widths = np.diff(edges)
    return np.clip((covered(edges[1:]) - covered(edges[:-1])) / widths, 0.0, 1.0)


def simulate_trace(cfg: TraceConfig) -> PhotonTrace:
    """Telegraph-like photon counts from randomly loaded single atoms.

    A bin straddling an arrival or loss mixes the two rates in proportion to
    the occupied time.
    """
    occupancy_rng, count_rng = _streams(cfg.seed, 2)
    n = cfg.n_bins
    intervals = occupancy_intervals(cfg.loading_rate, cfg.lifetime_t0, n * cfg.bin_width, occupancy_rng)
    frac = occupied_fraction(intervals, np.arange(n + 1) * cfg.bin_width)
    mean = cfg.bin_width * (cfg.background_rate + (cfg.atom_rate - cfg.background_rate) * frac)
    counts = count_rng.poisson(mean)
    return PhotonTrace(counts, cfg.bin_width, intervals)


def estimate_background(counts):
    """Background counts per bin.

    Starts from the 10%-trimmed mean of the lowest quartile of bins (which
    stays in the background even when an atom is present most of the time),
    then removes the downward bias of that selection by re-averaging all bins
    within 3 sqrt(mu) of the estimate until it settles.
    """
    counts = np.asarray(counts, dtype=float)
    ordered = np.sort(counts)
    quartile = ordered[: max(1, ordered.size // 4)]
    mu = float(stats.trim_mean(quartile, 0.1))
    for _ in range(100):
        keep = counts[counts <= mu + 3.0 * math.sqrt(max(mu, 1.0))]
        new = float(keep.mean())
        if new == mu:
            break
        mu = new
    return mu


def detect_events(trace: PhotonTrace, threshold_sigma=5.0, min_bins=2, exit_sigma=None):
    """Find atom-present intervals with a persistence (hysteresis) detector.

    An atom is declared present once ``min_bins`` consecutive bins exceed
    ``mu + threshold_sigma * sqrt(mu)``, and absent again once ``min_bins``
    consecutive bins fall to or below ``mu + exit_sigma * sqrt(mu)``
    (``exit_sigma`` defaults to ``threshold_sigma``). The interval runs from
    the first bin of the entering run to the first bin of the leaving run.

    Returns:
        list of ``(start, end)`` in seconds.
    """
    counts = trace.counts
    if counts.size == 0:
        raise DataError("empty trace")
    if np.all(counts == counts[0]):
        raise DataError("all bins identical; no background estimate possible")
    if min_bins < 1:
        raise InputError("min_bins must be >= 1")
    exit_sigma = threshold_sigma if exit_sigma is None else exit_sigma
    mu = estimate_background(counts)
    enter_level = mu + threshold_sigma * math.sqrt(mu)
    leave_level = mu + exit_sigma * math.sqrt(mu)

    above = counts > enter_level
    below = counts <= leave_level
    events = []
    present = False
    start = 0
    i = 0
    n = counts.size
    # walk run by run; runs are long compared to single bins in practice
    while i < n:
        flags = below if present else above
        if flags[i]:
            j = i
            while j < n and flags[j]:
                j += 1
            if j - i >= min_bins:
                if present:
                    events.append((start, i))
                else:
                    start = i
                present = not present
            i = j
        else:
            nxt = np.flatnonzero(flags[i:])
            i = n if nxt.size == 0 else i + int(nxt[0])
    if present:
        events.append((start, n))
    return [(a * trace.bin_width, b * trace.bin_width) for a, b in events]


def match_events(detected, truth, tolerance):
    """One-to-one matching of intervals by overlap.

    Returns ``(n_matched, n_within_tolerance)`` where the second counts matches
    whose both boundaries lie within ``tolerance``.
    """
    used = set()
    matched = within = 0
    for a, b in truth:
        for k, (c, d) in enumerate(detected):
            if k in used or min(b, d) <= max(a, c):
                continue
            used.add(k)
            matched += 1
            within += abs(c - a) <= tolerance and abs(d - b) <= tolerance
            break
    return matched, within


def survival_experiment(cfg: TraceConfig, tau_list, trials_per_tau):
    """Simulated release-and-recapture survival runs.

    Each trial draws an exponential dwell with mean ``cfg.lifetime_t0``; the
    atom survives a delay ``tau`` if the dwell is longer.

    Returns:
        list of ``(tau, survived, trials)``.
    """
    if trials_per_tau < 1:
        raise InputError("trials_per_tau must be >= 1")
    taus = [float(t) for t in tau_list]
    out = []
    for tau, rng in zip(taus, _streams(cfg.seed, len(taus))):
        dwell = rng.exponential(cfg.lifetime_t0, size=int(trials_per_tau))
        out.append((tau, int(np.count_nonzero(dwell > tau)), int(trials_per_tau)))
    return out


@dataclass(frozen=True)
class AlternatingTraces:
    """Interleaved probe and cooling windows.

    Window ``k`` of the probe trace starts at ``k * period`` and window ``k``
    of the cooling trace at ``k * period + probe.bin_width``.
    """

    probe: PhotonTrace
    cool: PhotonTrace
    period: float
    probe_occupancy: np.ndarray
    cool_occupancy: np.ndarray


def alternating_sequence(cfg: TraceConfig, probe_time, cool_time, sys: CoupledSystem, probe_omega,
                         probe_flux=1.0e6) -> AlternatingTraces:
    """Alternate probe and cooling windows over ``cfg.duration``.

    During probing the count rate is ``background + probe_flux * T`` with T
    the coupled transmission while an atom is present and the empty-cavity
    transmission otherwise. Cooling windows report fluorescence at
    ``atom_rate`` / ``background_rate`` and serve as the presence check.
    """
    if not (probe_time > 0 and cool_time > 0):
        raise InputError("window durations must be positive")
    occupancy_rng, probe_rng, cool_rng = _streams(cfg.seed, 3)
    period = probe_time + cool_time
    n = int(round(cfg.duration / period))
    intervals = occupancy_intervals(cfg.loading_rate, cfg.lifetime_t0, n * period, occupancy_rng)
    starts = np.arange(n) * period
    probe_frac = occupied_fraction(intervals, np.column_stack((starts, starts + probe_time)).ravel())[::2]
    cool_frac = occupied_fraction(intervals, np.column_stack((starts + probe_time, starts + period)).ravel())[::2]

    t_atom = transmission(sys, probe_omega)
    t_empty = transmission(sys.empty(), probe_omega)
    probe_mean = probe_time * (cfg.background_rate + probe_flux * (t_empty + (t_atom - t_empty) * probe_frac))
    cool_mean = cool_time * (cfg.background_rate + (cfg.atom_rate - cfg.background_rate) * cool_frac)
    probe = PhotonTrace(probe_rng.poisson(probe_mean), probe_time, intervals)
    cool = PhotonTrace(cool_rng.poisson(cool_mean), cool_time, intervals)
    return AlternatingTraces(probe, cool, period, probe_frac, cool_frac)

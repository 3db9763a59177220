"""Phase-amplitude coupling: modulation index, surrogates, comodulograms.

The coupling strength of a (slow phase, fast amplitude) pair is the KL
divergence of the phase-binned mean-amplitude distribution from uniform,
normalized by log(n_bins) so it lives in [0, 1].  Significance comes from
cyclic-permutation surrogates: circularly shifting the amplitude series
destroys any phase locking while preserving both spectra.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    EmptySelection,
    InsufficientCoverage,
    SignalTooShort,
)
from .preprocess import band_pass
from .spectral import ROI_ORDER, analytic_signal
from .validation import as_float_series

DEFAULT_N_BINS = 18
DEFAULT_N_SURROGATES = 200
DEFAULT_TRIM_FRACTION = 0.1

DEFAULT_PHASE_FREQS = np.linspace(0.5, 10.0, 10)
DEFAULT_AMP_FREQS = np.linspace(11.0, 30.0, 10)
DEFAULT_PHASE_HALF_WIDTH = 1.0
DEFAULT_AMP_HALF_WIDTH = 2.5
# A phase band's lower edge never drops below this, whatever the center.
PHASE_BAND_FLOOR_HZ = 0.25

DELTA_BAND = (0.5, 4.0)
BETA_BAND = (11.0, 30.0)


@dataclass
class PhaseBinning:
    """Partition of the phase circle into equal bins; bin 0 starts at -180 deg."""

    n_bins: int = DEFAULT_N_BINS

    def __post_init__(self):
        if not (isinstance(self.n_bins, (int, np.integer)) and self.n_bins >= 2):
            raise DomainError(f"n_bins must be an integer >= 2, got {self.n_bins}")

    @property
    def width_degrees(self):
        return 360.0 / self.n_bins

    @property
    def width_radians(self):
        return 2.0 * np.pi / self.n_bins

    def edges_degrees(self):
        return np.linspace(-180.0, 180.0, self.n_bins + 1)


def bin_indices(phase, binning=None):
    """Bin index in [0, n_bins) for each phase sample (radians, any range)."""
    binning = binning or PhaseBinning()
    phase = as_float_series(phase, name="phase")
    wrapped = np.mod(phase + np.pi, 2.0 * np.pi)
    idx = np.floor_divide(wrapped, binning.width_radians).astype(np.intp)
    return np.minimum(idx, binning.n_bins - 1)


@dataclass
class AmplitudeDistribution:
    """Normalized mean amplitude per phase bin."""

    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.ndim != 1:
            raise DomainError("p must be a 1-D vector")
        if np.any(self.p < 0):
            raise DomainError("p entries must be nonnegative")
        if abs(self.p.sum() - 1.0) > 1e-12:
            raise DomainError(f"p must sum to 1 within 1e-12, got {self.p.sum()!r}")

    @property
    def n_bins(self):
        return len(self.p)


def amplitude_distribution(phase, amplitude, binning=None):
    """Mean amplitude in each phase bin, normalized to sum 1.

    Every bin must receive at least one phase sample, otherwise the phase
    series is too short or degenerate to support the distribution.
    """
    binning = binning or PhaseBinning()
    phase = as_float_series(phase, name="phase")
    amplitude = as_float_series(amplitude, name="amplitude")
    if len(phase) != len(amplitude):
        raise DomainError(
            f"phase and amplitude lengths differ: {len(phase)} vs {len(amplitude)}"
        )
    if np.any(amplitude < 0):
        raise DomainError("amplitude envelope must be nonnegative")
    idx = bin_indices(phase, binning)
    counts = np.bincount(idx, minlength=binning.n_bins)
    if np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        raise InsufficientCoverage(
            f"phase bin {empty} received no samples ({len(phase)} samples over "
            f"{binning.n_bins} bins)"
        )
    sums = np.bincount(idx, weights=amplitude, minlength=binning.n_bins)
    means = sums / counts
    total = means.sum()
    if total <= 0:
        raise DomainError("amplitude is identically zero; distribution undefined")
    return AmplitudeDistribution(p=means / total)


def _mi_from_p(p):
    n = len(p)
    pos = p[p > 0]
    mi = float(np.sum(pos * np.log(pos * n)) / np.log(n))
    return min(max(mi, 0.0), 1.0)


def modulation_index(p):
    """KL divergence from uniform over the bins, normalized by log(n_bins).

    0 for a uniform distribution, 1 for a one-hot distribution; the
    0*log(0) terms are dropped (standard entropy convention).
    """
    if not isinstance(p, AmplitudeDistribution):
        p = AmplitudeDistribution(p=p)
    return _mi_from_p(p.p)


def _rng_from(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed))


def infer_min_shift(phase):
    """Samples per slowest phase cycle, from the unwrapped phase excursion."""
    unwrapped = np.unwrap(np.asarray(phase, dtype=np.float64))
    cycles = abs(unwrapped[-1] - unwrapped[0]) / (2.0 * np.pi)
    if cycles < 1.0:
        raise SignalTooShort("phase series completes less than one cycle")
    return int(np.ceil(len(phase) / cycles))


def surrogate_mi(phase, amplitude, binning=None, r=DEFAULT_N_SURROGATES, seed=0,
                 min_shift=None):
    """Observed MI against a cyclic-permutation null.

    Each surrogate circularly shifts the amplitude series by a uniform
    random offset in [min_shift, L - min_shift]; the guard band of one
    slowest-cycle length keeps residual coupling out of the null.  Returns
    (observed_mi, surrogate_mi_array, empirical_p) with
    p = (1 + #{surrogate >= observed}) / (r + 1).
    """
    binning = binning or PhaseBinning()
    phase = as_float_series(phase, name="phase")
    amplitude = as_float_series(amplitude, name="amplitude")
    if len(phase) != len(amplitude):
        raise DomainError(
            f"phase and amplitude lengths differ: {len(phase)} vs {len(amplitude)}"
        )
    if r < 1:
        raise DomainError(f"surrogate count must be >= 1, got {r}")
    length = len(phase)
    if min_shift is None:
        min_shift = infer_min_shift(phase)
    if min_shift < 1:
        raise DomainError(f"min_shift must be >= 1, got {min_shift}")
    if length < 10 * min_shift:
        raise SignalTooShort(
            f"need >= 10 slowest cycles: length {length} < 10 x {min_shift}"
        )

    idx = bin_indices(phase, binning)
    counts = np.bincount(idx, minlength=binning.n_bins)
    if np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        raise InsufficientCoverage(f"phase bin {empty} received no samples")

    def mi_of(amp):
        sums = np.bincount(idx, weights=amp, minlength=binning.n_bins)
        means = sums / counts
        total = means.sum()
        if total <= 0:
            raise DomainError("amplitude is identically zero; MI undefined")
        return _mi_from_p(means / total)

    observed = mi_of(amplitude)
    rng = _rng_from(seed)
    offsets = rng.integers(min_shift, length - min_shift + 1, size=r)
    surrogates = np.array([mi_of(np.roll(amplitude, int(off))) for off in offsets])
    p = (1.0 + int(np.sum(surrogates >= observed))) / (r + 1.0)
    return observed, surrogates, p


@dataclass
class Comodulogram:
    """MI and surrogate p over a (phase frequency x amplitude frequency) grid."""

    phase_freqs: np.ndarray
    amp_freqs: np.ndarray
    mi: np.ndarray
    surrogate_p: np.ndarray = field(default=None)

    def __post_init__(self):
        self.phase_freqs = np.asarray(self.phase_freqs, dtype=np.float64)
        self.amp_freqs = np.asarray(self.amp_freqs, dtype=np.float64)
        self.mi = np.asarray(self.mi, dtype=np.float64)
        shape = (len(self.phase_freqs), len(self.amp_freqs))
        if self.mi.shape != shape:
            raise DomainError(f"mi must be {shape}, got {self.mi.shape}")
        if np.any(self.mi < 0) or np.any(self.mi > 1):
            raise DomainError("mi entries must lie in [0, 1]")
        if self.surrogate_p is not None:
            self.surrogate_p = np.asarray(self.surrogate_p, dtype=np.float64)
            if self.surrogate_p.shape != shape:
                raise DomainError(f"surrogate_p must be {shape}")
            if np.any(self.surrogate_p <= 0) or np.any(self.surrogate_p > 1):
                raise DomainError("surrogate_p entries must lie in (0, 1]")


def phase_band(center, half_width=DEFAULT_PHASE_HALF_WIDTH):
    return (max(center - half_width, PHASE_BAND_FLOOR_HZ), center + half_width)


def amp_band(center, half_width=DEFAULT_AMP_HALF_WIDTH):
    return (center - half_width, center + half_width)


def _trim(x, fraction):
    t = int(round(len(x) * fraction))
    return x[t:len(x) - t] if t > 0 else x


def comodulogram(phase_source, amp_source=None, fs=None,
                 phase_freqs=None, amp_freqs=None,
                 phase_half_width=DEFAULT_PHASE_HALF_WIDTH,
                 amp_half_width=DEFAULT_AMP_HALF_WIDTH,
                 binning=None, r=DEFAULT_N_SURROGATES, seed=0,
                 trim_fraction=DEFAULT_TRIM_FRACTION, n_jobs=1):
    """MI grid over all (phase frequency, amplitude frequency) cells.

    Phase comes from ``phase_source`` band-passed around each phase center,
    amplitude from ``amp_source`` (defaults to the same series) around each
    amplitude center; both analytic-signal edges are trimmed before binning.
    Surrogate p-values use a per-cell RNG derived from (seed, row, column),
    so serial and parallel runs produce bit-identical grids.
    """
    if fs is None:
        raise DomainError("fs is required")
    phase_source = as_float_series(phase_source, name="phase_source")
    amp_source = phase_source if amp_source is None else as_float_series(
        amp_source, name="amp_source")
    if len(phase_source) != len(amp_source):
        raise DomainError("phase and amplitude sources must share length")
    if not 0 <= trim_fraction < 0.5:
        raise DomainError(f"trim_fraction must be in [0, 0.5), got {trim_fraction}")
    phase_freqs = DEFAULT_PHASE_FREQS if phase_freqs is None else np.asarray(
        phase_freqs, dtype=np.float64)
    amp_freqs = DEFAULT_AMP_FREQS if amp_freqs is None else np.asarray(
        amp_freqs, dtype=np.float64)
    if phase_freqs.max() >= amp_freqs.min():
        raise DomainError(
            f"phase centers must lie below amplitude centers "
            f"({phase_freqs.max()} >= {amp_freqs.min()})"
        )
    binning = binning or PhaseBinning()

    phases = []
    for pc in phase_freqs:
        low, high = phase_band(pc, phase_half_width)
        filtered = band_pass(phase_source, fs, low, high)
        phases.append(_trim(np.angle(analytic_signal(filtered)), trim_fraction))
    amps = []
    for ac in amp_freqs:
        low, high = amp_band(ac, amp_half_width)
        filtered = band_pass(amp_source, fs, low, high)
        amps.append(_trim(np.abs(analytic_signal(filtered)), trim_fraction))

    root = seed if isinstance(seed, (int, np.integer)) else 0

    def cell(task):
        i, j = task
        obs, _, p = surrogate_mi(
            phases[i], amps[j], binning=binning, r=r,
            seed=np.random.SeedSequence([int(root), i, j]),
        )
        return i, j, obs, p

    tasks = [(i, j) for i in range(len(phase_freqs)) for j in range(len(amp_freqs))]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(cell, tasks))
    else:
        results = [cell(t) for t in tasks]

    mi = np.zeros((len(phase_freqs), len(amp_freqs)))
    sp = np.zeros_like(mi)
    for i, j, obs, p in results:
        mi[i, j] = obs
        sp[i, j] = p
    return Comodulogram(phase_freqs=phase_freqs, amp_freqs=amp_freqs, mi=mi,
                        surrogate_p=sp)


def pac_pair_names():
    """Row-major names of the 25 ordered (phase ROI, amplitude ROI) pairs."""
    return [f"pac_{p}_{a}" for p in ROI_ORDER for a in ROI_ORDER]


def delta_beta_pair_mi(roi_signals, fs, phase_band_edges=DELTA_BAND,
                       amp_band_edges=BETA_BAND,
                       trim_fraction=DEFAULT_TRIM_FRACTION, binning=None):
    """MI for every ordered (phase ROI, amplitude ROI) pair of regional signals.

    ``roi_signals`` is (n_rois, time); row i gives both the slow-phase and
    fast-amplitude source for region i.  Entry [i, j] couples region i's
    slow phase with region j's fast amplitude.
    """
    from .validation import as_float_matrix

    roi_signals = as_float_matrix(roi_signals, name="roi_signals")
    binning = binning or PhaseBinning()
    n = roi_signals.shape[0]
    phases = []
    amps = []
    for i in range(n):
        slow = band_pass(roi_signals[i], fs, *phase_band_edges)
        fast = band_pass(roi_signals[i], fs, *amp_band_edges)
        phases.append(_trim(np.angle(analytic_signal(slow)), trim_fraction))
        amps.append(_trim(np.abs(analytic_signal(fast)), trim_fraction))
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = modulation_index(
                amplitude_distribution(phases[i], amps[j], binning))
    return out


def delta_beta_pac_features(pair_mi, mask):
    """Project the significant (phase ROI, amplitude ROI) pairs to a vector.

    ``pair_mi`` is (n_rois, n_rois) or (n_epochs, n_rois, n_rois); epoch
    matrices are averaged first.  ``mask`` is a boolean matrix of the same
    grid; selected values come out in row-major order.
    """
    pair_mi = np.asarray(pair_mi, dtype=np.float64)
    if pair_mi.ndim == 3:
        pair_mi = pair_mi.mean(axis=0)
    if pair_mi.ndim != 2:
        raise DomainError("pair_mi must be 2-D or 3-D")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != pair_mi.shape:
        raise DomainError(f"mask shape {mask.shape} != pair grid {pair_mi.shape}")
    if not mask.any():
        raise EmptySelection("no (phase ROI, amplitude ROI) pairs selected")
    return pair_mi[mask]

"""Spectral power features: Kaiser-windowed PSD, frequency bands, ROI averages.

Band edges follow the half-open convention [low, high); only the band whose
upper edge equals the overall analysis ceiling keeps that edge inclusive, so
the bands tile [0.5, 30] Hz exactly once.
"""

import numpy as np
from scipy import signal as _signal

from .errors import DomainError, EmptyRoi, SignalTooShort
from .validation import as_float_matrix, as_float_series

ROI_ORDER = ("frontal", "central", "temporal", "parietal", "occipital")

# (name, low_hz, high_hz)
BANDS = (
    ("delta", 0.5, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 11.0),
    ("beta", 11.0, 30.0),
)

DEFAULT_WINDOW_SECONDS = 2.0
DEFAULT_OVERLAP = 0.99
DEFAULT_KAISER_BETA = 8.0
ANALYSIS_FMIN = 0.5
ANALYSIS_FMAX = 30.0

_PREFIX_ROI = {"FP": "frontal", "AF": "frontal", "F": "frontal", "C": "central",
               "T": "temporal", "P": "parietal", "O": "occipital"}


def roi_of_channel(label):
    """ROI name for a 10-20 style channel label, or None if unmappable.

    Two-letter frontal prefixes (Fp, AF) are checked before the
    single-letter rule, so compound sites like FC5 fall to the first letter.
    """
    name = str(label).strip().upper()
    if not name:
        return None
    for prefix in ("FP", "AF"):
        if name.startswith(prefix):
            return _PREFIX_ROI[prefix]
    return _PREFIX_ROI.get(name[0])


def roi_channel_indices(channel_labels):
    """Map each ROI to the channel indices it owns; unmapped labels are skipped."""
    out = {roi: [] for roi in ROI_ORDER}
    for i, label in enumerate(channel_labels):
        roi = roi_of_channel(label)
        if roi is not None:
            out[roi].append(i)
    return out


def power_spectral_density(x, fs, window_seconds=DEFAULT_WINDOW_SECONDS,
                           overlap=DEFAULT_OVERLAP, beta=DEFAULT_KAISER_BETA,
                           fmin=ANALYSIS_FMIN, fmax=ANALYSIS_FMAX):
    """Averaged one-sided periodogram over heavily overlapped Kaiser windows.

    Returns (freqs, psd) restricted to [fmin, fmax].  ``x`` may be 1-D or
    (channels, time); psd then has a leading channel axis.
    """
    x = as_float_series(x) if np.ndim(x) == 1 else as_float_matrix(x)
    if not 0 <= overlap < 1:
        raise DomainError(f"overlap must be in [0, 1), got {overlap}")
    win_len = int(round(window_seconds * fs))
    if win_len < 2:
        raise DomainError(f"window of {window_seconds} s at {fs} Hz is too short")
    if x.shape[-1] < win_len:
        raise SignalTooShort(
            f"signal length {x.shape[-1]} is shorter than one window ({win_len})"
        )
    hop = max(1, int(round(win_len * (1.0 - overlap))))
    window = np.kaiser(win_len, beta)

    frames = np.lib.stride_tricks.sliding_window_view(x, win_len, axis=-1)[..., ::hop, :]
    spectra = np.fft.rfft(frames * window, axis=-1)
    psd = (spectra.real**2 + spectra.imag**2) / (fs * np.sum(window**2))
    # One-sided correction: every bin except DC (and Nyquist for even lengths)
    # also carries its negative-frequency twin.
    psd[..., 1:] *= 2.0
    if win_len % 2 == 0:
        psd[..., -1] /= 2.0
    psd = psd.mean(axis=-2)

    freqs = np.fft.rfftfreq(win_len, d=1.0 / fs)
    keep = (freqs >= fmin) & (freqs <= fmax)
    if not np.any(keep):
        raise DomainError(f"no FFT bins inside [{fmin}, {fmax}] Hz")
    return freqs[keep], psd[..., keep]


def band_mask(freqs, low, high, ceiling=ANALYSIS_FMAX):
    """Boolean bin selector for [low, high), upper-inclusive when high == ceiling."""
    if high == ceiling:
        return (freqs >= low) & (freqs <= high)
    return (freqs >= low) & (freqs < high)


def band_power(freqs, psd, low, high, ceiling=ANALYSIS_FMAX):
    """Integrated PSD over one band (rectangle rule on the FFT grid)."""
    freqs = np.asarray(freqs, dtype=np.float64)
    if len(freqs) < 2:
        raise DomainError("need at least two frequency bins")
    df = freqs[1] - freqs[0]
    mask = band_mask(freqs, low, high, ceiling)
    if not np.any(mask):
        raise DomainError(f"band [{low}, {high}) Hz contains no FFT bins")
    return np.asarray(psd)[..., mask].sum(axis=-1) * df


def band_feature_names():
    """Feature labels in ROI-major order: frontal_delta, frontal_theta, ..."""
    return [f"{roi}_{band}" for roi in ROI_ORDER for band, _, _ in BANDS]


def band_power_features(rec, window_seconds=DEFAULT_WINDOW_SECONDS,
                        overlap=DEFAULT_OVERLAP, beta=DEFAULT_KAISER_BETA):
    """20-dimensional band-power vector: 5 ROIs x 4 bands, ROI-major.

    Per-channel band powers are averaged over each ROI's channels.  Every
    ROI must own at least one channel.
    """
    rois = roi_channel_indices(rec.channel_labels)
    for roi in ROI_ORDER:
        if not rois[roi]:
            raise EmptyRoi(f"no channels map to ROI {roi!r}")
    freqs, psd = power_spectral_density(rec.samples, rec.sample_rate,
                                        window_seconds=window_seconds,
                                        overlap=overlap, beta=beta)
    per_channel = np.stack(
        [band_power(freqs, psd, low, high) for _, low, high in BANDS], axis=-1
    )  # (channels, 4)
    features = np.empty(len(ROI_ORDER) * len(BANDS), dtype=np.float64)
    for r, roi in enumerate(ROI_ORDER):
        features[r * len(BANDS):(r + 1) * len(BANDS)] = per_channel[rois[roi]].mean(axis=0)
    return features


MIN_ANALYTIC_LENGTH = 16


def analytic_signal(x):
    """Analytic signal via the Hilbert transform; input must be real 1-D."""
    x = as_float_series(x)
    if len(x) < MIN_ANALYTIC_LENGTH:
        raise SignalTooShort(
            f"analytic signal needs >= {MIN_ANALYTIC_LENGTH} samples, got {len(x)}"
        )
    return _signal.hilbert(x)


def instantaneous_phase(x):
    """Phase of the analytic signal, in (-pi, pi]."""
    return np.angle(analytic_signal(x))


def instantaneous_amplitude(x):
    """Envelope (magnitude of the analytic signal)."""
    return np.abs(analytic_signal(x))

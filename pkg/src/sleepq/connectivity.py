"""Weighted phase lag index: channel pairs, ROI matrices, 60-dim feature vectors.

The estimator is the imaginary cross-spectrum ratio over an ensemble of
segments: the per-segment cross-spectrum is averaged over the band's FFT
bins first, then wPLI = |mean_s Im(Sxy_s)| / mean_s |Im(Sxy_s)|.  Zero-lag
(volume-conducted) coupling contributes nothing to the imaginary part, so
the estimate decays toward 0 with ensemble size for instantaneous mixtures.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyRoi, InsufficientData
from .preprocess import band_pass
from .spectral import (
    ANALYSIS_FMAX,
    BANDS,
    DEFAULT_KAISER_BETA,
    ROI_ORDER,
    band_mask,
    roi_channel_indices,
)
from .validation import as_float_matrix, as_float_series

MIN_SEGMENTS = 8
DEFAULT_WINDOW_SECONDS = 30.0

# Upper triangle of the 5x5 ROI grid, diagonal included, row-major:
# 10 cross-ROI pairs + 5 within-ROI values = 15 unique connections.
CONNECTION_PAIRS = tuple(
    (i, j) for i in range(len(ROI_ORDER)) for j in range(i, len(ROI_ORDER))
)


def connection_names():
    return [f"{ROI_ORDER[i]}-{ROI_ORDER[j]}" for i, j in CONNECTION_PAIRS]


def wpli_feature_names():
    return [f"{conn}_{band}" for conn in connection_names() for band, _, _ in BANDS]


def sliding_ensemble(n_samples, fs, window_seconds=DEFAULT_WINDOW_SECONDS):
    """Non-overlapping (start, stop) windows covering the first floor(T/w) windows."""
    win = int(round(window_seconds * fs))
    if win < 2:
        raise DomainError(f"window of {window_seconds} s at {fs} Hz is too short")
    return [(k * win, (k + 1) * win) for k in range(n_samples // win)]


def _check_ensemble(ensemble, n_samples):
    if len(ensemble) < MIN_SEGMENTS:
        raise InsufficientData(
            f"need >= {MIN_SEGMENTS} ensemble segments, got {len(ensemble)}"
        )
    lengths = {int(stop) - int(start) for start, stop in ensemble}
    if len(lengths) != 1:
        raise DomainError("ensemble segments must share one length")
    length = lengths.pop()
    if length < 2:
        raise DomainError("ensemble segments must hold at least 2 samples")
    for start, stop in ensemble:
        if start < 0 or stop > n_samples:
            raise DomainError(f"segment ({start}, {stop}) outside signal of {n_samples}")
    return length


def _band_bins(seg_len, fs, band):
    freqs = np.fft.rfftfreq(seg_len, d=1.0 / fs)
    mask = band_mask(freqs, band[0], band[1], ceiling=max(band[1], ANALYSIS_FMAX))
    if not np.any(mask):
        raise DomainError(
            f"band {band} Hz has no FFT bins at segment length {seg_len} "
            f"(resolution {fs / seg_len:.3g} Hz)"
        )
    return mask


def _segment_spectra(samples, ensemble, seg_len, fs, band, beta):
    """Tapered rfft of every (channel, segment), restricted to the band bins."""
    starts = np.asarray([s for s, _ in ensemble], dtype=np.intp)
    idx = starts[:, None] + np.arange(seg_len)
    frames = samples[..., idx]  # (..., n_seg, seg_len)
    window = np.kaiser(seg_len, beta)
    spectra = np.fft.rfft(frames * window, axis=-1)
    return spectra[..., _band_bins(seg_len, fs, band)]


def _wpli_from_band_means(z):
    """wPLI of per-segment band-averaged cross-spectra; 0 when Im vanishes.

    "Vanishes" is judged relative to the cross-spectrum magnitude: an
    instantaneous (zero-lag) pair leaves only multiply rounding noise in
    the imaginary part, which must read as a zero denominator, not as data.
    """
    im = z.imag
    denom = np.abs(im).mean(axis=-1)
    num = np.abs(im.mean(axis=-1))
    scale = np.abs(z).mean(axis=-1)
    valid = denom > 1e-12 * scale
    return np.divide(num, denom, out=np.zeros_like(denom), where=valid)


def wpli_pair(x, y, fs, band, ensemble):
    """wPLI between two series over an ensemble of (start, stop) segments.

    Both series should already be band-limited (the FFT band selection
    isolates the band, but out-of-band energy inflates segment leakage).
    """
    x = as_float_series(x, name="x")
    y = as_float_series(y, name="y")
    if len(x) != len(y):
        raise DomainError(f"series lengths differ: {len(x)} vs {len(y)}")
    seg_len = _check_ensemble(ensemble, len(x))
    spectra = _segment_spectra(np.stack([x, y]), ensemble, seg_len, fs, band,
                               DEFAULT_KAISER_BETA)
    z = (spectra[0] * np.conj(spectra[1])).mean(axis=-1)
    return float(_wpli_from_band_means(z))


@dataclass
class ConnectivityMatrix:
    """5x5 symmetric ROI wPLI matrix for one band, plus its 15 unique connections."""

    band: str
    roi_matrix: np.ndarray
    unique_connections: np.ndarray

    def __post_init__(self):
        self.roi_matrix = np.asarray(self.roi_matrix, dtype=np.float64)
        self.unique_connections = np.asarray(self.unique_connections, dtype=np.float64)
        n = len(ROI_ORDER)
        if self.roi_matrix.shape != (n, n):
            raise DomainError(f"roi_matrix must be {n}x{n}, got {self.roi_matrix.shape}")
        if not np.allclose(self.roi_matrix, self.roi_matrix.T, atol=1e-12):
            raise DomainError("roi_matrix must be symmetric")
        if np.any(self.roi_matrix < -1e-12) or np.any(self.roi_matrix > 1 + 1e-12):
            raise DomainError("roi_matrix entries must lie in [0, 1]")
        if self.unique_connections.shape != (len(CONNECTION_PAIRS),):
            raise DomainError(
                f"expected {len(CONNECTION_PAIRS)} unique connections, "
                f"got {self.unique_connections.shape}"
            )


def wpli_matrix(rec, band, ensemble=None, window_seconds=DEFAULT_WINDOW_SECONDS,
                rois=None):
    """ROI-level wPLI matrix for one band of a Recording.

    Channel-by-channel wPLI is averaged over channel pairs within each ROI
    pair; within-ROI entries average the distinct in-ROI pairs (an ROI with
    a single channel contributes 0 there, since no pair exists).
    ``band`` is (name, low, high) or a BANDS name.
    """
    if isinstance(band, str):
        matches = [b for b in BANDS if b[0] == band]
        if not matches:
            raise DomainError(f"unknown band {band!r}")
        band = matches[0]
    band_name, low, high = band

    if rois is None:
        rois = roi_channel_indices(rec.channel_labels)
    for roi in ROI_ORDER:
        if not rois.get(roi):
            raise EmptyRoi(f"no channels map to ROI {roi!r}")

    if ensemble is None:
        ensemble = sliding_ensemble(rec.n_samples, rec.sample_rate, window_seconds)
    seg_len = _check_ensemble(ensemble, rec.n_samples)

    filtered = band_pass(rec.samples, rec.sample_rate, low, high)
    spectra = _segment_spectra(filtered, ensemble, seg_len, rec.sample_rate,
                               (low, high), DEFAULT_KAISER_BETA)

    n_ch = rec.n_channels
    pair_wpli = np.zeros((n_ch, n_ch))
    for i in range(n_ch):
        cross = (spectra[i][None, :, :] * np.conj(spectra[i + 1:])).mean(axis=-1)
        if len(cross):
            vals = _wpli_from_band_means(cross)
            pair_wpli[i, i + 1:] = vals
            pair_wpli[i + 1:, i] = vals

    n_roi = len(ROI_ORDER)
    matrix = np.zeros((n_roi, n_roi))
    for a in range(n_roi):
        for b in range(a, n_roi):
            ch_a = rois[ROI_ORDER[a]]
            ch_b = rois[ROI_ORDER[b]]
            if a == b:
                vals = [pair_wpli[i, j] for k, i in enumerate(ch_a)
                        for j in ch_a[k + 1:]]
                matrix[a, b] = float(np.mean(vals)) if vals else 0.0
            else:
                block = pair_wpli[np.ix_(ch_a, ch_b)]
                matrix[a, b] = matrix[b, a] = float(block.mean())

    connections = np.array([matrix[i, j] for i, j in CONNECTION_PAIRS])
    return ConnectivityMatrix(band=band_name, roi_matrix=matrix,
                              unique_connections=connections)


def wpli_features(rec, ensemble=None, window_seconds=DEFAULT_WINDOW_SECONDS,
                  rois=None):
    """60-dim wPLI vector: 15 connections x 4 bands, connection-major."""
    per_band = [
        wpli_matrix(rec, band, ensemble=ensemble, window_seconds=window_seconds,
                    rois=rois)
        for band in BANDS
    ]
    features = np.empty(len(CONNECTION_PAIRS) * len(BANDS), dtype=np.float64)
    for c in range(len(CONNECTION_PAIRS)):
        for b in range(len(BANDS)):
            features[c * len(BANDS) + b] = per_band[b].unique_connections[c]
    return features

"""Signal conditioning: decimation, zero-phase band-pass, channel hygiene, epochs.

The pipeline order is decimate -> band-pass -> bad-channel removal ->
average reference.  All filters are linear-phase FIR applied with exact
group-delay compensation, so filtering never shifts signal features in time.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, stats

from .errors import DomainError, InsufficientChannels, SignalTooShort, UnsupportedRate
from .validation import as_float_matrix, as_float_series

DEFAULT_TARGET_RATE = 250.0
DEFAULT_LOW_HZ = 0.5
DEFAULT_HIGH_HZ = 30.0
DEFAULT_KURTOSIS_Z = 5.0
MIN_CHANNELS_FOR_REJECTION = 4
EPOCH_SECONDS = 30.0

# MAD-to-sigma factor for a normal distribution.
_MAD_SCALE = 1.4826


def band_pass_num_taps(fs, low_hz):
    """Hamming-window tap count giving a transition width of about low_hz."""
    n = math.ceil(3.3 * fs / low_hz)
    return n if n % 2 == 1 else n + 1


def design_band_pass(fs, low_hz=DEFAULT_LOW_HZ, high_hz=DEFAULT_HIGH_HZ):
    """Linear-phase Hamming band-pass taps for [low_hz, high_hz]."""
    if not 0 < low_hz < high_hz < fs / 2:
        raise DomainError(
            f"need 0 < low < high < Nyquist, got low={low_hz}, high={high_hz}, fs={fs}"
        )
    num_taps = band_pass_num_taps(fs, low_hz)
    return signal.firwin(num_taps, [low_hz, high_hz], pass_zero=False,
                         window="hamming", fs=fs)


def _zero_phase(x, taps):
    """Apply symmetric odd-length FIR with reflect padding; no phase shift."""
    num_taps = len(taps)
    if x.shape[-1] <= num_taps:
        raise SignalTooShort(
            f"signal length {x.shape[-1]} must exceed filter length {num_taps}"
        )
    pad = [(0, 0)] * (x.ndim - 1) + [(num_taps, num_taps)]
    padded = np.pad(x, pad, mode="reflect")
    kernel = taps.reshape((1,) * (x.ndim - 1) + (num_taps,))
    out = signal.fftconvolve(padded, kernel, mode="same", axes=-1)
    return out[..., num_taps:-num_taps]


def band_pass(x, fs, low_hz=DEFAULT_LOW_HZ, high_hz=DEFAULT_HIGH_HZ):
    """Zero-phase band-pass of a 1-D signal or a (channels, time) matrix."""
    x = as_float_series(x) if np.ndim(x) == 1 else as_float_matrix(x)
    taps = design_band_pass(fs, low_hz, high_hz)
    return _zero_phase(x, taps)


def decimate(x, fs, target_rate):
    """Integer-factor downsampling with an anti-alias low-pass at 0.4*target.

    Returns (decimated, new_rate).  Non-integer rate ratios are rejected.
    """
    x = as_float_series(x) if np.ndim(x) == 1 else as_float_matrix(x)
    if target_rate <= 0:
        raise DomainError(f"target_rate must be positive, got {target_rate}")
    ratio = fs / target_rate
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9:
        raise UnsupportedRate(
            f"cannot decimate {fs} Hz to {target_rate} Hz: ratio {ratio} is not integer"
        )
    if factor == 1:
        return x.copy(), fs
    num_taps = 30 * factor + 1
    taps = signal.firwin(num_taps, 0.4 * target_rate, window="hamming", fs=fs)
    filtered = _zero_phase(x, taps)
    return filtered[..., ::factor], fs / factor


def detect_bad_channels(samples, z_thresh=DEFAULT_KURTOSIS_Z):
    """Indices of channels whose sample kurtosis is a robust outlier.

    Kurtosis values are z-scored against the channel median using the MAD;
    channels with |z| above the threshold are flagged.  Needs at least
    4 channels to define an outlier at all.
    """
    samples = as_float_matrix(samples, name="samples")
    if samples.shape[0] < MIN_CHANNELS_FOR_REJECTION:
        raise InsufficientChannels(
            f"need >= {MIN_CHANNELS_FOR_REJECTION} channels, got {samples.shape[0]}"
        )
    if z_thresh <= 0:
        raise DomainError(f"z_thresh must be positive, got {z_thresh}")
    k = stats.kurtosis(samples, axis=1, fisher=True, bias=True)
    med = np.median(k)
    mad = np.median(np.abs(k - med))
    scale = _MAD_SCALE * mad
    if scale == 0.0:
        return []
    z = (k - med) / scale
    return [int(i) for i in np.flatnonzero(np.abs(z) > z_thresh)]


def average_reference(samples):
    """Re-reference to the mean of the retained channels."""
    samples = as_float_matrix(samples, name="samples")
    if samples.shape[0] < 2:
        raise InsufficientChannels("average reference needs >= 2 channels")
    return samples - samples.mean(axis=0, keepdims=True)


def segment_epochs(samples, fs, epoch_seconds=EPOCH_SECONDS):
    """Split (channels, time) into consecutive fixed-length epochs.

    Returns an (n_epochs, channels, epoch_len) array; a trailing partial
    epoch is discarded.
    """
    samples = as_float_matrix(samples, name="samples")
    epoch_len = int(round(epoch_seconds * fs))
    if epoch_len <= 0:
        raise DomainError(f"epoch of {epoch_seconds} s at {fs} Hz is empty")
    n_epochs = samples.shape[1] // epoch_len
    if n_epochs == 0:
        raise SignalTooShort(
            f"recording of {samples.shape[1]} samples is shorter than one "
            f"{epoch_seconds} s epoch ({epoch_len} samples)"
        )
    trimmed = samples[:, : n_epochs * epoch_len]
    return trimmed.reshape(samples.shape[0], n_epochs, epoch_len).transpose(1, 0, 2)


@dataclass
class PreprocessResult:
    """Cleaned recording plus the bookkeeping the retention table needs."""

    recording: object
    bad_channels: tuple
    total_channels: int
    retention_pct: float


def preprocess_recording(rec, target_rate=DEFAULT_TARGET_RATE,
                         low_hz=DEFAULT_LOW_HZ, high_hz=DEFAULT_HIGH_HZ,
                         kurtosis_z=DEFAULT_KURTOSIS_Z):
    """Full conditioning pipeline on a Recording.

    Decimates to the target rate, band-passes, drops kurtosis-outlier
    channels, and applies an average reference over the survivors.
    """
    samples, new_rate = decimate(rec.samples, rec.sample_rate, target_rate)
    samples = band_pass(samples, new_rate, low_hz, high_hz)

    if samples.shape[0] >= MIN_CHANNELS_FOR_REJECTION:
        bad = detect_bad_channels(samples, z_thresh=kurtosis_z)
    else:
        bad = []
    keep = [i for i in range(samples.shape[0]) if i not in set(bad)]
    if len(keep) < 2:
        raise InsufficientChannels(
            f"only {len(keep)} channels survive rejection; cannot re-reference"
        )
    referenced = average_reference(samples[keep])

    cleaned = type(rec)(
        subject_id=rec.subject_id,
        sample_rate=new_rate,
        channel_labels=tuple(rec.channel_labels[i] for i in keep),
        samples=referenced,
        state_tag=rec.state_tag,
        rs_index=rec.rs_index,
    )
    return PreprocessResult(
        recording=cleaned,
        bad_channels=tuple(rec.channel_labels[i] for i in bad),
        total_channels=rec.n_channels,
        retention_pct=100.0 * len(keep) / rec.n_channels,
    )

"""Synthetic signal and cohort generators with known ground truth.

These provide the oracles the test suite verifies against: PAC signals with
a dialable coupling factor, common-source channel pairs for connectivity
nulls, Gaussian feature cohorts with planted group shifts, and full
multichannel recordings so the CLI pipeline can run end to end without any
real data.  Everything is a pure function of its seed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .ingest import (
    EPOCH_SECONDS,
    Group,
    Hypnogram,
    Recording,
    Sex,
    SleepStage,
    StateTag,
    SubjectMeta,
)
from .classify import SubjectFeatures
from .preprocess import band_pass


def _rng(seed_parts):
    return np.random.default_rng(np.random.SeedSequence(seed_parts))


@dataclass
class PacSignalSpec:
    """Recipe for a single-channel signal with slow-phase/fast-amplitude coupling."""

    phase_freq: float
    amp_freq: float
    coupling: float
    noise_sd: float = 0.0
    duration: float = 120.0
    sample_rate: float = 250.0
    seed: int = 0
    fast_amplitude: float = 0.5

    def __post_init__(self):
        if not self.phase_freq < self.amp_freq:
            raise DomainError(
                f"phase_freq must be below amp_freq, got {self.phase_freq} "
                f">= {self.amp_freq}"
            )
        if not 0.0 <= self.coupling <= 1.0:
            raise DomainError(f"coupling must lie in [0, 1], got {self.coupling}")
        if self.noise_sd < 0:
            raise DomainError("noise_sd must be nonnegative")
        if self.sample_rate <= 0 or self.duration <= 0:
            raise DomainError("duration and sample_rate must be positive")
        if self.amp_freq >= self.sample_rate / 2:
            raise DomainError("amp_freq must be below the Nyquist frequency")
        if self.duration * self.phase_freq < 10:
            raise DomainError(
                f"need >= 10 slow cycles: {self.duration} s at {self.phase_freq} Hz "
                f"gives {self.duration * self.phase_freq:.1f}"
            )


def gen_pac_signal(spec):
    """Slow oscillation plus a fast oscillation whose envelope rides the slow phase.

    s(t) = sin(2*pi*f_p*t)
         + [1 - chi + chi*(1 + sin(2*pi*f_p*t))/2] * A * sin(2*pi*f_a*t)
         + noise.
    chi = 0 leaves the fast amplitude constant (no coupling); chi = 1
    modulates it fully.  The envelope stays nonnegative for every chi in
    [0, 1].
    """
    n = int(round(spec.duration * spec.sample_rate))
    t = np.arange(n) / spec.sample_rate
    slow = np.sin(2.0 * np.pi * spec.phase_freq * t)
    envelope = 1.0 - spec.coupling + spec.coupling * (1.0 + slow) / 2.0
    fast = np.sin(2.0 * np.pi * spec.amp_freq * t)
    signal = slow + envelope * fast * spec.fast_amplitude
    if spec.noise_sd > 0:
        signal = signal + spec.noise_sd * _rng(spec.seed).standard_normal(n)
    return signal


def gen_common_source_pair(lag_samples, mix, noise_sd, duration, seed,
                           sample_rate=250.0, center_hz=10.0, half_width_hz=2.0,
                           subject_id="synth-pair"):
    """Two channels mixing one narrowband source and its delayed copy.

    Channel i = mix[i,0]*s(t) + mix[i,1]*s(t - lag) + independent noise.
    With lag 0 both channels are instantaneous mixtures of the same source,
    the volume-conduction null; a positive lag plants a genuine phase lag.
    """
    mix = np.asarray(mix, dtype=np.float64)
    if mix.shape != (2, 2):
        raise DomainError(f"mix must be 2x2, got {mix.shape}")
    if np.linalg.cond(mix) > 1e8:
        raise DomainError("mix matrix is singular or near-singular")
    if lag_samples < 0 or lag_samples != int(lag_samples):
        raise DomainError(f"lag_samples must be a nonnegative integer, got {lag_samples}")
    lag = int(lag_samples)
    n = int(round(duration * sample_rate))
    rng = _rng(seed)
    white = rng.standard_normal(n + lag + 1)
    source = band_pass(white, sample_rate, center_hz - half_width_hz,
                       center_hz + half_width_hz)
    now = source[lag:lag + n]
    delayed = source[:n]
    channels = np.empty((2, n))
    for i in range(2):
        noise = noise_sd * rng.standard_normal(n) if noise_sd > 0 else 0.0
        channels[i] = mix[i, 0] * now + mix[i, 1] * delayed + noise
    return Recording(subject_id=subject_id, sample_rate=sample_rate,
                     channel_labels=("C3", "C4"), samples=channels)


def gen_cohort(n_gs=11, n_ps=13, n_features=60, effect=None, seed=0, session=None):
    """Class-conditional Gaussian feature cohort with planted mean shifts.

    Features are standard normal per subject; PS subjects get the shift in
    ``effect`` (a {feature_index: shift} mapping, in units of the unit
    feature SD, so the shift equals Cohen's d) added to those features.
    Subject seeds derive from (seed, subject index), so any subset of
    subjects is reproducible independently.
    """
    if n_gs < 2 or n_ps < 2:
        raise DomainError("need at least 2 subjects per group")
    if n_features < 1:
        raise DomainError("need at least 1 feature")
    effect = dict(effect or {})
    for idx in effect:
        if not 0 <= idx < n_features:
            raise DomainError(f"effect feature index {idx} out of range")
    shift = np.zeros(n_features)
    for idx, d in effect.items():
        shift[idx] = d

    cohort = []
    for i in range(n_gs + n_ps):
        label = "GS" if i < n_gs else "PS"
        features = _rng([seed, i]).standard_normal(n_features)
        if label == "PS":
            features = features + shift
        cohort.append(SubjectFeatures(
            subject_id=f"s{i + 1:02d}", features=features, label=label,
            session=session,
        ))
    return cohort


DEFAULT_CHANNELS = ("Fp1", "Fp2", "C3", "C4", "T7", "T8", "P3", "P4", "O1", "O2")

RS_STATES = (StateTag.PRE_NAP, StateTag.POST_NAP, StateTag.POST_NIGHT)

# Hypnogram stage cycle for nap recordings; subjects without N3 substitute N2.
_NAP_STAGE_CYCLE = (SleepStage.WAKE, SleepStage.N1, SleepStage.N2, SleepStage.N3,
                    SleepStage.N3, SleepStage.N2, SleepStage.REM)


@dataclass
class SyntheticSubject:
    """All on-disk material for one generated subject."""

    meta: SubjectMeta
    recordings: dict = field(default_factory=dict)
    hypnogram: Hypnogram = None


def _nap_hypnogram(n_epochs, has_n3):
    stages = []
    for e in range(n_epochs):
        stage = _NAP_STAGE_CYCLE[e % len(_NAP_STAGE_CYCLE)]
        if stage == SleepStage.N3 and not has_n3:
            stage = SleepStage.N2
        stages.append(stage)
    return Hypnogram(stages=tuple(stages))


def _gen_state_recording(subject_id, state, duration, sample_rate, rng,
                         beta_gain, pac_chi, channels):
    """Multichannel noise with a shared alpha source, group-scaled beta power,
    and a shared slow-phase-coupled fast component."""
    n = int(round(duration * sample_rate))
    n_ch = len(channels)
    samples = rng.standard_normal((n_ch, n))

    alpha_src = band_pass(rng.standard_normal(n + n_ch), sample_rate, 8.0, 12.0)
    for i in range(n_ch):
        # Small per-channel delays keep the shared source phase-lagged.
        samples[i] += 0.8 * alpha_src[i:i + n]

    beta = band_pass(rng.standard_normal((n_ch, n)), sample_rate, 15.0, 25.0)
    samples += beta_gain * beta

    pac = gen_pac_signal(PacSignalSpec(
        phase_freq=1.5, amp_freq=20.0, coupling=pac_chi, noise_sd=0.0,
        duration=duration, sample_rate=sample_rate,
        seed=int(rng.integers(0, 2**31)), fast_amplitude=1.0,
    ))
    samples += 0.8 * pac

    return Recording(subject_id=subject_id, sample_rate=sample_rate,
                     channel_labels=channels, samples=samples, state_tag=state)


def gen_cohort_recordings(n_gs=11, n_ps=13, sample_rate=500.0, nap_seconds=240.0,
                          rs_seconds=60.0, seed=0, n_no_n3_gs=4, n_no_n3_ps=4,
                          channels=DEFAULT_CHANNELS, beta_gain_ps=2.5,
                          beta_gain_gs=1.0, pac_chi_gs=0.05, pac_chi_ps=0.9):
    """Full synthetic cohort: meta, one nap recording with hypnogram, and
    three resting-state recordings per subject.

    PS subjects carry stronger beta power and stronger slow-fast coupling,
    so downstream screens and classifiers have real structure to find.  The
    first ``n_no_n3_*`` subjects of each group get hypnograms without any
    N3 epochs, mirroring cohorts where some participants never reach deep
    sleep.
    """
    if n_gs < 2 or n_ps < 2:
        raise DomainError("need at least 2 subjects per group")
    if nap_seconds % EPOCH_SECONDS != 0:
        raise DomainError(f"nap_seconds must be a multiple of {EPOCH_SECONDS}")
    if n_no_n3_gs > n_gs or n_no_n3_ps > n_ps:
        raise DomainError("cannot exclude more subjects from N3 than exist")
    n_epochs = int(nap_seconds / EPOCH_SECONDS)

    subjects = []
    for i in range(n_gs + n_ps):
        is_gs = i < n_gs
        group_rank = i if is_gs else i - n_gs
        sid = f"s{i + 1:02d}"
        meta_rng = _rng([seed, i, 0])
        meta = SubjectMeta(
            subject_id=sid,
            psqi_score=int(meta_rng.integers(1, 6)) if is_gs
            else int(meta_rng.integers(6, 16)),
            age=float(np.round(meta_rng.uniform(20.0, 40.0), 1)),
            sex=Sex.F if i % 2 == 0 else Sex.M,
        )
        beta_gain = beta_gain_gs if is_gs else beta_gain_ps
        pac_chi = pac_chi_gs if is_gs else pac_chi_ps

        recordings = {}
        for s_idx, state in enumerate((StateTag.NAP,) + RS_STATES):
            duration = nap_seconds if state == StateTag.NAP else rs_seconds
            rng = _rng([seed, i, 1 + s_idx])
            recordings[state] = _gen_state_recording(
                sid, state, duration, sample_rate, rng, beta_gain, pac_chi,
                channels,
            )
        has_n3 = group_rank >= (n_no_n3_gs if is_gs else n_no_n3_ps)
        subjects.append(SyntheticSubject(
            meta=meta,
            recordings=recordings,
            hypnogram=_nap_hypnogram(n_epochs, has_n3),
        ))
    return subjects

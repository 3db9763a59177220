"""Recordings, hypnograms, and subject metadata: loading, bookkeeping, grouping.

File interfaces
---------------
CSV recording: first row holds channel labels, each following row holds one
sample per channel.  The file carries no rate metadata, so a sidecar mapping
with ``sample_rate_hz`` (and optionally ``subject_id``, ``state_tag``,
``rs_index``) is mandatory.

EDF recording: continuous 16-bit little-endian EDF with a 256-byte main
header plus 256 bytes per signal.  EDF+ annotation channels and per-signal
rate differences are rejected.

Hypnogram: plain text, one stage label per line (wake/rem/n1/n2/n3),
30 seconds per line.

Meta table: CSV with columns subject_id, psqi, age, sex.
"""

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentError,
    ConfigError,
    DomainError,
    ParseError,
    UnsupportedFormat,
)

PSQI_GOOD_SLEEPER_MAX = 5
EPOCH_SECONDS = 30.0


class StateTag(Enum):
    PRE_NAP = "pre_nap"
    NAP = "nap"
    POST_NAP = "post_nap"
    POST_NIGHT = "post_night"


class SleepStage(Enum):
    WAKE = "wake"
    REM = "rem"
    N1 = "n1"
    N2 = "n2"
    N3 = "n3"


class Sex(Enum):
    F = "F"
    M = "M"


class Group(Enum):
    GS = "GS"
    PS = "PS"


@dataclass
class Recording:
    """Multichannel sampled signal in microvolts.

    ``samples`` is a (channels, time) float64 matrix; row i belongs to
    ``channel_labels[i]``.
    """

    subject_id: str
    sample_rate: float
    channel_labels: tuple
    samples: np.ndarray
    state_tag: StateTag | None = None
    rs_index: int | None = None

    def __post_init__(self):
        self.channel_labels = tuple(str(c) for c in self.channel_labels)
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise DomainError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 2:
            raise DomainError(f"samples must be (channels, time), got shape {self.samples.shape}")
        if self.samples.shape[0] != len(self.channel_labels):
            raise DomainError(
                f"{len(self.channel_labels)} labels but {self.samples.shape[0]} sample rows"
            )
        if len(set(self.channel_labels)) != len(self.channel_labels):
            raise DomainError("channel labels must be unique")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("samples contain NaN or Inf")
        if self.rs_index is not None and not 1 <= self.rs_index <= 8:
            raise DomainError(f"rs_index must be in 1..8, got {self.rs_index}")

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def duration_seconds(self):
        return self.n_samples / self.sample_rate

    def replace_samples(self, samples, sample_rate=None):
        """New Recording with the same identity but different samples."""
        return Recording(
            subject_id=self.subject_id,
            sample_rate=self.sample_rate if sample_rate is None else sample_rate,
            channel_labels=self.channel_labels,
            samples=samples,
            state_tag=self.state_tag,
            rs_index=self.rs_index,
        )

    def subset_channels(self, labels):
        """New Recording restricted to ``labels`` (order preserved from self)."""
        keep = [i for i, c in enumerate(self.channel_labels) if c in set(labels)]
        if not keep:
            raise DomainError("channel subset is empty")
        return Recording(
            subject_id=self.subject_id,
            sample_rate=self.sample_rate,
            channel_labels=tuple(self.channel_labels[i] for i in keep),
            samples=self.samples[keep],
            state_tag=self.state_tag,
            rs_index=self.rs_index,
        )


@dataclass
class Hypnogram:
    """Per-30-s-epoch sleep stage labels aligned to a recording."""

    stages: tuple
    epoch_seconds: float = EPOCH_SECONDS

    def __post_init__(self):
        self.stages = tuple(self.stages)
        if self.epoch_seconds != EPOCH_SECONDS:
            raise DomainError(f"epoch_seconds is fixed at {EPOCH_SECONDS}")
        for s in self.stages:
            if not isinstance(s, SleepStage):
                raise DomainError(f"stages must be SleepStage values, got {s!r}")

    def __len__(self):
        return len(self.stages)


@dataclass
class SubjectMeta:
    """Demographics row used by grouping, partial correlation, and mediation."""

    subject_id: str
    psqi_score: int
    age: float
    sex: Sex
    group: Group = field(default=None)

    def __post_init__(self):
        if not 0 <= self.psqi_score <= 21:
            raise DomainError(f"psqi_score must be in 0..21, got {self.psqi_score}")
        expected = assign_group(self.psqi_score)
        if self.group is None:
            self.group = expected
        elif self.group != expected:
            raise DomainError(
                f"group {self.group} inconsistent with psqi_score {self.psqi_score}"
            )


def assign_group(psqi_score):
    """GS for global PSQI <= 5, PS otherwise."""
    if not 0 <= psqi_score <= 21:
        raise DomainError(f"psqi_score must be in 0..21, got {psqi_score}")
    return Group.GS if psqi_score <= PSQI_GOOD_SLEEPER_MAX else Group.PS


def compute_retention(total_channels, retained_channels):
    """Percentage of channels retained after bad-channel removal."""
    if total_channels <= 0:
        raise DomainError("total_channels must be positive")
    if not 0 <= retained_channels <= total_channels:
        raise DomainError(
            f"retained_channels must be in 0..{total_channels}, got {retained_channels}"
        )
    return 100.0 * retained_channels / total_channels


def _resolve_meta(meta):
    if isinstance(meta, (str, Path)):
        with open(meta, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    if not isinstance(meta, dict):
        raise ConfigError(f"sidecar meta must be a mapping or JSON path, got {type(meta)}")
    return meta


def load_csv_recording(path, meta):
    """Load a CSV recording; ``meta`` is the mandatory sidecar (dict or JSON path).

    Sidecar keys: sample_rate_hz (required), subject_id, state_tag, rs_index.
    """
    meta = _resolve_meta(meta)
    if "sample_rate_hz" not in meta:
        raise ConfigError(f"sidecar for {path} is missing sample_rate_hz")
    sample_rate = float(meta["sample_rate_hz"])

    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            labels = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        labels = [c.strip() for c in labels]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(labels):
                raise ParseError(
                    f"{path}:{lineno}: row has {len(row)} cells, header has {len(labels)}"
                )
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
            if not all(np.isfinite(values)):
                raise ParseError(f"{path}:{lineno}: non-finite cell")
            rows.append(values)

    if not rows:
        raise ParseError(f"{path}: no sample rows")
    samples = np.array(rows, dtype=np.float64).T

    state_tag = meta.get("state_tag")
    if state_tag is not None and not isinstance(state_tag, StateTag):
        state_tag = StateTag(state_tag)
    rs_index = meta.get("rs_index")
    if rs_index is not None:
        rs_index = int(rs_index)
    return Recording(
        subject_id=str(meta.get("subject_id", Path(path).stem)),
        sample_rate=sample_rate,
        channel_labels=tuple(labels),
        samples=samples,
        state_tag=state_tag,
        rs_index=rs_index,
    )


def write_csv_recording(rec, path):
    """Write a recording in the CSV layout; floats use shortest round-trip form."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(rec.channel_labels)
        for row in rec.samples.T:
            writer.writerow([repr(float(v)) for v in row])


_EDF_HEADER_BYTES = 256
_EDF_PER_SIGNAL_BYTES = 256


def _edf_field(raw, start, length):
    return raw[start : start + length].decode("ascii", errors="replace").strip()


def load_edf_recording(path):
    """Load a continuous single-rate EDF file with 16-bit samples.

    Digital values map to physical units per channel via the linear map
    pmin + (d - dmin) * (pmax - pmin) / (dmax - dmin).
    """
    with open(path, "rb") as fh:
        head = fh.read(_EDF_HEADER_BYTES)
        if len(head) < _EDF_HEADER_BYTES:
            raise ParseError(f"{path}: truncated EDF header")
        version = _edf_field(head, 0, 8)
        if version != "0":
            raise ParseError(f"{path}: EDF version field must be '0', got {version!r}")
        patient = _edf_field(head, 8, 80)
        try:
            n_records = int(_edf_field(head, 236, 8))
            record_seconds = float(_edf_field(head, 244, 8))
            n_signals = int(_edf_field(head, 252, 4))
        except ValueError as exc:
            raise ParseError(f"{path}: malformed header numerics ({exc})") from None
        if n_signals <= 0 or n_records < 0:
            raise ParseError(f"{path}: implausible header (ns={n_signals}, records={n_records})")

        sig_head = fh.read(_EDF_PER_SIGNAL_BYTES * n_signals)
        if len(sig_head) < _EDF_PER_SIGNAL_BYTES * n_signals:
            raise ParseError(f"{path}: truncated signal headers")

        def per_signal(offset, width):
            base = offset * n_signals
            return [_edf_field(sig_head, base + i * width, width) for i in range(n_signals)]

        labels = per_signal(0, 16)
        if any(lbl == "EDF Annotations" for lbl in labels):
            raise UnsupportedFormat(f"{path}: EDF+ annotation channels are not supported")
        try:
            physical_min = [float(v) for v in per_signal(16 + 80 + 8, 8)]
            physical_max = [float(v) for v in per_signal(16 + 80 + 8 + 8, 8)]
            digital_min = [int(v) for v in per_signal(16 + 80 + 8 + 8 + 8, 8)]
            digital_max = [int(v) for v in per_signal(16 + 80 + 8 + 8 + 8 + 8, 8)]
            samples_per_record = [
                int(v) for v in per_signal(16 + 80 + 8 + 8 + 8 + 8 + 8 + 80, 8)
            ]
        except ValueError as exc:
            raise ParseError(f"{path}: malformed signal header numerics ({exc})") from None

        if len(set(samples_per_record)) != 1:
            raise UnsupportedFormat(f"{path}: signals have heterogeneous sampling rates")
        spr = samples_per_record[0]
        if spr <= 0 or record_seconds <= 0:
            raise ParseError(f"{path}: implausible record geometry")
        for i in range(n_signals):
            if digital_max[i] == digital_min[i]:
                raise ParseError(f"{path}: signal {i} has degenerate digital range")

        payload = fh.read(2 * spr * n_signals * n_records)
        if len(payload) < 2 * spr * n_signals * n_records:
            raise ParseError(f"{path}: truncated data records")

    digital = np.frombuffer(payload, dtype="<i2").reshape(n_records, n_signals, spr)
    samples = np.empty((n_signals, n_records * spr), dtype=np.float64)
    for i in range(n_signals):
        scale = (physical_max[i] - physical_min[i]) / (digital_max[i] - digital_min[i])
        samples[i] = physical_min[i] + (
            digital[:, i, :].reshape(-1).astype(np.float64) - digital_min[i]
        ) * scale

    subject_id = patient.split(" ")[0] if patient else Path(path).stem
    return Recording(
        subject_id=subject_id,
        sample_rate=spr / record_seconds,
        channel_labels=tuple(labels),
        samples=samples,
    )


def select_stage_epochs(rec, hyp, stage):
    """Sample ranges (start, stop) of every 30-s epoch labeled ``stage``.

    Returns an empty list when the stage is absent; raises AlignmentError
    when the hypnogram extends past the recording.
    """
    if not isinstance(stage, SleepStage):
        stage = SleepStage(stage)
    samples_per_epoch = int(round(hyp.epoch_seconds * rec.sample_rate))
    if len(hyp) * samples_per_epoch > rec.n_samples:
        raise AlignmentError(
            f"hypnogram covers {len(hyp) * hyp.epoch_seconds:.0f} s but recording has "
            f"{rec.duration_seconds:.1f} s"
        )
    return [
        (i * samples_per_epoch, (i + 1) * samples_per_epoch)
        for i, s in enumerate(hyp.stages)
        if s == stage
    ]


def load_hypnogram(path):
    """Read a hypnogram file: one stage token per line."""
    stages = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            token = line.strip().lower()
            if not token:
                continue
            try:
                stages.append(SleepStage(token))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: unknown stage {token!r}") from None
    return Hypnogram(stages=tuple(stages))


def write_hypnogram(hyp, path):
    with open(path, "w", encoding="utf-8") as fh:
        for s in hyp.stages:
            fh.write(s.value + "\n")


def load_meta_table(path):
    """Read the (subject_id, psqi, age, sex) cohort table."""
    out = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"subject_id", "psqi", "age", "sex"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ParseError(f"{path}: meta table needs columns {sorted(required)}")
        for row in reader:
            try:
                out.append(
                    SubjectMeta(
                        subject_id=row["subject_id"].strip(),
                        psqi_score=int(row["psqi"]),
                        age=float(row["age"]),
                        sex=Sex(row["sex"].strip().upper()),
                    )
                )
            except ValueError as exc:
                raise ParseError(f"{path}: bad meta row {row} ({exc})") from None
    return out


def write_meta_table(metas, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "psqi", "age", "sex"])
        for m in metas:
            writer.writerow([m.subject_id, m.psqi_score, repr(float(m.age)), m.sex.value])

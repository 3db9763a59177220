"""Config-driven batch front end.

One INI-style config file drives a full run.  Subcommands mirror the
pipeline stages::

    sleepq synth      config.ini   # write a synthetic cohort + manifest
    sleepq preprocess config.ini   # clean recordings, retention table
    sleepq features   config.ini   # power / wpli / pac feature tables
    sleepq stats      config.ini   # permutation screen -> feature masks
    sleepq classify   config.ini   # LOSO report per family x session
    sleepq report     config.ini   # render text tables from the outputs

Exit codes: 0 success (warnings allowed), 1 computation error, 2 config
or manifest error.  Every run is seeded from the config; two runs with
the same config and inputs produce byte-identical output trees, whether
serial or threaded (SLEEPQ_THREADS).  Files are written atomically via
temp-and-rename so a parallel run never exposes a partial file.
"""

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .classify import (
    DiagonalLDA,
    InverseDistanceKNN,
    LinearSVM,
    LogisticRegressionGD,
    SubjectFeatures,
    loso_cv,
)
from .connectivity import sliding_ensemble, wpli_feature_names, wpli_features
from .coupling import comodulogram, delta_beta_pair_mi, pac_pair_names
from .errors import ConfigError, DomainError, EmptyRoi, SleepQError
from .ingest import (
    Group,
    Hypnogram,
    Recording,
    SleepStage,
    StateTag,
    load_csv_recording,
    load_hypnogram,
    load_meta_table,
    select_stage_epochs,
    write_csv_recording,
    write_hypnogram,
    write_meta_table,
)
from .preprocess import (
    DEFAULT_HIGH_HZ,
    DEFAULT_KURTOSIS_Z,
    DEFAULT_LOW_HZ,
    DEFAULT_TARGET_RATE,
    preprocess_recording,
)
from .spectral import ROI_ORDER, band_feature_names, band_power_features, roi_channel_indices
from .stats import groupwise_feature_screen
from .synth import gen_cohort_recordings

STATE_ORDER = tuple(s.value for s in StateTag)
FAMILIES = ("power", "wpli", "pac")

OK = 0
EXIT_COMPUTE = 1
EXIT_CONFIG = 2

ENV_OUTPUT_DIR = "SLEEPQ_OUTPUT_DIR"
ENV_THREADS = "SLEEPQ_THREADS"


# ---------------------------------------------------------------------------
# config and deterministic file IO

def _atomic_write(path, text):
    """Write text via a same-directory temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_via(writer, payload, path):
    """Run a path-taking writer against a temp file, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    os.close(fd)
    try:
        writer(payload, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _fmt(value):
    """Canonical cell text: shortest round-trip form for floats."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class RunConfig:
    """Typed view over the INI config with config-error reporting."""

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.is_file():
            raise ConfigError(f"config file not found: {path}")
        self._cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                self._cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def _get(self, section, key, cast, default):
        if not self._cp.has_option(section, key):
            if default is None:
                raise ConfigError(f"{self.path}: missing [{section}] {key}")
            return default
        raw = self._cp.get(section, key)
        try:
            return cast(raw)
        except (TypeError, ValueError):
            raise ConfigError(
                f"{self.path}: bad value for [{section}] {key}: {raw!r}"
            ) from None

    def text(self, section, key, default=None):
        return self._get(section, key, str, default)

    def integer(self, section, key, default=None):
        return self._get(section, key, int, default)

    def number(self, section, key, default=None):
        return self._get(section, key, float, default)

    def flag(self, section, key, default=False):
        def cast(raw):
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)

        return self._get(section, key, cast, default)

    def names(self, section, key, default):
        raw = self.text(section, key, default)
        return tuple(part.strip() for part in raw.split(",") if part.strip())

    @property
    def output_dir(self):
        override = os.environ.get(ENV_OUTPUT_DIR)
        base = override if override else self.text("run", "output_dir", "out")
        return Path(base)

    @property
    def seed(self):
        return self.integer("run", "seed", 0)

    @property
    def threads(self):
        override = os.environ.get(ENV_THREADS)
        if override:
            try:
                n = int(override)
            except ValueError:
                raise ConfigError(f"{ENV_THREADS} must be an integer, got {override!r}") from None
        else:
            n = self.integer("run", "threads", 1)
        if n < 1:
            raise ConfigError(f"thread count must be >= 1, got {n}")
        return n


def _parallel_map(fn, items, threads):
    """Order-preserving map, threaded when threads > 1."""
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _derived_seed(*parts):
    """Stable child seed for a labeled slice of the run."""
    entropy = [
        int.from_bytes(hashlib.sha256(p.encode("utf-8")).digest()[:4], "little")
        if isinstance(p, str)
        else int(p)
        for p in parts
    ]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


# ---------------------------------------------------------------------------
# manifest plumbing

MANIFEST_HEADER = ("subject_id", "state", "path", "sample_rate_hz", "hypnogram")
CLEANED_HEADER = MANIFEST_HEADER + (
    "total_channels",
    "retained_channels",
    "retention_pct",
    "bad_channels",
)


def _read_manifest(path, expected_header):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        have = tuple(reader.fieldnames or ())
        missing = [c for c in expected_header if c not in have]
        if missing:
            raise ConfigError(f"{path}: manifest is missing columns {missing}")
        rows = list(reader)
    for row in rows:
        rec_path = (path.parent / row["path"]).resolve()
        if not rec_path.is_file():
            raise ConfigError(
                f"{path}: recording for subject {row['subject_id']} not found: {rec_path}"
            )
        row["path"] = rec_path
        hyp = row.get("hypnogram", "")
        if row["state"] == StateTag.NAP.value and not hyp:
            raise ConfigError(
                f"{path}: subject {row['subject_id']} has a nap row without a hypnogram"
            )
        if hyp:
            hyp_path = (path.parent / hyp).resolve()
            if not hyp_path.is_file():
                raise ConfigError(
                    f"{path}: hypnogram for subject {row['subject_id']} not found: {hyp_path}"
                )
            row["hypnogram"] = hyp_path
        else:
            row["hypnogram"] = None
    return rows


def _load_rec(row):
    meta = {
        "sample_rate_hz": float(row["sample_rate_hz"]),
        "subject_id": row["subject_id"],
        "state_tag": row["state"],
    }
    return load_csv_recording(row["path"], meta)


def _meta_by_subject(cfg):
    meta_path = Path(cfg.text("features", "meta", str(cfg.output_dir / "meta.csv")))
    if not meta_path.is_file():
        raise ConfigError(f"meta table not found: {meta_path}")
    return {m.subject_id: m for m in load_meta_table(meta_path)}


# ---------------------------------------------------------------------------
# synth

def cmd_synth(cfg):
    out = cfg.output_dir
    raw_dir = out / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)

    channels = cfg.names("synth", "channels", "")
    kwargs = {}
    if channels:
        kwargs["channels"] = channels
    subjects = gen_cohort_recordings(
        n_gs=cfg.integer("synth", "n_gs", 11),
        n_ps=cfg.integer("synth", "n_ps", 13),
        sample_rate=cfg.number("synth", "sample_rate_hz", 500.0),
        nap_seconds=cfg.number("synth", "nap_seconds", 240.0),
        rs_seconds=cfg.number("synth", "rs_seconds", 60.0),
        seed=cfg.seed,
        n_no_n3_gs=cfg.integer("synth", "n_no_n3_gs", 4),
        n_no_n3_ps=cfg.integer("synth", "n_no_n3_ps", 4),
        **kwargs,
    )

    manifest_rows = []
    for subject in subjects:
        sid = subject.meta.subject_id
        hyp_rel = f"raw/{sid}_nap.hyp"
        _atomic_via(write_hypnogram, subject.hypnogram, out / hyp_rel)
        for state in STATE_ORDER:
            rec = subject.recordings[StateTag(state)]
            rel = f"raw/{sid}_{state}.csv"
            _atomic_via(write_csv_recording, rec, out / rel)
            manifest_rows.append(
                (
                    sid,
                    state,
                    rel,
                    _fmt(rec.sample_rate),
                    hyp_rel if state == StateTag.NAP.value else "",
                )
            )
    _atomic_via(write_meta_table, [s.meta for s in subjects], out / "meta.csv")
    _atomic_write(out / "manifest.csv", _csv_text(MANIFEST_HEADER, manifest_rows))
    print(f"wrote {len(subjects)} subjects x {len(STATE_ORDER)} states under {out}")
    return OK


# ---------------------------------------------------------------------------
# preprocess

def cmd_preprocess(cfg):
    out = cfg.output_dir
    manifest_path = cfg.text("preprocess", "manifest", str(out / "manifest.csv"))
    rows = _read_manifest(manifest_path, MANIFEST_HEADER)
    cleaned_dir = out / "cleaned"
    cleaned_dir.mkdir(parents=True, exist_ok=True)

    target_rate = cfg.number("preprocess", "target_rate_hz", DEFAULT_TARGET_RATE)
    low_hz = cfg.number("preprocess", "low_hz", DEFAULT_LOW_HZ)
    high_hz = cfg.number("preprocess", "high_hz", DEFAULT_HIGH_HZ)
    kurtosis_z = cfg.number("preprocess", "kurtosis_z", DEFAULT_KURTOSIS_Z)

    def clean(row):
        rec = _load_rec(row)
        result = preprocess_recording(
            rec,
            target_rate=target_rate,
            low_hz=low_hz,
            high_hz=high_hz,
            kurtosis_z=kurtosis_z,
        )
        rel = f"cleaned/{row['subject_id']}_{row['state']}.csv"
        _atomic_via(write_csv_recording, result.recording, out / rel)
        hyp_rel = (
            os.path.relpath(row["hypnogram"], out) if row["hypnogram"] else ""
        )
        return (
            row["subject_id"],
            row["state"],
            rel,
            _fmt(result.recording.sample_rate),
            hyp_rel,
            str(result.total_channels),
            str(result.total_channels - len(result.bad_channels)),
            _fmt(result.retention_pct),
            ";".join(result.bad_channels),
        )

    cleaned_rows = _parallel_map(clean, rows, cfg.threads)
    _atomic_write(out / "cleaned_manifest.csv", _csv_text(CLEANED_HEADER, cleaned_rows))

    retention = []
    for state in STATE_ORDER:
        pcts = [float(r[7]) for r in cleaned_rows if r[1] == state]
        if not pcts:
            continue
        mean = float(np.mean(pcts))
        sem = float(np.std(pcts, ddof=1) / np.sqrt(len(pcts))) if len(pcts) > 1 else 0.0
        retention.append((state, str(len(pcts)), _fmt(mean), _fmt(sem)))
    _atomic_write(
        out / "retention.csv",
        _csv_text(("state", "n_recordings", "mean_retention_pct", "sem_retention_pct"), retention),
    )
    print(f"cleaned {len(cleaned_rows)} recordings under {out / 'cleaned'}")
    return OK


# ---------------------------------------------------------------------------
# features

def _roi_average_signals(rec):
    """(n_rois, time) regional averages in ROI_ORDER."""
    rois = roi_channel_indices(rec.channel_labels)
    for roi in ROI_ORDER:
        if not rois.get(roi):
            raise EmptyRoi(f"no channels map to ROI {roi!r}")
    return np.stack([rec.samples[rois[roi]].mean(axis=0) for roi in ROI_ORDER])


def _nap_epochs(rec, hypnogram_path, stage):
    hyp = load_hypnogram(hypnogram_path)
    return select_stage_epochs(rec, hyp, stage)


def _epoch_recordings(rec, spans):
    return [rec.replace_samples(rec.samples[:, a:b]) for a, b in spans]


def _power_vector(rec, spans):
    if spans is None:
        return band_power_features(rec)
    vecs = [band_power_features(sub) for sub in _epoch_recordings(rec, spans)]
    return np.mean(vecs, axis=0)


def _wpli_vector(rec, spans, window_seconds):
    if spans is None:
        ensemble = sliding_ensemble(rec.n_samples, rec.sample_rate, window_seconds)
    else:
        ensemble = []
        for a, b in spans:
            for s, e in sliding_ensemble(b - a, rec.sample_rate, window_seconds):
                ensemble.append((a + s, a + e))
    return wpli_features(rec, ensemble=ensemble, window_seconds=window_seconds)


def _pac_vector(rec, spans):
    regional = _roi_average_signals(rec)
    if spans is None:
        grids = [delta_beta_pair_mi(regional, rec.sample_rate)]
    else:
        grids = [
            delta_beta_pair_mi(regional[:, a:b], rec.sample_rate) for a, b in spans
        ]
    return np.mean(grids, axis=0).ravel()


def _longest_run(spans):
    """Widest contiguous (start, stop) built from adjacent selected epochs."""
    best = None
    current = None
    for a, b in spans:
        if current is not None and a == current[1]:
            current = (current[0], b)
        else:
            current = (a, b)
        if best is None or current[1] - current[0] > best[1] - best[0]:
            best = current
    return best


def cmd_features(cfg, families=None):
    out = cfg.output_dir
    manifest_path = cfg.text("features", "manifest", str(out / "cleaned_manifest.csv"))
    rows = _read_manifest(manifest_path, MANIFEST_HEADER)
    feat_dir = out / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)

    if families is None:
        families = cfg.names("features", "families", ",".join(FAMILIES))
    for family in families:
        if family not in FAMILIES:
            raise ConfigError(f"unknown feature family {family!r}")

    nap_stage = SleepStage(cfg.text("features", "nap_stage", "n3"))
    wpli_window = cfg.number("features", "wpli_window_seconds", 2.0)
    want_comodulogram = cfg.flag("features", "comodulogram", False)
    comodulogram_r = cfg.integer("features", "comodulogram_r", 200)
    comodulogram_roi = cfg.text("features", "comodulogram_roi", "frontal")
    comodulogram_state = cfg.text("features", "comodulogram_state", StateTag.NAP.value)
    if comodulogram_roi not in ROI_ORDER:
        raise ConfigError(f"unknown ROI {comodulogram_roi!r}")
    if comodulogram_state not in STATE_ORDER:
        raise ConfigError(f"unknown state {comodulogram_state!r}")

    names = {
        "power": band_feature_names(),
        "wpli": wpli_feature_names(),
        "pac": pac_pair_names(),
    }
    compute = {
        "power": lambda rec, spans: _power_vector(rec, spans),
        "wpli": lambda rec, spans: _wpli_vector(rec, spans, wpli_window),
        "pac": lambda rec, spans: _pac_vector(rec, spans),
    }

    states = [s for s in STATE_ORDER if any(r["state"] == s for r in rows)]
    for state in states:
        state_rows = [r for r in rows if r["state"] == state]

        def subject_features(row):
            rec = _load_rec(row)
            spans = None
            if state == StateTag.NAP.value:
                spans = _nap_epochs(rec, row["hypnogram"], nap_stage)
                if not spans:
                    return row["subject_id"], None, f"no {nap_stage.value} epochs", None
            vectors = {}
            for family in families:
                vectors[family] = compute[family](rec, spans)
            grid = None
            if (
                want_comodulogram
                and "pac" in families
                and state == comodulogram_state
            ):
                if spans is None:
                    segment = (0, rec.n_samples)
                else:
                    segment = _longest_run(spans)
                a, b = segment
                rois = roi_channel_indices(rec.channel_labels)
                source = rec.samples[rois[comodulogram_roi], a:b].mean(axis=0)
                grid = comodulogram(
                    source,
                    fs=rec.sample_rate,
                    r=comodulogram_r,
                    seed=_derived_seed(cfg.seed, "comodulogram", row["subject_id"]),
                )
            return row["subject_id"], vectors, None, grid

        results = _parallel_map(subject_features, state_rows, cfg.threads)

        exclusions = [(sid, reason) for sid, vecs, reason, _ in results if vecs is None]
        for family in families:
            table = [
                [sid] + [_fmt(v) for v in vecs[family]]
                for sid, vecs, reason, _ in results
                if vecs is not None
            ]
            _atomic_write(
                feat_dir / f"features_{family}_{state}.csv",
                _csv_text(["subject_id"] + list(names[family]), table),
            )
            _atomic_write(
                feat_dir / f"exclusions_{family}_{state}.csv",
                _csv_text(("subject_id", "reason"), exclusions),
            )
        for sid, vecs, reason, grid in results:
            if grid is not None:
                _atomic_write(
                    feat_dir / f"comodulogram_{sid}_{state}.csv",
                    _csv_text(
                        ["phase_hz"] + [_fmt(f) for f in grid.amp_freqs],
                        [
                            [_fmt(grid.phase_freqs[i])] + [_fmt(v) for v in grid.mi[i]]
                            for i in range(grid.mi.shape[0])
                        ],
                    ),
                )
                _atomic_write(
                    feat_dir / f"comodulogram_p_{sid}_{state}.csv",
                    _csv_text(
                        ["phase_hz"] + [_fmt(f) for f in grid.amp_freqs],
                        [
                            [_fmt(grid.phase_freqs[i])]
                            + [_fmt(v) for v in grid.surrogate_p[i]]
                            for i in range(grid.surrogate_p.shape[0])
                        ],
                    ),
                )
        for sid, reason in exclusions:
            print(
                f"warning: {state}: subject {sid} excluded ({reason})",
                file=sys.stderr,
            )
    print(f"wrote feature tables for {len(states)} states under {feat_dir}")
    return OK


# ---------------------------------------------------------------------------
# stats

def _read_feature_table(path):
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    subject_ids = [r[0] for r in rows]
    X = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
    return header[1:], subject_ids, X


def _feature_tables(cfg):
    """All (family, state, path) feature tables present in the output tree."""
    feat_dir = cfg.output_dir / "features"
    found = []
    for family in FAMILIES:
        for state in STATE_ORDER:
            path = feat_dir / f"features_{family}_{state}.csv"
            if path.is_file():
                found.append((family, state, path))
    if not found:
        raise ConfigError(f"no feature tables under {feat_dir}; run features first")
    return found


def cmd_stats(cfg):
    out = cfg.output_dir
    stats_dir = out / "stats"
    stats_dir.mkdir(parents=True, exist_ok=True)
    meta = _meta_by_subject(cfg)
    r = cfg.integer("stats", "r", 1000)
    alpha = cfg.number("stats", "alpha", 0.05)
    base_seed = cfg.integer("stats", "seed", cfg.seed)

    for family, state, path in _feature_tables(cfg):
        feature_names, subject_ids, X = _read_feature_table(path)
        missing = [sid for sid in subject_ids if sid not in meta]
        if missing:
            raise ConfigError(f"{path}: subjects missing from meta table: {missing}")
        groups = [meta[sid].group.value for sid in subject_ids]
        if X.shape[0] == 0 or len(set(groups)) < 2:
            mask = np.zeros(len(feature_names), dtype=bool)
            p_values = np.ones(len(feature_names))
            adjusted = np.ones(len(feature_names))
            print(
                f"warning: {family}/{state}: not enough populated groups, empty mask",
                file=sys.stderr,
            )
        else:
            mask, p_values, adjusted = groupwise_feature_screen(
                X,
                groups,
                r=r,
                alpha=alpha,
                seed=_derived_seed(base_seed, family, state),
            )
        _atomic_write(
            stats_dir / f"stats_{family}_{state}.csv",
            _csv_text(
                ("feature", "p_value", "p_adjusted", "selected"),
                [
                    (name, _fmt(p), _fmt(q), str(int(m)))
                    for name, p, q, m in zip(feature_names, p_values, adjusted, mask)
                ],
            ),
        )
        _atomic_write(
            stats_dir / f"mask_{family}_{state}.csv",
            _csv_text(
                ("feature", "selected"),
                [(name, str(int(m))) for name, m in zip(feature_names, mask)],
            ),
        )
    print(f"wrote stats and masks under {stats_dir}")
    return OK


# ---------------------------------------------------------------------------
# classify

def _build_estimator(name, lam, k):
    if name == "svm":
        return LinearSVM(lam=lam)
    if name == "logreg":
        return LogisticRegressionGD(lam=lam)
    if name == "lda":
        return DiagonalLDA()
    if name == "knn":
        return InverseDistanceKNN(k=k)
    raise ConfigError(f"unknown classifier {name!r}")


def _read_mask(path, feature_names):
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or {"feature", "selected"} - set(reader.fieldnames):
            raise ConfigError(f"{path}: mask needs feature,selected columns")
        selected = {row["feature"]: row["selected"].strip() == "1" for row in reader}
    missing = [n for n in feature_names if n not in selected]
    if missing:
        raise ConfigError(f"{path}: mask is missing features {missing}")
    return np.array([selected[n] for n in feature_names], dtype=bool)


def cmd_classify(cfg):
    out = cfg.output_dir
    classify_dir = out / "classify"
    classify_dir.mkdir(parents=True, exist_ok=True)
    meta = _meta_by_subject(cfg)
    classifier_names = cfg.names("classify", "classifiers", "svm,lda,knn,logreg")
    lam = cfg.number("classify", "lambda", 0.1)
    k = cfg.integer("classify", "k", 5)

    report_rows = []
    predictions = {}
    for family, state, path in _feature_tables(cfg):
        feature_names, subject_ids, X = _read_feature_table(path)
        mask_path = out / "stats" / f"mask_{family}_{state}.csv"
        note = ""
        if mask_path.is_file():
            mask = _read_mask(mask_path, feature_names)
            if not mask.any():
                mask = np.ones(len(feature_names), dtype=bool)
                note = "empty-mask-using-all-features"
        else:
            mask = np.ones(len(feature_names), dtype=bool)
            note = "no-mask-using-all-features"

        missing = [sid for sid in subject_ids if sid not in meta]
        if missing:
            raise ConfigError(f"{path}: subjects missing from meta table: {missing}")
        dataset = [
            SubjectFeatures(
                subject_id=sid,
                features=x[mask],
                label=meta[sid].group.value,
                session=state,
            )
            for sid, x in zip(subject_ids, X)
        ]

        for name in classifier_names:
            estimator = _build_estimator(name, lam, k)
            base = (name, family, state, str(len(dataset)), str(int(mask.sum())))
            try:
                report = loso_cv(dataset, estimator)
            except DomainError as exc:
                report_rows.append(base + ("", "", "", f"skipped: {exc}"))
                print(
                    f"warning: {family}/{state}/{name} skipped ({exc})",
                    file=sys.stderr,
                )
                continue
            report_rows.append(
                base
                + (
                    _fmt(report.accuracy),
                    _fmt(report.f1),
                    _fmt(report.kappa),
                    note,
                )
            )
            predictions[f"{family}/{state}/{name}"] = [
                {
                    "subject_id": sid,
                    "y_true": t,
                    "y_pred": p,
                    "flag": flag,
                }
                for sid, t, p, flag in zip(
                    report.subject_ids, report.y_true, report.y_pred, report.fold_flags
                )
            ]

    header = (
        "classifier",
        "family",
        "session",
        "n_subjects",
        "n_features",
        "accuracy",
        "f1",
        "kappa",
        "note",
    )
    _atomic_write(classify_dir / "report.csv", _csv_text(header, report_rows))
    _atomic_write(
        classify_dir / "report.json",
        json.dumps(
            {
                "rows": [dict(zip(header, row)) for row in report_rows],
                "predictions": predictions,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    print(f"wrote classification report under {classify_dir}")
    return OK


# ---------------------------------------------------------------------------
# report rendering

def _render_grid(rows):
    """classifier x family rows, one session per column, ACC / F1 / kappa cells."""
    sessions = [s for s in STATE_ORDER if any(r["session"] == s for r in rows)]
    seen = []
    for r in rows:
        key = (r["classifier"], r["family"])
        if key not in seen:
            seen.append(key)
    by_key = {(r["classifier"], r["family"], r["session"]): r for r in rows}

    table = []
    for classifier, family in seen:
        cells = []
        for session in sessions:
            r = by_key.get((classifier, family, session))
            if r is None or not r["accuracy"]:
                cells.append("--")
            else:
                cells.append(
                    f"{float(r['accuracy']):.2f} / "
                    f"{float(r['f1']):.2f} / "
                    f"{float(r['kappa']):.2f}"
                )
        table.append((f"{classifier} {family}", cells))

    label_width = max(len(label) for label, _ in table + [("classifier", None)])
    cell_width = max(
        [len(c) for _, cells in table for c in cells] + [len(s) for s in sessions]
    )
    lines = [
        "classifier".ljust(label_width)
        + "".join("  " + s.rjust(cell_width) for s in sessions)
    ]
    for label, cells in table:
        lines.append(
            label.ljust(label_width) + "".join("  " + c.rjust(cell_width) for c in cells)
        )
    return "\n".join(lines)


def cmd_report(cfg):
    out = cfg.output_dir
    report_csv = out / "classify" / "report.csv"
    retention_csv = out / "retention.csv"
    if not report_csv.is_file():
        raise ConfigError(f"classification report not found: {report_csv}; run classify first")
    if not retention_csv.is_file():
        raise ConfigError(f"retention table not found: {retention_csv}; run preprocess first")

    with open(report_csv, "r", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    with open(retention_csv, "r", newline="", encoding="utf-8") as fh:
        retention = list(csv.DictReader(fh))

    sections = ["Classification (ACC / F1 / kappa)", "", _render_grid(rows), ""]
    sections.append("Channel retention (%)")
    sections.append("")
    for r in retention:
        mean = float(r["mean_retention_pct"])
        sem = float(r["sem_retention_pct"])
        sections.append(
            f"{r['state']:<12} n={r['n_recordings']:<3} {mean:.2f} ± {sem:.2f}"
        )
    text = "\n".join(sections) + "\n"
    _atomic_write(out / "report.txt", text)
    print(text, end="")
    return OK


# ---------------------------------------------------------------------------
# entry point

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sleepq",
        description="EEG sleep-quality pipeline: config-driven batch runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("synth", "preprocess", "features", "stats", "classify", "report"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the INI run config")
        if name == "features":
            p.add_argument(
                "--family",
                choices=FAMILIES,
                action="append",
                help="restrict to one family (repeatable); default: config list",
            )
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = RunConfig(args.config)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "preprocess":
            return cmd_preprocess(cfg)
        if args.command == "features":
            return cmd_features(cfg, families=tuple(args.family) if args.family else None)
        if args.command == "stats":
            return cmd_stats(cfg)
        if args.command == "classify":
            return cmd_classify(cfg)
        return cmd_report(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SleepQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())

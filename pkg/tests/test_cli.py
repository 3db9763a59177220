"""End-to-end command-line pipeline on a small synthetic cohort."""

import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

PKG_ROOT = Path(__file__).resolve().parents[1]

CONFIG_TEMPLATE = """\
[run]
output_dir = {out}
seed = 7
threads = 1

[synth]
n_gs = 3
n_ps = 3
sample_rate_hz = 250
nap_seconds = 210
rs_seconds = 30
n_no_n3_gs = 1
n_no_n3_ps = 1
channels = Fp1,Fp2,C3,T7,P3,O1

[preprocess]
target_rate_hz = 125
kurtosis_z = 12.0

[features]
wpli_window_seconds = 2.0

[stats]
r = 200

[classify]
classifiers = svm
"""

STATES = ("pre_nap", "nap", "post_nap", "post_night")


def run_cli(*args, env_extra=None, cwd=None):
    env = os.environ.copy()
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "sleepq.cli", *args],
        capture_output=True, text=True, env=env, cwd=cwd or PKG_ROOT,
    )


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def tree(tmp_path_factory):
    """One full pipeline run: synth -> ... -> report."""
    base = tmp_path_factory.mktemp("cli")
    out = base / "out"
    config = base / "run.ini"
    config.write_text(CONFIG_TEMPLATE.format(out=out))
    for step in ("synth", "preprocess", "features", "stats", "classify", "report"):
        proc = run_cli(step, str(config))
        assert proc.returncode == 0, f"{step} failed:\n{proc.stdout}\n{proc.stderr}"
    return {"out": out, "config": config, "base": base}


class TestSynthOutputs:
    def test_manifest_lists_all_recordings(self, tree):
        rows = read_csv(tree["out"] / "manifest.csv")
        assert rows[0] == ["subject_id", "state", "path", "sample_rate_hz",
                           "hypnogram"]
        body = rows[1:]
        assert len(body) == 6 * 4
        assert {r[1] for r in body} == set(STATES)
        for r in body:
            assert (tree["out"] / r[2]).is_file()
            if r[1] == "nap":
                assert r[4], "nap rows must carry a hypnogram path"
                assert (tree["out"] / r[4]).is_file()
            else:
                assert r[4] == ""

    def test_meta_table(self, tree):
        rows = read_csv(tree["out"] / "meta.csv")
        assert rows[0][0] == "subject_id"
        assert len(rows) - 1 == 6


class TestPreprocessOutputs:
    def test_cleaned_manifest_extends_raw_schema(self, tree):
        rows = read_csv(tree["out"] / "cleaned_manifest.csv")
        assert rows[0] == ["subject_id", "state", "path", "sample_rate_hz",
                           "hypnogram", "total_channels", "retained_channels",
                           "retention_pct", "bad_channels"]
        assert len(rows) - 1 == 24
        for r in rows[1:]:
            assert (tree["out"] / r[2]).is_file()
            assert float(r[3]) == 125.0
            assert int(r[6]) <= int(r[5])

    def test_retention_table(self, tree):
        rows = read_csv(tree["out"] / "retention.csv")
        assert rows[0] == ["state", "n_recordings", "mean_retention_pct",
                           "sem_retention_pct"]
        states = [r[0] for r in rows[1:]]
        assert states == list(STATES)
        for r in rows[1:]:
            assert int(r[1]) == 6
            assert 0.0 <= float(r[2]) <= 100.0


class TestFeatureOutputs:
    def test_power_tables(self, tree):
        for state in STATES:
            rows = read_csv(tree["out"] / "features" / f"features_power_{state}.csv")
            assert len(rows[0]) == 21
            assert rows[0][0] == "subject_id"
            assert rows[0][1] == "frontal_delta"
            n_expected = 4 if state == "nap" else 6
            assert len(rows) - 1 == n_expected

    def test_wpli_and_pac_widths(self, tree):
        wpli = read_csv(tree["out"] / "features" / "features_wpli_pre_nap.csv")
        assert len(wpli[0]) == 61
        pac = read_csv(tree["out"] / "features" / "features_pac_pre_nap.csv")
        assert len(pac[0]) == 26
        assert pac[0][1] == "pac_frontal_frontal"

    def test_nap_exclusions_name_missing_stage_subjects(self, tree):
        rows = read_csv(tree["out"] / "features" / "exclusions_power_nap.csv")
        assert rows[0] == ["subject_id", "reason"]
        excluded = {r[0] for r in rows[1:]}
        # one GS and one PS subject have hypnograms without any N3
        assert excluded == {"s01", "s04"}


class TestStatsOutputs:
    def test_mask_files_cover_every_table(self, tree):
        for family, width in (("power", 20), ("wpli", 60), ("pac", 25)):
            for state in STATES:
                stats = read_csv(
                    tree["out"] / "stats" / f"stats_{family}_{state}.csv")
                assert stats[0] == ["feature", "p_value", "p_adjusted",
                                    "selected"]
                assert len(stats) - 1 == width
                mask = read_csv(
                    tree["out"] / "stats" / f"mask_{family}_{state}.csv")
                assert mask[0] == ["feature", "selected"]
                assert len(mask) - 1 == width
                assert all(r[1] in ("0", "1") for r in mask[1:])


class TestClassifyOutputs:
    def test_report_rows(self, tree):
        rows = read_csv(tree["out"] / "classify" / "report.csv")
        assert rows[0] == ["classifier", "family", "session", "n_subjects",
                           "n_features", "accuracy", "f1", "kappa", "note"]
        body = rows[1:]
        assert len(body) == 12  # one classifier x 3 families x 4 sessions
        assert {r[0] for r in body} == {"svm"}
        assert {(r[1], r[2]) for r in body} == {
            (f, s) for f in ("power", "wpli", "pac") for s in STATES
        }
        for r in body:
            if not r[8].startswith("skipped"):
                assert 0.0 <= float(r[5]) <= 1.0

    def test_report_json_predictions(self, tree):
        doc = json.loads((tree["out"] / "classify" / "report.json").read_text())
        assert set(doc) == {"predictions", "rows"}
        key = "power/pre_nap/svm"
        assert key in doc["predictions"]
        entries = doc["predictions"][key]
        assert len(entries) == 6
        assert set(entries[0]) == {"subject_id", "y_true", "y_pred", "flag"}

    def test_classify_rerun_is_byte_identical(self, tree):
        before_csv = (tree["out"] / "classify" / "report.csv").read_bytes()
        before_json = (tree["out"] / "classify" / "report.json").read_bytes()
        proc = run_cli("classify", str(tree["config"]))
        assert proc.returncode == 0
        assert (tree["out"] / "classify" / "report.csv").read_bytes() == before_csv
        assert (tree["out"] / "classify" / "report.json").read_bytes() == before_json


class TestReportText:
    def test_sections_and_cell_format(self, tree):
        text = (tree["out"] / "report.txt").read_text()
        assert "Classification (ACC / F1 / kappa)" in text
        assert "Channel retention (%)" in text
        for state in STATES:
            assert state in text
        # metric cells render as three two-decimal values
        import re

        assert re.search(r"-?\d\.\d\d / -?\d\.\d\d / -?\d\.\d\d", text)


class TestFailureModes:
    def test_missing_config_is_a_config_error(self):
        proc = run_cli("synth", "/nonexistent/run.ini")
        assert proc.returncode == 2
        assert "config error" in proc.stderr or "config error" in proc.stdout

    def test_nap_without_hypnogram_names_subject(self, tree, tmp_path):
        rows = read_csv(tree["out"] / "manifest.csv")
        for r in rows[1:]:
            if r[0] == "s02" and r[1] == "nap":
                r[4] = ""
        broken = tree["out"] / "broken_manifest.csv"
        with open(broken, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
        config = tmp_path / "broken.ini"
        config.write_text(
            CONFIG_TEMPLATE.format(out=tmp_path / "o2").replace(
                "[preprocess]",
                f"[preprocess]\nmanifest = {broken}",
            )
        )
        proc = run_cli("preprocess", str(config))
        assert proc.returncode == 2
        assert "s02" in proc.stderr + proc.stdout

    def test_unknown_family_rejected(self, tree):
        proc = run_cli("features", str(tree["config"]), "--family", "wavelet")
        assert proc.returncode == 2


class TestEnvOverrides:
    def test_output_dir_env_wins(self, tmp_path):
        config = tmp_path / "run.ini"
        config.write_text(CONFIG_TEMPLATE.format(out=tmp_path / "ignored"))
        alt = tmp_path / "alt"
        proc = run_cli(
            "synth", str(config), env_extra={"SLEEPQ_OUTPUT_DIR": str(alt)}
        )
        assert proc.returncode == 0
        assert (alt / "manifest.csv").is_file()
        assert not (tmp_path / "ignored").exists()


class TestFamilyFlag:
    def test_single_family_only_writes_that_family(self, tree, tmp_path):
        out2 = tmp_path / "fam"
        config = tmp_path / "fam.ini"
        config.write_text(CONFIG_TEMPLATE.format(out=out2))
        for step in ("synth", "preprocess"):
            assert run_cli(step, str(config)).returncode == 0
        proc = run_cli("features", str(config), "--family", "power")
        assert proc.returncode == 0
        feat = out2 / "features"
        assert (feat / "features_power_pre_nap.csv").is_file()
        assert not (feat / "features_wpli_pre_nap.csv").exists()
        assert not (feat / "features_pac_pre_nap.csv").exists()

"""Shared pytest hooks: a per-criterion pass/fail summary for the
acceptance suite, printed after the normal test report."""

ACCEPTANCE_PREFIX = "test_criterion_"

CRITERIA_LABELS = {
    1: "MI analytic anchors",
    2: "PAC monotonicity in coupling strength",
    3: "surrogate null calibration",
    4: "wPLI volume-conduction robustness",
    5: "feature-dimension bookkeeping",
    6: "metric oracle equivalence",
    7: "Mann-Whitney exact enumeration",
    8: "BH-FDR oracle and Bonferroni subset",
    9: "LOSO planted separation and shuffle null",
    10: "logistic gradient check and SVM sign symmetry",
    11: "zero-phase filtering",
    12: "end-to-end determinism",
    13: "table-format reproduction",
}


def _criterion_number(nodeid):
    name = nodeid.split("::")[-1].split("[")[0]
    if not name.startswith(ACCEPTANCE_PREFIX):
        return None
    digits = name[len(ACCEPTANCE_PREFIX):].split("_")[0]
    try:
        return int(digits)
    except ValueError:
        return None


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            num = _criterion_number(getattr(rep, "nodeid", ""))
            if num is None:
                continue
            if getattr(rep, "when", "call") != "call" and status == "passed":
                continue
            ok = status == "passed"
            outcomes[num] = outcomes.get(num, True) and ok
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(outcomes):
        verdict = "PASS" if outcomes[num] else "FAIL"
        label = CRITERIA_LABELS.get(num, "")
        terminalreporter.write_line(f"[criterion {num:2d}] {verdict}  {label}")

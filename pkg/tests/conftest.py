from pathlib import Path

import pytest
import yaml

from imbcredit.datasets import PREDICTORS, TARGET, write_credit_like_csv

# criterion number -> outcomes of the tests marked with it
ACCEPTANCE: dict[int, list[tuple[str, str]]] = {}


def write_config(directory: Path, data: str, **overrides) -> Path:
    doc = {
        "data": data,
        "target": TARGET,
        "predictors": list(PREDICTORS),
        "split": {"train_fraction": 0.7, "fold_count": 3, "seed": 7},
        "tau": {"num": 3},
        "output_dir": "out",
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key] = {**doc[key], **value}
        else:
            doc[key] = value
    path = directory / "config.yaml"
    path.write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def credit_like(tmp_path_factory) -> Path:
    """Small synthetic file in the public credit table's layout."""
    directory = tmp_path_factory.mktemp("credit_like")
    path = directory / "credit.csv"
    write_credit_like_csv(path, n=6000, seed=3)
    return path


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    keys = [m.args[0] for m in item.iter_markers("criterion")]
    if not keys:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if report.skipped:
            reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else ""
            status = ("SKIP", reason.removeprefix("Skipped: "))
        else:
            status = ("PASS" if report.passed else "FAIL", item.name)
        for key in keys:
            ACCEPTANCE.setdefault(key, []).append(status)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        outcomes = ACCEPTANCE[key]
        states = {s for s, _ in outcomes}
        if "FAIL" in states:
            status = "FAIL"
            detail = ", ".join(d for s, d in outcomes if s == "FAIL")
        elif states == {"SKIP"}:
            status, detail = "SKIP", outcomes[0][1]
        else:
            status = "PASS"
            detail = f"{sum(s == 'PASS' for s, _ in outcomes)} checks"
        terminalreporter.write_line(f"criterion {key:>2}: {status}  {detail}")

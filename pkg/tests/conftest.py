from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from synthetic import write_split

from nslids.dataset import LabeledDataset, RawRecord, Split

ZEROS = (0.0,) * 38


def record(numeric=ZEROS, protocol="tcp", service="http", flag="SF", label="normal") -> RawRecord:
    return RawRecord(tuple(float(v) for v in numeric), protocol, service, flag, label, 1)


def make_dataset(records, split=Split.TRAIN) -> LabeledDataset:
    return LabeledDataset.from_records(list(records), split)


def line(label="normal", protocol="tcp", service="http", flag="SF", numeric=ZEROS, difficulty=20) -> str:
    values = [f"{v:g}" for v in numeric]
    fields = [values[0], protocol, service, flag] + values[1:] + [label, str(difficulty)]
    return ",".join(fields)


@pytest.fixture(scope="session")
def synthetic_files(tmp_path_factory) -> tuple[Path, Path]:
    root = tmp_path_factory.mktemp("synthetic")
    train = write_split(root / "KDDTrain+.txt", 3000, seed=11)
    test = write_split(root / "KDDTest+.txt", 1200, seed=12, novel_fraction=0.1)
    return train, test


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


# -- acceptance summary lines ------------------------------------------------
# Tests marked ``criterion(n, title)`` are grouped per criterion; a criterion
# passes only when every test carrying its number passed.

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, title = marker.args
    entry = _CRITERIA.setdefault(num, {"title": title, "failed": [], "passed": 0})
    if rep.failed:
        reason = rep.longrepr.reprcrash.message if hasattr(rep.longrepr, "reprcrash") else str(rep.longrepr)
        entry["failed"].append(f"{item.name}: {reason.splitlines()[0] if reason else rep.when}")
    elif rep.when == "call" and rep.passed:
        entry["passed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        ok = not entry["failed"] and entry["passed"] > 0
        terminalreporter.write_line(f"criterion {num} {'PASS' if ok else 'FAIL'}  {entry['title']}")
        for msg in entry["failed"][:3]:
            terminalreporter.write_line(f"    {msg[:160]}")

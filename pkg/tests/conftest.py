"""Shared fixtures plus one pass/fail summary line per acceptance criterion."""

import numpy as np
import pytest

from xmrbench.data import ImageTensor, Manifest, ReportText, StudyRecord

_acceptance_outcomes: list[tuple[str, bool]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _acceptance_outcomes.append((name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, passed in _acceptance_outcomes:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}")


def make_report(findings="f", impression="i", history="", comparison="", raw=None):
    sections = {}
    for name, text in (("history", history), ("comparison", comparison),
                       ("findings", findings), ("impression", impression)):
        if text:
            sections[name] = text
    return ReportText(sections=sections, raw=raw if raw is not None else str(sections))


def make_study(study_id, n_images=1, **report_kwargs):
    return StudyRecord(
        study_id=study_id,
        image_refs=tuple(f"images/{study_id}_{i}.png" for i in range(n_images)),
        report=make_report(**report_kwargs),
    )


@pytest.fixture
def small_manifest():
    return Manifest(studies=(
        make_study("s1", n_images=2),
        make_study("s2"),
        make_study("s3", impression=""),
    ))


@pytest.fixture
def gray_image():
    rng = np.random.default_rng(7)
    return ImageTensor.from_array(rng.random((12, 10)))


@pytest.fixture
def rgb_image():
    rng = np.random.default_rng(8)
    return ImageTensor.from_array(rng.random((9, 11, 3)))

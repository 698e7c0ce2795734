from __future__ import annotations

import pytest

from speca import bundled

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance_results.append(
            (report.nodeid.split("::")[-1], report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in _acceptance_results:
        label = "PASS" if outcome == "PASSED" else outcome
        terminalreporter.write_line(f"  [{label}] {name}")
from speca.analyzer import AnalyzerHandle
from speca.code_index import ImplementationRef, build_index
from speca.spec_extract import extract_requirements, parse_spec_doc


@pytest.fixture(scope="session")
def minispec_doc():
    raw = bundled.minispec_path().read_text("utf-8")
    return parse_spec_doc(raw, "EIP7594")


@pytest.fixture(scope="session")
def requirements(minispec_doc):
    return extract_requirements(minispec_doc)


@pytest.fixture(scope="session")
def corpus_index():
    refs = [ImplementationRef(impl_id=p.name, root_path=str(p), layer="CL")
            for p in sorted(bundled.corpus_root().iterdir()) if p.is_dir()]
    return build_index(refs)


@pytest.fixture()
def analyzer():
    return AnalyzerHandle(backend="deterministic")

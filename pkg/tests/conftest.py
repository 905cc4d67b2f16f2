import pytest

from passivescope.synth import synthesize

_ACCEPTANCE = []


def record_acceptance(number, title, passed, detail=""):
    _ACCEPTANCE.append((number, title, passed, detail))


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} {detail}".rstrip())


@pytest.fixture
def write_trace(tmp_path):
    """Synthesize ``spec`` into a pcap under tmp_path; returns (path, manifest)."""

    def _write(spec, name="scenario.pcap"):
        data, manifest = synthesize(spec)
        path = tmp_path / name
        path.write_bytes(data)
        return path, manifest

    return _write

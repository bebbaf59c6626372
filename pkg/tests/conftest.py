import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion."""
    def _report(label: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
        return passed
    return _report


@pytest.fixture(scope="session")
def reference_cache(request, tmp_path_factory):
    """Persistent across runs through pytest's cache, else a session temp dir."""
    cache = getattr(request.config, "cache", None)
    if cache is not None:
        return cache.mkdir("mzsplit-references")
    return tmp_path_factory.mktemp("mzsplit-references")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

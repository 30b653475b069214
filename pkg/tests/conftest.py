import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("vqclab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("vqclab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)




_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """``report(criterion, ok, detail)`` prints a PASS/FAIL line and keeps it for the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(criterion: int, ok: bool, detail: str) -> bool:
        line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

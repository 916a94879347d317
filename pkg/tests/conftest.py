import time

import pytest

from zfdd.grape import default_ensemble, figure_of_merit, ideal_pi_pair, optimize_pair, seed_pair

_REPORT = []


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_REPORT, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def report(capsys):
    """Print one PASS/FAIL line per criterion, outside pytest's output capture."""

    def _report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _REPORT.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return _report


@pytest.fixture(scope="session")
def optimized_pair():
    """Default-ensemble pulse pair: 100 ns pulses, 1 ns bins, 20 MHz bound."""
    ens = default_ensemble()
    t0 = time.perf_counter()
    res = optimize_pair(seed_pair(100), ens, max_iters=500)
    wall = time.perf_counter() - t0
    baseline = 1.0 - figure_of_merit(ideal_pi_pair(), ens)
    return res, ens, baseline, wall

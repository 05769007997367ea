import time

import pytest

from coopdecay import IntegratorConfig, SystemParams, run

# Geometries with a positive inter-atom term at every optical depth used here.
REFERENCE = {100: (10.0, 10.0), 1000: (25.0, 40.0), 10000: (250.0, 40.0)}

_acceptance_key = pytest.StashKey[list]()


def reference_params(eta, **kw):
    C, rho = REFERENCE[eta]
    return SystemParams(C=C, rho_size=rho, **kw)


@pytest.fixture(scope="session")
def reference_runs():
    """Full runs at eta = 1e2, 1e3, 1e4 and their wall times."""
    cfg = IntegratorConfig(t_end=100.0)
    runs, wall = {}, {}
    for eta in REFERENCE:
        t0 = time.perf_counter()
        runs[eta] = run(reference_params(eta), cfg)
        wall[eta] = time.perf_counter() - t0
    return runs, wall


@pytest.fixture(scope="session")
def short_run():
    return run(reference_params(100), IntegratorConfig(t_end=1.0))


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for the terminal summary and return the verdict."""
    lines = request.config.stash.setdefault(_acceptance_key, [])

    def report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_acceptance_key, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)

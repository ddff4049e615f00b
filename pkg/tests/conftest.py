import pytest

CRITERIA = {
    1: "Gaussian fixed point",
    2: "sup-norm convergence, Laplace",
    3: "Fourier L1 convergence and Bernstein bridge",
    4: "exact small-N oracle (triangle, Irwin-Hall)",
    5: "cross-method equivalence",
    6: "condition checker ground truth",
    7: "domination and dominator integral",
    8: "mass and variance conservation",
    9: "Monte Carlo consistency",
    10: "sigma > 1 limit identification",
}

_outcomes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    failed = rep.failed or (rep.when == "call" and rep.skipped)
    if rep.when == "call" or failed:
        ok = _outcomes.setdefault(n, [])
        ok.append((item.name, not failed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        passed = all(ok for _, ok in results)
        tr.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {n:>2}: {CRITERIA[n]}")
        if not passed:
            for name, ok in results:
                if not ok:
                    tr.write_line(f"        failing: {name}")

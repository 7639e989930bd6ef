import math
from collections import defaultdict

import pytest
from hypothesis import HealthCheck, settings

from hypgraph import barriers as bar
from hypgraph import geometry as geo
from hypgraph import solver as sol

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CRITERIA = {
    1: "ball oracle: max error 5e-3 at h=1/128, order >= 0.9, runtime <= 60 s",
    2: "radial identity <= 1e-10 at 100 random (R, n, r)",
    3: "b = 2 cancellations to 1e-12",
    4: "power barrier certification and doubled-eps failure",
    5: "flat barrier bound for n = 2..5",
    6: "local barrier: Phi(A) <= 0 and F[W] <= 1e-12",
    7: "disk exponent 1/2 and sqrt(2) constant, Hölder lift = 4",
    8: "square exponent 1/3 and (n+1)^2 d^(1/(n+1)) bound",
    9: "classification round trip",
    10: "comparison with certified barriers",
    11: "local axis estimate on the a = 1.5 cap",
}

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number")


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if hasattr(report, "wasxfail"):
            state = "xfail"
        else:
            state = report.outcome
        _outcomes[crit].append((report.nodeid.split("::")[-1], state))


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", int(m.args[0])))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        results = _outcomes.get(k)
        if not results:
            continue
        ok = all(state == "passed" for _, state in results)
        failed = [name for name, state in results if state != "passed"]
        tail = "" if ok else "  (not met: " + ", ".join(failed) + ")"
        terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}: {CRITERIA[k]}{tail}")


# --------------------------------------------------------------------------
# shared solves (session scoped; the fine grids take tens of seconds)
# --------------------------------------------------------------------------


@pytest.fixture(scope="session")
def disk_solutions():
    """Unit-disk solves at h = 1/32, 1/64, 1/128 with wall times."""
    import time

    out = {}
    for k in (32, 64, 128):
        t0 = time.perf_counter()
        s = sol.newton_solve(sol.build_grid(geo.disk(), 1.0 / k))
        out[k] = (s, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def disk_solution(disk_solutions):
    return disk_solutions[128][0]


@pytest.fixture(scope="session")
def square_solution():
    return sol.newton_solve(sol.build_grid(geo.unit_square(), 1.0 / 256), sol.SolverConfig(tau_min=1e-4))


@pytest.fixture(scope="session")
def square_coarse():
    return sol.newton_solve(sol.build_grid(geo.unit_square(), 1.0 / 64), sol.SolverConfig(keep_stages=True))


@pytest.fixture(scope="session")
def cap3_solution():
    dom = geo.power_cap(3.0, 1.0, 0.5)
    return sol.newton_solve(sol.build_grid(dom, dom.scale / 128))


@pytest.fixture(scope="session")
def local_cap():
    """The a = 1.5 cap rescaled for b = 7/3 (delta = 1/4), and its solve."""
    dom = geo.power_cap(1.5, 1.0, 1.0)
    scaling = bar.choose_A(1.5, 1.0, geo.diameter(dom), 2, 7.0 / 3.0)
    scaled = scaling.scale_domain(dom)
    s = sol.newton_solve(sol.build_grid(scaled, scaled.scale / 128))
    return scaling, scaled, s


@pytest.fixture(scope="session")
def lens_solution():
    dom = geo.lens()
    return sol.newton_solve(sol.build_grid(dom, dom.scale / 96))


INF = math.inf

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypgraph import geometry as geo
from hypgraph import solver as sol

# the disk solve has max second difference about -0.03 h
CONCAVITY_C = 0.1


# --------------------------------------------------------------------------
# grid
# --------------------------------------------------------------------------


def test_disk_grid_counts_area():
    h = 1 / 64
    g = sol.build_grid(geo.disk(), h)
    assert abs(g.size - math.pi / h**2) <= 0.02 * math.pi / h**2


def test_coarse_grid_rejected():
    with pytest.raises(sol.GridError, match="grid too coarse"):
        sol.build_grid(geo.disk(), 0.5)


def test_planar_only():
    with pytest.raises(sol.GridError):
        sol.build_grid(geo.power_cap(3.0, 1.0, 0.5, n=3), 0.01)


def test_square_grid_has_full_arms():
    # the walls are lattice lines, so every arm ends exactly on a node
    g = sol.build_grid(geo.unit_square(), 1 / 64)
    assert g.size == 63 * 63
    assert np.all(g.arms == 1.0)


@pytest.mark.parametrize("dom", [geo.disk(), geo.ellipse(), geo.lens(), geo.power_cap(1.5, 1.0, 1.0)], ids=["disk", "ellipse", "lens", "cap"])
def test_grid_invariants(dom):
    g = sol.build_grid(dom, dom.scale / 40)
    assert np.all(geo.contains(dom, g.points))
    assert np.all((g.arms > 0) & (g.arms <= 1))
    for k, (di, dj) in enumerate(((1, 0), (-1, 0), (0, 1), (0, -1))):
        nb_interior = g.status[g.ij[:, 0] + di, g.ij[:, 1] + dj] == sol.INTERIOR
        assert np.all(g.arms[nb_interior, k] == 1.0)
    assert g.components == 1
    assert np.allclose(g.dist, geo.boundary_distance(dom, g.points), atol=1e-9)


# --------------------------------------------------------------------------
# residual and Jacobian
# --------------------------------------------------------------------------


@given(c=st.floats(0.05, 5.0), n=st.integers(2, 6))
def test_constant_field_residual(c, n):
    g = sol.build_grid(geo.disk(), 1 / 16)
    F = sol.residual_F(g, np.full(g.size, c), c, n)
    assert np.allclose(F, n / c, rtol=1e-12)


def test_linear_field_residual_away_from_walls():
    g = sol.build_grid(geo.unit_square(), 1 / 32)
    u = 1 + 0.1 * g.points[:, 0]
    F = sol.residual_F(g, u, 1.0, 2)
    i, j = g.ij[:, 0], g.ij[:, 1]
    deep = np.all([g.status[i + di, j + dj] == sol.INTERIOR for di in (-1, 0, 1) for dj in (-1, 0, 1)], axis=0)
    assert deep.sum() > 800
    assert np.allclose(F[deep], 2 / u[deep], rtol=1e-10)


def test_nonpositive_field_rejected():
    g = sol.build_grid(geo.disk(), 1 / 16)
    with pytest.raises(sol.SolverError, match="singular term undefined"):
        sol.residual_F(g, np.zeros(g.size), 0.1)


def test_ball_solution_residual_converges():
    tau = 0.01
    errs = []
    for k in (32, 64, 128):
        g = sol.build_grid(geo.disk(), 1 / k)
        # the radius-sqrt(1 + tau^2) ball solution equals tau on the unit circle
        u = np.sqrt(1 + tau**2 - np.sum(g.points**2, axis=1))
        F = sol.residual_F(g, u, tau, 2)
        errs.append(np.max(np.abs(F[g.dist >= 0.1])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.9)


def test_jacobian_matches_finite_differences():
    g = sol.build_grid(geo.lens(), 1 / 12)
    tau = 0.05
    u = 0.9 * sol.enclosing_ball_guess(g, tau) + 0.01
    F, J = sol.jacobian_F(g, u, tau, 3)
    assert np.allclose(F, sol.residual_F(g, u, tau, 3))
    J = J.toarray()
    step = 1e-6
    fd = np.empty_like(J)
    for k in range(g.size):
        e = np.zeros(g.size)
        e[k] = step
        fd[:, k] = (sol.residual_F(g, u + e, tau, 3) - sol.residual_F(g, u - e, tau, 3)) / (2 * step)
    assert np.max(np.abs(J - fd)) <= 1e-7 * np.max(np.abs(J))


# --------------------------------------------------------------------------
# continuation
# --------------------------------------------------------------------------


def test_schedule():
    taus = sol.SolverConfig().schedule(2.0)
    assert taus[0] == pytest.approx(0.1) and taus[-1] == pytest.approx(2e-3)
    assert all(a > b > 0 for a, b in zip(taus, taus[1:]))
    with pytest.raises(ValueError):
        sol.SolverConfig(tau_ratio=1.0)
    with pytest.raises(ValueError):
        sol.SolverConfig(tol=0.0)


def test_newton_failure_reports_stage():
    g = sol.build_grid(geo.disk(), 1 / 32)
    with pytest.raises(sol.SolverError, match="tau="):
        sol.newton_solve(g, sol.SolverConfig(max_iter=1))


def test_square_solution_is_symmetric(square_coarse):
    s = square_coarse
    L = s.lattice()
    for M in (L[::-1, :], L[:, ::-1], L.T):
        assert np.nanmax(np.abs(M - L)) <= 1e-8


def test_monotone_in_lift_and_positive(square_coarse):
    s = square_coarse
    us = [u for _, u in s.stages]
    for prev, nxt in zip(us, us[1:]):
        assert np.all(nxt <= prev + 1e-8)
    assert np.all(s.u >= s.tau * (1 - 1e-12))


def test_below_enclosing_ball(square_coarse, lens_solution):
    for s in (square_coarse, lens_solution):
        assert np.all(s.u <= sol.enclosing_ball_guess(s.grid, s.tau) + 1e-6)


@pytest.mark.parametrize("fixture", ["square_coarse", "lens_solution"])
def test_concave_along_grid_lines(fixture, request):
    s = request.getfixturevalue(fixture)
    # interior triples only; the lifted boundary nodes are not values of u
    L = np.where(s.grid.status == sol.INTERIOR, s.lattice(), np.nan)
    for M in (L, L.T):
        d2 = M[2:] - 2 * M[1:-1] + M[:-2]
        assert np.nanmax(d2) <= CONCAVITY_C * s.grid.h


def test_rigid_motion_equivariance():
    h = 1 / 32
    base = geo.disk(1.0, (0.25, 0.0))
    Q = np.array([[0.0, -1.0], [1.0, 0.0]])
    t = np.array([3 * h, -5 * h])
    moved = base.transformed(Q, t)
    s0 = sol.newton_solve(sol.build_grid(base, h))
    s1 = sol.newton_solve(sol.build_grid(moved, h))
    assert s0.grid.size == s1.grid.size
    ij = np.rint((s0.points @ Q.T + t - s1.grid.origin) / h).astype(int)
    idx = s1.grid.index[ij[:, 0], ij[:, 1]]
    assert np.all(idx >= 0)
    assert np.max(np.abs(s1.u[idx] - s0.u)) <= 1e-8


def test_interpolation_reproduces_nodes(square_coarse):
    s = square_coarse
    assert np.allclose(s.interpolate(s.points), s.u, atol=1e-14)
    assert np.isnan(s.interpolate(np.array([[2.0, 2.0]])))[0]


# --------------------------------------------------------------------------
# balls
# --------------------------------------------------------------------------


def test_exact_ball_solution_examples():
    assert sol.exact_ball_solution(1.0, [0.0, 0.0]) == 1.0
    assert sol.exact_ball_solution(1.0, [1.0, 0.0]) == 0.0
    assert sol.exact_ball_solution(2.0, [math.sqrt(3), 0.0]) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        sol.exact_ball_solution(1.0, [1.5, 0.0])


def test_radial_residual_examples():
    assert abs(sol.radial_residual(1.0, 2, 0.5)) <= 1e-12
    assert abs(sol.radial_residual(1.0, 7, 0.9)) <= 1e-10
    assert abs(sol.radial_residual(3.0, 2, 1.5)) <= 1e-12
    for r in (0.0, 1.0):
        with pytest.raises(ValueError):
            sol.radial_residual(1.0, 2, r)


@given(R=st.floats(0.1, 10.0), n=st.integers(2, 7), s=st.floats(1e-3, 0.999))
def test_radial_identity(R, n, s):
    assert abs(float(sol.radial_residual(R, n, s * R))) <= 1e-10


@pytest.mark.parametrize("R,n", [(1.0, 2), (2.0, 3), (1.0, 6)])
def test_radial_profile_matches_ball(R, n):
    p = sol.solve_radial(R, n)
    inner = p.r <= 0.95 * R
    assert np.max(np.abs(p.u[inner] - np.sqrt(R * R - p.r[inner] ** 2))) <= 1e-4
    assert p.u[0] == pytest.approx(R, abs=1e-4)
    assert p.u[-1] == pytest.approx(p.tau, abs=1e-12)
    assert np.all(np.diff(p.u) < 0)
    assert len(p.r) >= 512


def test_radial_input_checks():
    with pytest.raises(ValueError):
        sol.solve_radial(1.0, 1)
    with pytest.raises(ValueError):
        sol.solve_radial(-1.0, 2)

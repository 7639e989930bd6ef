import csv
import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypgraph import barriers as bar
from hypgraph import geometry as geo
from hypgraph import regularity as reg
from hypgraph import solver as sol


def synthetic(d, u):
    d = np.asarray(d, float)
    return reg.BoundaryProfile(np.zeros(2), np.array([1.0, 0.0]), d, np.asarray(u, float), 0.0)


# --------------------------------------------------------------------------
# fits
# --------------------------------------------------------------------------


def test_power_law_recovered():
    d = np.geomspace(1e-4, 1e-1, 40)
    fit = reg.fit_holder_exponent(synthetic(d, 3 * d ** (1 / 3)))
    assert fit.alpha == pytest.approx(1 / 3, abs=1e-10)
    assert fit.C == pytest.approx(3, abs=1e-9)
    assert fit.rms < 1e-12


def test_lipschitz_profile():
    d = np.geomspace(1e-3, 1e-1, 40)
    noise = np.random.default_rng(0).uniform(-1, 1, d.size)
    fit = reg.fit_holder_exponent(synthetic(d, d * (1 + 1e-6 * noise)))
    assert fit.alpha == pytest.approx(1.0, abs=1e-4)


def test_exact_disk_profile():
    d = np.geomspace(1e-3, 1e-2, 32)
    fit = reg.fit_holder_exponent(synthetic(d, np.sqrt(2 * d - d * d)))
    assert fit.alpha == pytest.approx(0.5, abs=0.01)


@given(alpha=st.floats(0.05, 1.0), C=st.floats(0.1, 20.0), lo=st.floats(-6, -2))
def test_fit_consistency(alpha, C, lo):
    d = np.geomspace(10.0**lo, 10.0 ** (lo + 2), 24)
    fit = reg.fit_holder_exponent(synthetic(d, C * d**alpha))
    assert fit.alpha == pytest.approx(alpha, abs=1e-9)
    assert fit.C == pytest.approx(C, rel=1e-9)


def test_fit_refusals():
    with pytest.raises(reg.EstimationError, match="at least 8"):
        reg.fit_holder_exponent(synthetic([0.1], [0.3]))
    d = np.geomspace(1e-3, 1e-1, 10)
    u = np.sqrt(d)
    u[3] = 0.0
    with pytest.raises(reg.EstimationError, match="nonpositive"):
        reg.fit_holder_exponent(synthetic(d, u))
    with pytest.raises(reg.EstimationError):
        synthetic([0.2, 0.1], [1.0, 1.0])


def test_single_sample_profile_cannot_be_fitted(disk_solution):
    prof = reg.extract_profile(disk_solution, [1.0, 0.0], m=1)
    assert len(prof) == 1
    with pytest.raises(reg.EstimationError):
        reg.fit_holder_exponent(prof)


def test_empty_window():
    s = sol.newton_solve(sol.build_grid(geo.disk(), 1 / 32))
    with pytest.raises(reg.EstimationError, match="insufficient resolution"):
        reg.extract_profile(s, [1.0, 0.0], window=(0.2, 0.1))


def test_predicted_exponent():
    assert reg.predicted_exponent(2, 2) == 0.5
    assert reg.predicted_exponent(math.inf, 2) == pytest.approx(1 / 3)
    assert reg.predicted_exponent(3, 5) == pytest.approx(1 / 3)
    with pytest.raises(reg.EstimationError):
        reg.predicted_exponent(1.5, 2)


def test_holder_lift():
    # sqrt(2) * sqrt(2) rounds one ulp away from 2
    assert reg.holder_lift(math.sqrt(2), 0.5, 2.0) == pytest.approx(4.0, rel=1e-15)
    assert reg.holder_lift(9.0, 1 / 3, 1.0) == 18.0
    assert reg.holder_lift(1.0, 1.0, 1.0) == 2.0
    with pytest.raises(reg.EstimationError):
        reg.holder_lift(1.0, 0.0, 1.0)


@given(R=st.floats(0.1, 10.0), d=st.floats(0.1, 10.0))
def test_lift_identity(R, d):
    assert reg.holder_lift(math.sqrt(2 * R), 0.5, d) == pytest.approx(2 * math.sqrt(2 * R * d), rel=1e-14)


def test_profile_csv(tmp_path):
    d = np.geomspace(1e-3, 1e-1, 9)
    path = reg.write_profile_csv(synthetic(d, np.sqrt(d)), tmp_path / "p.csv")
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["d", "u"] and len(rows) == 10
    assert float(rows[5][0]) == d[4]


# --------------------------------------------------------------------------
# on computed solutions
# --------------------------------------------------------------------------


@pytest.mark.xfail(strict=True, reason="near-wall discretisation error at h = 1/128 is about 1e-2")
def test_disk_profile_matches_exact(disk_solution):
    prof = reg.extract_profile(disk_solution, [1.0, 0.0])
    assert np.max(np.abs(prof.u - np.sqrt(2 * prof.d - prof.d**2))) <= 5e-3


def test_square_profile_increases(square_solution):
    prof = reg.extract_profile(square_solution, [0.5, 0.0], m=48)
    assert np.all(np.diff(prof.u) > 0)


@pytest.mark.parametrize("z", [[1.0, 0.0], [0.0, -1.0]])
def test_disk_window_halving(disk_solution, z):
    rep = reg.exponent_report(disk_solution, z, 0.5)
    assert abs(rep.half_fit.alpha - rep.fit.alpha) <= reg.HALVING_TOL
    assert not rep.unresolved
    assert rep.fit.alpha >= 0.5 - 0.03


def test_square_exponent_ordering(square_solution):
    rep = reg.exponent_report(square_solution, [0.5, 0.0], reg.predicted_exponent(math.inf, 2))
    assert 1 / 3 - 0.05 <= rep.fit.alpha <= 1 / 3 + 0.05
    d = rep.to_dict()
    assert d["predicted_alpha"] == pytest.approx(1 / 3) and d["pass"]


def test_disk_sup_ratio_upper(disk_solution):
    rep = reg.check_constant_bound(disk_solution, "a2", R=1.0)
    assert rep.sup_ratio <= math.sqrt(2) + 5e-3
    assert rep.passed


@pytest.mark.xfail(strict=True, reason="u is about 1e-2 low next to the wall at h = 1/128")
def test_disk_sup_ratio_two_sided(disk_solution):
    rep = reg.check_constant_bound(disk_solution, "a2", R=1.0)
    assert abs(rep.sup_ratio - math.sqrt(2)) <= 5e-3


def test_pointwise_a2_bound(disk_solution, lens_solution):
    for s in (disk_solution, lens_solution):
        rep = reg.check_constant_bound(s, "a2")
        assert rep.min_margin >= 0


def test_synthetic_violation_fails(disk_solution):
    fake = dataclasses.replace(disk_solution, u=10 * np.sqrt(disk_solution.dist))
    assert not reg.check_constant_bound(fake, "a2", R=1.0).passed


def test_square_flat_bound(square_solution):
    rep = reg.check_constant_bound(square_solution, "a_inf")
    assert rep.scale == pytest.approx(math.sqrt(2), rel=1e-9)
    assert rep.min_margin >= 0 and rep.passed


def test_classification_mismatch(square_coarse, lens_solution):
    with pytest.raises(reg.EstimationError, match="classification mismatch"):
        reg.check_constant_bound(square_coarse, "a2")
    with pytest.raises(reg.EstimationError, match="classification mismatch"):
        reg.check_constant_bound(lens_solution, "a_inf")
    with pytest.raises(reg.EstimationError):
        reg.check_constant_bound(lens_solution, "b7")


def test_local_estimate_guards(local_cap):
    scaling, scaled, s = local_cap
    with pytest.raises(reg.EstimationError, match="admissible delta"):
        reg.check_local_estimate(s, [0.0, 0.0], 1.5, 1.0, scaling)
    with pytest.raises(reg.EstimationError):
        reg.check_local_estimate(s, [0.0, 0.0], 2.5, 0.25, scaling)
    big = sol.newton_solve(sol.build_grid(geo.power_cap(1.5, 1.0, 1.0), 1 / 32))
    with pytest.raises(reg.EstimationError, match="rescaled domain"):
        reg.check_local_estimate(big, [0.0, 0.0], 1.5, 0.25, scaling)


def test_comparison_with_ball(disk_solution):
    rep = reg.check_comparison(disk_solution, bar.ball_barrier(geo.disk(), 1.0))
    assert rep.passed and rep.max_diff <= 1e-6


def test_uncertified_barrier_is_flagged(square_coarse):
    field = bar.BarrierField("big", lambda x: np.full(x.shape[:-1], 100.0), certified=False)
    rep = reg.check_comparison(square_coarse, field)
    assert rep.max_diff < 0 and not rep.passed


def test_barrier_must_cover_domain(square_coarse):
    field = bar.BarrierField("half", lambda x: np.where(x[:, 0] < 0.5, 1.0, np.nan))
    with pytest.raises(reg.EstimationError, match="does not cover"):
        reg.check_comparison(square_coarse, field)

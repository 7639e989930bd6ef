"""Boundary behaviour of computed solutions.

Profiles ``d -> u(z + d nu)`` along inward normals are fitted by power laws
``u ~ C d^alpha`` and compared with the predicted boundary exponent
``max(1/a, 1/(n+1))``.  The module also checks explicit pointwise bounds
(``sqrt(2 R d)`` for domains with an exterior sphere, ``(n+1)^2 d^(1/(n+1))``
for flat contact), the local axis estimate at ``(a, eta)`` points with
``a in (1, 2)``, and comparison against barrier fields.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import barriers as bar
from . import geometry as geo
from .solver import Solution

MIN_FIT_SAMPLES = 8
HALVING_TOL = 0.02


class EstimationError(ValueError):
    pass


# --------------------------------------------------------------------------
# profiles and fits
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryProfile:
    anchor: np.ndarray
    direction: np.ndarray
    d: np.ndarray
    u: np.ndarray
    tau: float

    def __post_init__(self):
        if len(self.d) != len(self.u):
            raise EstimationError("profile arrays differ in length")
        if len(self.d) > 1 and not np.all(np.diff(self.d) > 0):
            raise EstimationError("profile distances must increase strictly")

    def __len__(self):
        return len(self.d)

    def restrict(self, d_min: float, d_max: float) -> "BoundaryProfile":
        keep = (self.d >= d_min * (1 - 1e-12)) & (self.d <= d_max * (1 + 1e-12))
        return BoundaryProfile(self.anchor, self.direction, self.d[keep], self.u[keep], self.tau)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d", "u"])
            for d, u in zip(self.d, self.u):
                w.writerow([repr(float(d)), repr(float(u))])


def default_window(solution: Solution, d_omega: float | None = None) -> tuple[float, float]:
    """Fit window ``[max(10 tau, 3 h), 0.05 d]`` with ``d`` the diameter.

    Below ``10 tau`` the lift dominates; below a few cells the bilinear
    interpolant sees the cut-cell layer; above a few percent of the diameter
    the profile bends away from its leading power.
    """
    d_omega = d_omega or geo.diameter(solution.grid.domain)
    return max(10.0 * solution.tau, 3.0 * solution.grid.h), 0.05 * d_omega


def extract_profile(
    solution: Solution,
    z,
    m: int = 32,
    window: tuple[float, float] | None = None,
    direction=None,
) -> BoundaryProfile:
    """Sample ``u`` by bilinear interpolation at ``m`` log-spaced distances
    along the inward normal (bisector at corners) from the boundary point ``z``."""
    dom = solution.grid.domain
    z = np.asarray(z, float)
    if direction is None:
        direction = -geo.outward_normal(dom, z, tol=1e-7 * dom.scale)
    direction = np.asarray(direction, float)
    direction = direction / np.linalg.norm(direction)
    d_min, d_max = window if window is not None else default_window(solution)
    # stay inside: stop halfway across along this direction
    start = z + 1e-9 * dom.scale * direction
    across = float(geo.ray_exit(dom, start, direction))
    d_max = min(d_max, 0.5 * across)
    if not (d_max > d_min > 0):
        raise EstimationError("insufficient resolution: empty fit window")
    d = np.geomspace(d_min, d_max, m) if m > 1 else np.array([d_min])
    pts = z + d[:, None] * direction
    u = solution.interpolate(pts)
    ok = np.isfinite(u) & geo.contains(dom, pts)
    if not np.any(ok):
        raise EstimationError("insufficient resolution: no interpolable samples in the window")
    return BoundaryProfile(z, direction, d[ok], u[ok], solution.tau)


@dataclass(frozen=True)
class ExponentFit:
    alpha: float
    C: float
    rms: float
    window: tuple
    samples: int


def fit_holder_exponent(profile: BoundaryProfile) -> ExponentFit:
    """Least squares of ``log u`` on ``log d``: slope ``alpha``, ``C = exp(intercept)``."""
    if len(profile) < MIN_FIT_SAMPLES:
        raise EstimationError(f"need at least {MIN_FIT_SAMPLES} samples, got {len(profile)}")
    if np.any(~(profile.u > 0)):
        raise EstimationError("nonpositive u sample")
    x = np.log(profile.d)
    y = np.log(profile.u)
    (alpha, c0), res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(float(res[0]) / len(x)) if len(res) else 0.0
    return ExponentFit(float(alpha), math.exp(c0), rms, (float(profile.d[0]), float(profile.d[-1])), len(x))


def predicted_exponent(a: float, n: int) -> float:
    """``max(1/a, 1/(n+1))`` for ``a >= 2`` (``a = inf`` allowed)."""
    if not a >= 2:
        raise EstimationError(f"exponent prediction needs a >= 2, got {a}")
    return max(0.0 if math.isinf(a) else 1.0 / a, 1.0 / (n + 1))


@dataclass
class ExponentReport:
    profile: BoundaryProfile
    fit: ExponentFit
    half_fit: ExponentFit | None
    predicted: float | None
    tol: float
    flags: list = field(default_factory=list)

    @property
    def unresolved(self) -> bool:
        return "unresolved boundary layer" in self.flags

    @property
    def passed(self) -> bool:
        if self.unresolved or self.predicted is None:
            return False
        return abs(self.fit.alpha - self.predicted) <= self.tol

    def to_dict(self):
        return {
            "anchor": self.profile.anchor.tolist(),
            "direction": self.profile.direction.tolist(),
            "window": list(self.fit.window),
            "alpha": self.fit.alpha,
            "C": self.fit.C,
            "rms": self.fit.rms,
            "alpha_half_window": None if self.half_fit is None else self.half_fit.alpha,
            "predicted_alpha": self.predicted,
            "tolerance": self.tol,
            "flags": list(self.flags),
            "pass": self.passed,
        }


def exponent_report(
    solution: Solution,
    z,
    predicted: float | None,
    m: int = 32,
    window: tuple[float, float] | None = None,
    tol: float = 0.05,
) -> ExponentReport:
    """Fit at ``z`` and repeat on the lower half (in log scale) of the window;
    a change above ``0.02`` flags an unresolved boundary layer."""
    prof = extract_profile(solution, z, m, window)
    fit = fit_holder_exponent(prof)
    lo, hi = prof.d[0], prof.d[-1]
    half = prof.restrict(lo, math.sqrt(lo * hi))
    flags = []
    half_fit = None
    if len(half) >= MIN_FIT_SAMPLES:
        half_fit = fit_holder_exponent(half)
        if abs(half_fit.alpha - fit.alpha) > HALVING_TOL:
            flags.append("unresolved boundary layer")
    else:
        flags.append("window too short for the halving check")
    return ExponentReport(prof, fit, half_fit, predicted, tol, flags)


# --------------------------------------------------------------------------
# explicit constants
# --------------------------------------------------------------------------


def holder_lift(M: float, alpha: float, d_omega: float) -> float:
    """Hölder bound ``2 M d^alpha`` implied by ``|u| <= M d_x^alpha``.

    The same number bounds the seminorm and, since ``u`` vanishes on the
    boundary, the sup-plus-seminorm norm up to the factor reported alongside.
    """
    if not (0 < alpha <= 1 and M > 0):
        raise EstimationError("need alpha in (0, 1] and M > 0")
    return 2.0 * M * d_omega**alpha


@dataclass(frozen=True)
class ConstantBoundReport:
    kind: str
    scale: float  # lengths divided by this before comparing
    sup_ratio: float  # sup u / d^alpha over the checked points
    bound: float  # the constant M
    min_margin: float  # min of M d^alpha (+ tol) - u
    holder_bound: float
    tol: float
    points: int

    @property
    def passed(self) -> bool:
        return self.sup_ratio <= self.bound + self.tol and self.min_margin >= 0

    def to_dict(self):
        return {
            "kind": self.kind,
            "scale": self.scale,
            "sup_ratio": self.sup_ratio,
            "bound": self.bound,
            "min_margin": self.min_margin,
            "holder_bound": self.holder_bound,
            "tol": self.tol,
            "points": self.points,
            "pass": self.passed,
        }


def check_constant_bound(
    solution: Solution,
    kind: str,
    R: float | None = None,
    d_omega: float | None = None,
    classification: tuple | None = None,
    tol: float = 5e-3,
) -> ConstantBoundReport:
    """Check the explicit distance bounds.

    ``kind="a2"``: ``u <= sqrt(2R) sqrt(d) + tol`` everywhere and
    ``sup u/sqrt(d) <= sqrt(2R) + tol`` over ``d >= 10 tau`` (closer to the
    boundary the lift makes the ratio meaningless).
    ``kind="a_inf"``: after dividing lengths by ``max(d_omega, 1)``,
    ``u <= (n+1)^2 d^(1/(n+1))`` with no tolerance.
    """
    dom = solution.grid.domain
    d_omega = d_omega or geo.diameter(dom)
    a_cls = classification[0] if classification is not None else geo.classify_domain(dom, 64)[0]
    u, d = solution.u, solution.dist
    if kind == "a2":
        if a_cls != 2:
            raise EstimationError(f"classification mismatch: bound needs a = 2, domain has a = {a_cls}")
        if R is None:
            R = geo.exterior_sphere_radius(dom)
            if R is None:
                raise EstimationError("no exterior sphere radius available")
        M = math.sqrt(2.0 * R)
        far = d >= 10.0 * solution.tau
        sup = float(np.max(u[far] / np.sqrt(d[far])))
        margin = float(np.min(M * np.sqrt(d) + tol - u))
        return ConstantBoundReport(kind, 1.0, sup, M, margin, holder_lift(M, 0.5, d_omega), tol, int(far.sum()))
    if kind == "a_inf":
        if not math.isinf(a_cls):
            raise EstimationError(f"classification mismatch: bound needs a = inf, domain has a = {a_cls}")
        n = solution.n
        s = max(d_omega, 1.0)
        p = 1.0 / (n + 1)
        M = float((n + 1) ** 2)
        ut, dt = u / s, d / s
        sup = float(np.max(ut / dt**p))
        margin = float(np.min(M * dt**p - ut))
        return ConstantBoundReport(kind, s, sup, M, margin, holder_lift(M, p, d_omega), 0.0, len(u))
    raise EstimationError(f"unknown bound kind {kind!r}")


# --------------------------------------------------------------------------
# local estimate on the rescaled cap
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalEstimateReport:
    a: float
    delta: float
    b: float
    bound_exponent: float  # 2/(ab) = 1/(a + delta)
    max_ratio: float  # max u(0, x_n) / x_n^(2/(ab)) over axis nodes
    alpha: float  # fitted axis exponent
    axis_points: int
    window: tuple

    @property
    def passed(self) -> bool:
        return self.max_ratio <= 1.0 + 1e-3 and self.alpha >= self.bound_exponent - 0.05

    def to_dict(self):
        return {
            "a": self.a,
            "delta": self.delta,
            "b": self.b,
            "bound_exponent": self.bound_exponent,
            "max_ratio": self.max_ratio,
            "alpha": self.alpha,
            "axis_points": self.axis_points,
            "window": list(self.window),
            "pass": self.passed,
        }


def axis_nodes(solution: Solution, x0, direction) -> tuple[np.ndarray, np.ndarray]:
    """Grid nodes lying on the ray ``x0 + t direction``: returns ``(t, u)``."""
    w = solution.points - np.asarray(x0, float)
    t = w @ direction
    off = np.linalg.norm(w - t[:, None] * direction, axis=1)
    on = (off <= 1e-9 * solution.grid.h) & (t > 0)
    order = np.argsort(t[on])
    return t[on][order], solution.u[on][order]


def check_local_estimate(
    solution: Solution,
    x0,
    a: float,
    delta: float,
    scaling: bar.LocalScaling,
    window: tuple[float, float] | None = None,
) -> LocalEstimateReport:
    """Compare ``u`` on the inward axis at ``x0`` with ``x_n^(2/(ab))``,
    ``b = 2(a + delta)/a``, and fit the axis exponent.

    The solution must live on the rescaled domain, which lies in
    ``{|x'|^a <= x_n <= A}``.
    """
    if not 1 < a < 2:
        raise EstimationError("the local estimate is for a in (1, 2)")
    try:
        b = bar.delta_to_b(a, delta)
    except bar.BarrierError as exc:
        raise EstimationError(str(exc)) from exc
    dom = solution.grid.domain
    height = float(np.max(geo.boundary_samples(dom, 1024) @ -geo.outward_normal(dom, np.asarray(x0, float), tol=1e-7 * dom.scale)))
    if height > scaling.A * (1 + 1e-6):
        raise EstimationError(f"solution domain reaches height {height:.3e} above A = {scaling.A:.3e}; solve on the rescaled domain")
    direction = -geo.outward_normal(dom, np.asarray(x0, float), tol=1e-7 * dom.scale)
    t, u = axis_nodes(solution, x0, direction)
    if len(t) < MIN_FIT_SAMPLES:
        raise EstimationError("insufficient resolution: too few nodes on the axis")
    k = 2.0 / (a * b)
    ratio = float(np.max(u / t**k))
    if window is None:
        window = (max(10.0 * solution.tau, 3.0 * solution.grid.h), 0.2 * height)
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < MIN_FIT_SAMPLES:
        raise EstimationError("insufficient resolution: too few axis nodes in the fit window")
    prof = BoundaryProfile(np.asarray(x0, float), direction, t[sel], u[sel], solution.tau)
    fit = fit_holder_exponent(prof)
    return LocalEstimateReport(a, delta, b, k, ratio, fit.alpha, len(t), fit.window)


# --------------------------------------------------------------------------
# comparison with barriers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonReport:
    barrier: str
    max_diff: float  # max over grid nodes of u - W
    tol: float
    certified: bool | None
    worst_point: tuple

    @property
    def passed(self) -> bool:
        return self.max_diff <= self.tol and self.certified is not False

    def to_dict(self):
        return {
            "barrier": self.barrier,
            "max_diff": self.max_diff,
            "tol": self.tol,
            "certified": self.certified,
            "worst_point": list(self.worst_point),
            "pass": self.passed,
        }


def comparison_tolerance(solution: Solution) -> float:
    """``1e-6`` plus twice the final-stage residual tolerance."""
    return 1e-6 + 2.0 * solution.config.tol * solution.n / solution.tau


def check_comparison(solution: Solution, barrier: bar.BarrierField, tol: float | None = None) -> ComparisonReport:
    """``max(u - W)`` over the grid; the barrier is lifted to the solution's
    boundary value if it was built without a lift."""
    if barrier.lift == 0.0:
        barrier = barrier.lifted(solution.tau)
    W = barrier(solution.points)
    if np.any(~np.isfinite(W)):
        raise EstimationError("barrier support does not cover the domain")
    diff = solution.u - W
    k = int(np.argmax(diff))
    tol = comparison_tolerance(solution) if tol is None else tol
    return ComparisonReport(barrier.name, float(diff[k]), tol, barrier.certified, tuple(solution.points[k].tolist()))


def write_profile_csv(profile: BoundaryProfile, path) -> Path:
    path = Path(path)
    profile.write_csv(path)
    return path

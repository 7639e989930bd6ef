"""Closed-form super-solutions of the minimal-graph operator.

Every barrier here is axisymmetric about the ``x_n`` axis, so it is evaluated
in meridian coordinates ``(r, x_n)`` with ``r = |x'|`` and works for any
dimension ``n``:

* the power family ``W = ((x_n/eps)^(2/a) - r^2)^(1/b)``, used with ``b = 2``
  and ``a > 2`` (family ``"s3"``) and, after a local rescaling, with
  ``eps = 1``, ``a in (1, 2)``, ``b in (2, 3)`` (family ``"s4"``);
* the one-dimensional flat barrier ``U = (n+1)^2 x^(1/(n+1)) - x^(2-1/(n+1))``.

For ``W`` the operator is written as ``F[W] = (I + J) / (1 + W_r^2 + W_n^2)``
with ``I + J`` split into eight monomials ``J_1 .. J_8``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import qmc

from . import geometry as geo

FAMILIES = ("s3", "s4", "free")
SUPPORT_FLOOR = 1e-14
PASS_TOL = 1e-12


class BarrierError(ValueError):
    pass


def flat_bound(n: int) -> float:
    """Upper bound ``-6n^2 + 3n + 2`` for the flat barrier's scaled operator."""
    return -6.0 * n * n + 3.0 * n + 2.0


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BarrierParams:
    """Parameters of ``W = ((x_n/eps)^(2/a) - r^2)^(1/b)`` in dimension ``n``.

    ``family`` fixes the admissible ranges: ``"s3"`` needs ``a > 2`` and
    ``b = 2``; ``"s4"`` needs ``a in (1, 2)``, ``b in (2, 3)`` and
    ``eps = 1``; ``"free"`` only needs ``a > 1`` and ``b > 1`` (used to
    exercise the algebra away from the certified ranges).
    """

    a: float
    b: float
    eps: float
    n: int
    family: str = "s3"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise BarrierError(f"unknown family {self.family!r}")
        if int(self.n) != self.n or self.n < 2:
            raise BarrierError("n must be an integer >= 2")
        if not self.eps > 0:
            raise BarrierError("eps must be positive")
        if self.family == "s3":
            if not self.a > 2:
                raise BarrierError(f"wrong family: the b = 2 barrier needs a > 2, got a = {self.a}")
            if self.b != 2:
                raise BarrierError("wrong family: the a > 2 barrier uses b = 2")
        elif self.family == "s4":
            if not 1 < self.a < 2:
                raise BarrierError(f"wrong family: the local barrier needs a in (1, 2), got a = {self.a}")
            if not 2 < self.b < 3:
                raise BarrierError(f"wrong family: the local barrier needs b in (2, 3), got b = {self.b}")
            if self.eps != 1:
                raise BarrierError("the local barrier is used with eps = 1 after rescaling")
        elif not (self.a > 1 and self.b > 1):
            raise BarrierError("need a > 1 and b > 1")

    @classmethod
    def power(cls, a: float, eps: float, n: int = 2) -> "BarrierParams":
        return cls(float(a), 2.0, float(eps), int(n), "s3")

    @classmethod
    def local(cls, a: float, b: float = 2.5, n: int = 2) -> "BarrierParams":
        return cls(float(a), float(b), 1.0, int(n), "s4")

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# the power barrier W
# --------------------------------------------------------------------------


def _radicand(p: BarrierParams, r, xn, dtype=float):
    r = np.asarray(r, dtype)
    xn = np.asarray(xn, dtype)
    with np.errstate(invalid="ignore"):
        X = xn / dtype(p.eps)
        return X, X ** (dtype(2) / dtype(p.a)) - r * r


def eval_W(params: BarrierParams, r, xn):
    """``((x_n/eps)^(2/a) - r^2)^(1/b)``; raises outside the support."""
    X, rad = _radicand(params, r, xn)
    if np.any(~(np.asarray(xn) > 0)) or np.any(~(rad >= 0)):
        raise BarrierError("outside barrier support")
    out = rad ** (1.0 / params.b)
    return out if out.ndim else float(out)


class WDerivatives(NamedTuple):
    W_r: np.ndarray
    W_n: np.ndarray
    W_rr: np.ndarray
    W_rn: np.ndarray
    W_nn: np.ndarray


@dataclass(frozen=True)
class _Fields:
    """Everything the operator needs at a batch of meridian points."""

    r: np.ndarray
    X: np.ndarray  # x_n / eps
    W: np.ndarray
    d: WDerivatives
    W_r_over_r: np.ndarray


def _fields(p: BarrierParams, r, xn, floor: float = SUPPORT_FLOOR, dtype=float) -> _Fields:
    r = np.asarray(r, dtype)
    X, rad = _radicand(p, r, xn, dtype)
    if np.any(~(np.asarray(xn) > 0)) or np.any(~(rad >= floor)) or np.any(rad <= 0):
        raise BarrierError("point on the support boundary or outside it")
    a, b, e = dtype(p.a), dtype(p.b), dtype(p.eps)
    W = rad ** (1.0 / b)
    W1b = W ** (1.0 - b)
    W12b = W ** (1.0 - 2.0 * b)
    Xm1 = X ** (2.0 / a - 1.0)
    W_r_over_r = -(2.0 / b) * W1b
    W_r = W_r_over_r * r
    W_n = (2.0 / (a * b)) * W1b * Xm1 / e
    W_rr = 4.0 * (1 - b) / b**2 * W12b * r * r - (2.0 / b) * W1b
    W_nn = (
        4.0 * (1 - b) / (a * a * b * b) * W12b * X ** (4.0 / a - 2.0) / e**2
        + 2.0 * (2 - a) / (a * a * b) * W1b * X ** (2.0 / a - 2.0) / e**2
    )
    W_rn = 4.0 * (b - 1) / (a * b * b) * W12b * Xm1 * r / e
    return _Fields(r, X, W, WDerivatives(W_r, W_n, W_rr, W_rn, W_nn), W_r_over_r)


def eval_W_derivatives(params: BarrierParams, r, xn) -> WDerivatives:
    """Closed forms of ``W_r, W_n, W_rr, W_rn, W_nn``."""
    return _fields(params, r, xn).d


@dataclass(frozen=True)
class JDecomposition:
    J: tuple  # J_1 .. J_8
    I_plus_J: np.ndarray
    prefactor: np.ndarray  # 1 + W_r^2 + W_n^2

    def __getitem__(self, k: int):
        """``dec[k]`` is ``J_k`` with the 1-based numbering."""
        return self.J[k - 1]


def _j_terms(p: BarrierParams, f: _Fields):
    a, b, n, e = p.a, p.b, p.n, p.eps
    W, r, X = f.W, f.r, f.X
    W1b = W ** (1.0 - b)
    W12b = W ** (1.0 - 2.0 * b)
    W33b = W ** (3.0 - 3.0 * b)
    X4 = X ** (4.0 / a - 2.0) / e**2
    X2 = X ** (2.0 / a - 2.0) / e**2
    r2 = r * r
    return (
        4.0 * (n + 1 - b) / b**2 * W12b * r2,
        (1 - n) * (2.0 / b) * W1b,
        (1 - n) * 8.0 / (a * a * b**3) * W33b * X4,
        4.0 * (n + 1 - b) / (a * a * b * b) * W12b * X4,
        2.0 * (2 - a) / (a * a * b) * W1b * X2,
        8.0 * (2 - a) / (a * a * b**3) * W33b * r2 * X2,
        (2 - n) * 8.0 / b**3 * W33b * r2,
        n / W,
    )


def eval_J_decomposition(params: BarrierParams, r, xn, floor: float = SUPPORT_FLOOR) -> JDecomposition:
    """The eight monomials of ``I + J``; ``floor`` is the smallest accepted
    radicand ``(x_n/eps)^(2/a) - r^2``."""
    f = _fields(params, r, xn, floor)
    J = _j_terms(params, f)
    total = J[0] + J[1] + J[2] + J[3] + J[4] + J[5] + J[6] + J[7]
    pref = 1.0 + f.d.W_r**2 + f.d.W_n**2
    return JDecomposition(J, total, pref)


def eval_F_of_W(params: BarrierParams, r, xn, floor: float = SUPPORT_FLOOR):
    """``F[W]`` as the eight-term sum over ``1 + W_r^2 + W_n^2``."""
    dec = eval_J_decomposition(params, r, xn, floor)
    return dec.I_plus_J / dec.prefactor


def eval_F_direct(params: BarrierParams, r, xn, floor: float = SUPPORT_FLOOR, dtype=np.longdouble):
    """``F[W]`` assembled straight from the five derivatives:
    ``Delta W - W_i W_j W_ij / (1 + |grad W|^2) + n / W`` with the
    axisymmetric Laplacian ``W_rr + (n-2) W_r / r + W_nn``.

    Near the edge of the support the three quadratic terms cancel to
    leading order, so the sum is formed in extended precision by default.
    """
    f = _fields(params, r, xn, floor, dtype)
    d = f.d
    G = 1 + d.W_r**2 + d.W_n**2
    lap = d.W_rr + (params.n - 2) * f.W_r_over_r + d.W_nn
    quad = d.W_r**2 * d.W_rr + 2 * d.W_r * d.W_n * d.W_rn + d.W_n**2 * d.W_nn
    return np.asarray(lap - quad / G + params.n / f.W, float)


def choose_epsilon(a: float, eta: float, d_omega: float) -> float:
    """Largest ``eps`` (up to a ``1e-9`` safety factor) keeping the ``b = 2``
    barrier nonnegative on an ``(a, eta)`` region and ``F[W] <= 0`` for
    heights up to ``d_omega``."""
    if not a > 2:
        raise BarrierError(f"wrong family: eps selection needs a > 2, got a = {a}")
    if not (eta > 0 and d_omega > 0):
        raise BarrierError("eta and d_omega must be positive")
    return min(eta, ((a - 2.0) / a**2) ** (a / 2.0) * d_omega ** (1.0 - a)) * (1.0 - 1e-9)


def epsilon_sharp_bound(a: float, height: float) -> float:
    """``eps`` at which the bracket ``1 + (2-a)/a^2 x^(2/a-2) eps^(-2/a)``
    vanishes at ``x = height``; larger ``eps`` makes ``F[W] > 0`` there."""
    return ((a - 2.0) / a**2) ** (a / 2.0) * height ** (1.0 - a)


# --------------------------------------------------------------------------
# flat barrier
# --------------------------------------------------------------------------


class FlatBarrier(NamedTuple):
    U: np.ndarray
    U_n: np.ndarray
    U_nn: np.ndarray
    lhs: np.ndarray  # U U_nn + n (1 + U_n^2)


def eval_flat_barrier(n: int, xn) -> FlatBarrier:
    """Flat barrier and ``U (1 + U_n^2) F[U] = U U_nn + n (1 + U_n^2)``."""
    xn = np.asarray(xn, float)
    if np.any(~(xn > 0)) or np.any(xn > 1):
        raise BarrierError("flat barrier is evaluated for x_n in (0, 1]")
    p = 1.0 / (n + 1)
    U = (n + 1) ** 2 * xn**p - xn ** (2.0 - p)
    U_n = (n + 1) * xn ** (p - 1.0) - (2.0 - p) * xn ** (1.0 - p)
    U_nn = -n * xn ** (p - 2.0) - (2.0 - p) * (1.0 - p) * xn ** (-p)
    # the x^(2p-2) parts of U U_nn and n U_n^2 cancel exactly; expanded form
    # avoids the cancellation for small x_n
    q, c = 2.0 - p, (n + 1.0) ** 2
    lhs = 2.0 * n - c * q * (q - 1.0) - 2.0 * n * (n + 1.0) * q + (q * (q - 1.0) + n * q * q) * xn ** (2.0 - 2.0 * p)
    return FlatBarrier(U, U_n, U_nn, lhs)


def flat_barrier_value(n: int, xn):
    """``U`` extended by ``0`` at ``x_n = 0``."""
    xn = np.asarray(xn, float)
    p = 1.0 / (n + 1)
    x = np.maximum(xn, 0.0)
    return (n + 1) ** 2 * x**p - x ** (2.0 - p)


@dataclass(frozen=True)
class FlatReport:
    n: int
    points: int
    max_lhs: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.max_lhs <= self.bound + 1e-9

    def to_dict(self):
        return {"n": self.n, "points": self.points, "max_lhs": self.max_lhs, "bound": self.bound, "pass": self.passed}


def certify_flat_barrier(n: int, points: int = 10_000) -> FlatReport:
    xn = np.linspace(1.0 / points, 1.0, points)
    lhs = eval_flat_barrier(n, xn).lhs
    return FlatReport(int(n), int(points), float(np.max(lhs)), flat_bound(n))


# --------------------------------------------------------------------------
# local barrier: smallness function and scaling
# --------------------------------------------------------------------------


def _check_local_range(a, b, n):
    if not 1 < a < 2:
        raise BarrierError(f"a must lie in (1, 2), got {a}")
    if not 2 < b < 3:
        raise BarrierError(f"b must lie in (2, 3), got {b}")
    if int(n) != n or n < 2:
        raise BarrierError("n must be an integer >= 2")


def eval_Phi(a: float, b: float, n: int, A):
    """Upper bound for the bracket of the local barrier on ``{|x'|^a <= x_n <= A}``.

    Every power of ``A`` is positive, so the value tends to
    ``-8(n+a-3)/(a^2 b^3) < 0`` as ``A -> 0`` and increases with ``A``.
    """
    _check_local_range(a, b, n)
    A = np.asarray(A, float)
    if np.any(~(A > 0)):
        raise BarrierError("A must be positive")
    ab = a * b
    out = (
        4.0 * (n + 1 - b) / b**2 * A ** (2.0 - 4.0 / ab)
        + (4.0 * n + 4.0 - 2.0 * ab) / (a * a * b * b) * A ** (2.0 * (b - 2.0) / ab)
        + n * A ** (2.0 * (ab + b - 4.0) / ab)
        - 8.0 * (n + a - 3.0) / (a * a * b**3)
    )
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LocalScaling:
    """Dilation ``x -> (A/d) x``, ``u -> (A/d) u`` about an ``(a, eta)`` point
    placed at the origin.  The image has diameter at most ``A``."""

    A: float
    d_omega: float
    a: float
    b: float
    eta: float
    n: int
    cap: float  # eta^(1/(a-1)) d_omega

    @property
    def factor(self) -> float:
        return self.A / self.d_omega

    def map_points(self, x):
        return self.factor * np.asarray(x, float)

    def map_values(self, u):
        return self.factor * np.asarray(u, float)

    def scale_domain(self, domain: geo.DomainSpec) -> geo.DomainSpec:
        return domain.scaled(self.factor)

    def to_dict(self):
        return asdict(self)


def choose_A(a: float, eta: float, d_omega: float, n: int, b: float = 2.5, rtol: float = 1e-6) -> LocalScaling:
    """Largest ``A <= eta^(1/(a-1)) d_omega`` with ``eval_Phi(A) <= 0``."""
    _check_local_range(a, b, n)
    if not (eta > 0 and d_omega > 0):
        raise BarrierError("eta and d_omega must be positive")
    cap = eta ** (1.0 / (a - 1.0)) * d_omega

    def phi(A):
        return eval_Phi(a, b, n, A)

    if phi(cap) <= 0:
        return LocalScaling(cap, d_omega, a, b, eta, int(n), cap)
    lo = cap
    while phi(lo) > 0:
        lo *= 0.5
        if lo < 1e-30:
            raise BarrierError("no admissible A above 1e-30")
    hi = min(2.0 * lo, cap)
    while hi / lo - 1.0 > rtol:
        mid = math.sqrt(lo * hi)
        if phi(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return LocalScaling(lo, d_omega, a, b, eta, int(n), cap)


def delta_to_b(a: float, delta: float) -> float:
    """``b`` with ``2/(a b) = 1/(a + delta)``; must land in ``(2, 3)``."""
    if not delta > 0:
        raise BarrierError("delta must be positive")
    b = 2.0 * (a + delta) / a
    if not 2 < b < 3:
        raise BarrierError(f"delta = {delta} gives b = {b:.6g} outside (2, 3); admissible delta lies in (0, {a / 2:g})")
    return b


# --------------------------------------------------------------------------
# certification on a domain
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CertificationReport:
    family: str
    params: dict
    samples: int
    seed: int
    max_F: float
    min_boundary_W: float
    unsupported_samples: int
    boundary_samples: int

    @property
    def passed(self) -> bool:
        return self.max_F <= PASS_TOL and self.min_boundary_W >= -PASS_TOL and self.unsupported_samples == 0

    def to_dict(self):
        return {
            "family": self.family,
            "params": self.params,
            "samples": self.samples,
            "seed": self.seed,
            "max_F": self.max_F,
            "min_boundary_W": self.min_boundary_W,
            "unsupported_samples": self.unsupported_samples,
            "boundary_samples": self.boundary_samples,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class Frame:
    """Apex and axis of the meridian coordinates used by a barrier."""

    apex: np.ndarray
    axis: np.ndarray

    def meridian(self, x):
        w = np.asarray(x, float) - self.apex
        xn = w @ self.axis
        r = np.linalg.norm(w - xn[..., None] * self.axis, axis=-1)
        return r, xn


def cap_frame(domain: geo.DomainSpec, params: BarrierParams | None = None, anchor=None) -> Frame:
    """Meridian frame at the domain's power-cap apex, or at ``anchor``.

    With an anchor the frame comes from the boundary classification and the
    classified exponent must not exceed the barrier's ``a``.
    """
    if anchor is not None:
        cls = geo.classify_boundary_point(domain, anchor)
        if params is not None and cls.a > params.a + 1e-6:
            raise BarrierError(f"family/domain mismatch: boundary point has a = {cls.a}, barrier a = {params.a}")
        return Frame(np.asarray(anchor, float), cls.rotation[-1].copy())
    caps = [p for p in domain.primitives if isinstance(p, geo.PowerCap)]
    if len(caps) != 1:
        raise BarrierError("family/domain mismatch: need one power-cap primitive or an explicit anchor")
    cap = caps[0]
    if params is not None and cap.a > params.a + 1e-9:
        raise BarrierError(f"family/domain mismatch: cap exponent {cap.a} exceeds barrier a = {params.a}")
    return Frame(np.array(cap.apex), np.array(cap.axis))


def _bounding_box(domain: geo.DomainSpec, m: int = 4096):
    pts = geo.boundary_samples(domain, m)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 1e-9 * float(np.max(hi - lo))
    return lo - pad, hi + pad


def interior_samples(domain: geo.DomainSpec, count: int, seed: int = 0) -> np.ndarray:
    """``count`` scrambled-Sobol points of the bounding box that fall strictly
    inside the domain (kept in generation order)."""
    lo, hi = _bounding_box(domain)
    sob = qmc.Sobol(d=domain.n, scramble=True, seed=seed)
    out, have = [], 0
    batch = 1 << max(10, int(math.ceil(math.log2(max(count, 1)))))
    for _ in range(64):
        x = qmc.scale(sob.random(batch), lo, hi)
        ok = geo.contains(domain, x)
        if np.any(ok):
            depth = np.min(np.stack([p.surface_distance(x[ok]) for p in domain.primitives]), axis=0)
            keep = x[ok][depth > 0]
            out.append(keep)
            have += len(keep)
        if have >= count:
            break
    else:
        raise BarrierError("could not draw enough interior samples")
    return np.concatenate(out)[:count]


def _signed_W(params: BarrierParams, r, xn):
    """``W`` continued as ``-|rad|^(1/b)`` where the radicand is negative.

    Radicands within rounding of zero (boundary points of a region whose
    edge is the support edge) count as zero; the root would otherwise
    amplify ``1e-16`` relative noise to visible negative values.
    """
    X, rad = _radicand(params, r, np.maximum(xn, 0.0))
    noise = 64 * np.finfo(float).eps * (X ** (2.0 / params.a) + np.asarray(r, float) ** 2)
    rad = np.where(np.abs(rad) <= noise, 0.0, rad)
    return np.sign(rad) * np.abs(rad) ** (1.0 / params.b)


def certify_supersolution(
    params: BarrierParams,
    domain: geo.DomainSpec,
    samples: int = 100_000,
    seed: int = 0,
    anchor=None,
    boundary_samples: int = 4096,
) -> CertificationReport:
    """Grid certification of ``F[W] <= 0`` inside and ``W >= 0`` on the boundary.

    Interior samples whose meridian point leaves ``{W real}`` (or sits on its
    edge) are counted as unsupported, which fails the report.
    """
    if params.family == "free":
        raise BarrierError("wrong family: only the s3 and s4 barriers are certified")
    if domain.n != params.n:
        raise BarrierError(f"family/domain mismatch: barrier n = {params.n}, domain n = {domain.n}")
    frame = cap_frame(domain, params, anchor)
    x = interior_samples(domain, samples, seed)
    r, xn = frame.meridian(x)
    _, rad = _radicand(params, r, xn)
    good = (xn > 0) & (rad > 0)
    unsupported = int(np.count_nonzero(~good))
    max_F = -math.inf
    if np.any(good):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            F = eval_F_of_W(params, r[good], xn[good], floor=0.0)
        unsupported += int(np.count_nonzero(~np.isfinite(F)))
        if np.any(np.isfinite(F)):
            max_F = float(np.max(F[np.isfinite(F)]))
    bpts = geo.boundary_samples(domain, boundary_samples)
    br, bxn = frame.meridian(bpts)
    # include the anchor itself, where W vanishes
    br = np.append(br, 0.0)
    bxn = np.append(bxn, 0.0)
    min_W = float(np.min(_signed_W(params, br, bxn)))
    return CertificationReport(params.family, params.to_dict(), len(x), int(seed), max_F, min_W, unsupported, len(br))


# --------------------------------------------------------------------------
# barrier fields on the plane, for comparison with computed solutions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BarrierField:
    """A super-solution evaluated at points, plus the boundary lift.

    ``W + lift`` is still a super-solution of the lifted problem because the
    singular term only decreases.  ``nan`` marks points outside the support.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    lift: float = 0.0
    certified: bool | None = None

    def __call__(self, x) -> np.ndarray:
        return self.func(np.asarray(x, float)) + self.lift

    def lifted(self, tau: float) -> "BarrierField":
        return BarrierField(self.name, self.func, float(tau), self.certified)


def ball_barrier(domain: geo.DomainSpec, R: float | None = None, m: int = 256, lift: float = 0.0) -> BarrierField:
    """Minimum over boundary samples ``z`` of the ball solution on the tangent
    ball ``B_R(z + R nu_in(z))`` containing the domain."""
    certified = True
    if R is None:
        R = geo.exterior_sphere_radius(domain, 1024)
        if R is None:
            raise BarrierError("domain has no exterior sphere (flat boundary)")
    pts = geo.boundary_samples(domain, m)
    centers = pts - R * geo.outward_normal(domain, pts)
    viol = max(
        float(np.max(np.linalg.norm(geo.boundary_samples(domain, 1024) - c, axis=1) - R)) for c in centers[:: max(1, m // 32)]
    )
    if viol > 1e-9 * R:
        certified = False

    def f(x):
        out = np.full(x.shape[:-1], np.inf)
        for c in centers:
            out = np.minimum(out, np.sqrt(np.maximum(R * R - np.sum((x - c) ** 2, axis=-1), 0.0)))
        return out

    return BarrierField(f"ball(R={R:.6g})", f, lift, certified)


def certify_ball_barrier(
    domain: geo.DomainSpec,
    R: float | None = None,
    samples: int = 100_000,
    seed: int = 0,
    m: int = 256,
    boundary_samples: int = 4096,
) -> CertificationReport:
    """Certify the tangent-ball barrier.

    At every interior sample the active ball (the one attaining the minimum)
    is evaluated with the closed-form radial operator; samples outside every
    ball, or at a ball centre where the radial form is singular, count as
    unsupported.  The boundary check is ``min W >= 0`` on boundary samples.
    """
    from .solver import radial_residual

    if R is None:
        R = geo.exterior_sphere_radius(domain, 1024)
        if R is None:
            raise BarrierError("family/domain mismatch: no exterior sphere (flat boundary)")
    field = ball_barrier(domain, R, m)
    pts = geo.boundary_samples(domain, m)
    centers = pts - R * geo.outward_normal(domain, pts)
    x = interior_samples(domain, samples, seed)
    dist = np.stack([np.linalg.norm(x - c, axis=1) for c in centers])
    r = dist.max(axis=0)  # the smallest ball value belongs to the farthest centre
    good = (r > 1e-12 * R) & (r < R)
    max_F = float(np.max(radial_residual(R, domain.n, r[good]))) if np.any(good) else -math.inf
    unsupported = int(np.count_nonzero(~good))
    if field.certified is False:
        unsupported += 1
    min_W = float(np.min(field(geo.boundary_samples(domain, boundary_samples))))
    params = {"R": float(R), "n": domain.n, "balls": int(m)}
    return CertificationReport("ball", params, len(x), int(seed), max_F, min_W, unsupported, boundary_samples)


def flat_barrier_field(domain: geo.DomainSpec, n: int | None = None, lift: float = 0.0) -> BarrierField:
    """Minimum over the domain's flat sides of ``d U(dist_to_side / d)``
    with ``d`` the diameter (so the rescaled heights lie in ``[0, 1]``)."""
    n = n or domain.n
    sides = [p for p in domain.primitives if isinstance(p, geo.HalfPlane)]
    if not sides:
        raise BarrierError("flat barrier needs at least one flat side")
    d = geo.diameter(domain)
    certified = certify_flat_barrier(n).passed

    def f(x):
        out = np.full(x.shape[:-1], np.inf)
        for s in sides:
            h = (s.offset - x @ np.array(s.normal)) / d
            val = np.where(h <= 1.0, d * flat_barrier_value(n, h), np.nan)
            out = np.fmin(out, val)
        return out

    return BarrierField("flat", f, lift, certified)


def power_barrier_field(params: BarrierParams, frame: Frame, lift: float = 0.0, certified: bool | None = None) -> BarrierField:
    """The power barrier in the given meridian frame; ``nan`` off its support."""

    def f(x):
        r, xn = frame.meridian(x)
        _, rad = _radicand(params, r, np.maximum(xn, 0.0))
        with np.errstate(invalid="ignore"):
            return np.where(rad >= 0, np.abs(rad) ** (1.0 / params.b), np.nan)

    return BarrierField(f"{params.family}(a={params.a:g}, b={params.b:g}, eps={params.eps:.6g})", f, lift, certified)

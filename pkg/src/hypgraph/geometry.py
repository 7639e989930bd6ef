"""Bounded convex domains built as intersections of convex primitives.

A domain is the closed intersection of half-spaces, balls, 2-D ellipses and
power caps ``{x_n >= eta |x'|^a, x_n <= height}`` (written in the cap's own
apex frame).  Everything here is immutable and vectorised over leading
axes: points are arrays of shape ``(..., n)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import ndtri
from scipy.spatial import ConvexHull
from scipy.stats import qmc

INF = math.inf
ETA_MIN = 1e-8
ETA_NOISE = 1e-9  # relative height below which local samples are rounding noise
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class GeometryError(ValueError):
    pass


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if not nrm > 0:
        raise GeometryError("zero direction vector")
    return v / nrm


def _golden_min(fun, lo, hi, iters=80):
    """Vectorised golden-section search of ``fun`` on ``[lo, hi]``."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        c = hi - _GOLDEN * (hi - lo)
        d = lo + _GOLDEN * (hi - lo)
        fc, fd = fun(c), fun(d)
    x = 0.5 * (lo + hi)
    return x, fun(x)


def _profile_distance(sample, lo, hi, n_grid=48):
    """Global minimum of a 1-parameter squared-distance profile.

    ``sample(s)`` evaluates squared distances for parameters ``s`` of shape
    ``(k, m)``; the minimum is bracketed on a uniform grid then refined.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    t = np.linspace(0.0, 1.0, n_grid)
    s = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    g = sample(s)
    k = np.argmin(g, axis=1)
    rows = np.arange(len(lo))
    step = (hi - lo) / (n_grid - 1)
    a = np.maximum(s[rows, k] - step, lo)
    b = np.minimum(s[rows, k] + step, hi)
    _, gmin = _golden_min(lambda x: sample(x[:, None])[:, 0], a, b)
    return np.sqrt(np.maximum(np.minimum(gmin, g[rows, k]), 0.0))


# --------------------------------------------------------------------------
# primitives
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HalfPlane:
    """``{x : normal . x <= offset}``; ``normal`` is the outward unit normal."""

    normal: tuple
    offset: float
    kind = "half_plane"

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(_unit(self.normal)))

    @property
    def dim(self):
        return len(self.normal)

    @cached_property
    def _nu(self):
        return np.array(self.normal)

    @property
    def feature_size(self):
        return INF

    def level(self, x):
        return np.asarray(x) @ self._nu - self.offset

    def contains(self, x, tol=0.0):
        return self.level(x) <= tol

    def surface_distance(self, x):
        return np.abs(self.level(x))

    def exit_time(self, p, v):
        p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
        speed = v @ self._nu
        gap = self.offset - p @ self._nu
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t = np.where(speed > 0, gap / speed, INF)
        return np.maximum(t, 0.0)

    def outward_normals(self, x, tol):
        return [np.broadcast_to(self._nu, np.shape(x)).copy()], [self.surface_distance(x) <= tol]

    def transformed(self, Q, t):
        nu = Q @ self._nu
        return HalfPlane(tuple(nu), float(self.offset + nu @ t))

    def to_dict(self):
        return {"kind": self.kind, "normal": list(self.normal), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Disk:
    """Closed ball of the given radius (a disk when ``n = 2``)."""

    center: tuple
    radius: float
    kind = "disk"

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("disk radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self):
        return len(self.center)

    @cached_property
    def _c(self):
        return np.array(self.center)

    @property
    def feature_size(self):
        return self.radius

    def contains(self, x, tol=0.0):
        return np.linalg.norm(np.asarray(x) - self._c, axis=-1) <= self.radius + tol

    def surface_distance(self, x):
        return np.abs(self.radius - np.linalg.norm(np.asarray(x) - self._c, axis=-1))

    def exit_time(self, p, v):
        p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
        w = p - self._c
        A = np.sum(v * v, axis=-1)
        B = np.sum(w * v, axis=-1)
        C = np.sum(w * w, axis=-1) - self.radius**2
        disc = np.maximum(B * B - A * C, 0.0)
        # stable positive root of A t^2 + 2 B t + C = 0 with C <= 0
        root = np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(B > 0, -C / (B + root), (root - B) / A)
        return np.maximum(np.nan_to_num(t, nan=0.0), 0.0)

    def outward_normals(self, x, tol):
        w = np.asarray(x) - self._c
        with np.errstate(divide="ignore", invalid="ignore"):
            nu = w / np.linalg.norm(w, axis=-1, keepdims=True)
        return [nu], [self.surface_distance(x) <= tol]

    def transformed(self, Q, t):
        return Disk(tuple(Q @ self._c + t), self.radius)

    def to_dict(self):
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Ellipse:
    """Planar ellipse with semi-axes ``(a, b)`` rotated by ``angle``."""

    center: tuple
    semi_axes: tuple
    angle: float = 0.0
    kind = "ellipse"

    def __post_init__(self):
        if len(self.center) != 2:
            raise GeometryError("ellipse primitive is two-dimensional")
        if min(self.semi_axes) <= 0:
            raise GeometryError("ellipse semi-axes must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "semi_axes", tuple(float(s) for s in self.semi_axes))

    dim = 2

    @cached_property
    def _rot(self):
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    @property
    def feature_size(self):
        a, b = self.semi_axes
        return min(a, b) ** 2 / max(a, b)

    def _local(self, x):
        return (np.asarray(x, float) - np.array(self.center)) @ self._rot

    def level(self, x):
        y = self._local(x)
        a, b = self.semi_axes
        return (y[..., 0] / a) ** 2 + (y[..., 1] / b) ** 2 - 1.0

    def contains(self, x, tol=0.0):
        # tol is a length; scale by the minor axis for the level set
        return self.level(x) <= 2.0 * tol / min(self.semi_axes)

    def surface_distance(self, x):
        y = np.atleast_2d(self._local(x).reshape(-1, 2))
        a, b = self.semi_axes

        def sq(th):
            return (a * np.cos(th) - y[:, :1]) ** 2 + (b * np.sin(th) - y[:, 1:]) ** 2

        lo = np.zeros(len(y))
        dist = _profile_distance(sq, lo, lo + 2 * np.pi, n_grid=96)
        return dist.reshape(np.shape(x)[:-1])

    def exit_time(self, p, v):
        p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
        a, b = self.semi_axes
        s = np.array([1 / a, 1 / b])
        w = self._local(p) * s
        u = (v @ self._rot) * s
        A = np.sum(u * u, axis=-1)
        B = np.sum(w * u, axis=-1)
        C = np.sum(w * w, axis=-1) - 1.0
        root = np.sqrt(np.maximum(B * B - A * C, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(B > 0, -C / (B + root), (root - B) / A)
        return np.maximum(np.nan_to_num(t, nan=0.0), 0.0)

    def outward_normals(self, x, tol):
        y = self._local(x)
        a, b = self.semi_axes
        g = np.stack([y[..., 0] / a**2, y[..., 1] / b**2], axis=-1) @ self._rot.T
        with np.errstate(divide="ignore", invalid="ignore"):
            nu = g / np.linalg.norm(g, axis=-1, keepdims=True)
        return [nu], [self.surface_distance(x) <= tol]

    def transformed(self, Q, t):
        if abs(abs(np.linalg.det(Q)) - 1) > 1e-12 or Q.shape != (2, 2):
            raise GeometryError("ellipse transforms must be planar rigid motions")
        if np.linalg.det(Q) < 0:
            # reflection: mirror the rotation angle
            R = Q @ self._rot @ np.diag([1.0, -1.0])
        else:
            R = Q @ self._rot
        return Ellipse(tuple(Q @ np.array(self.center) + t), self.semi_axes, math.atan2(R[1, 0], R[0, 0]))

    def to_dict(self):
        return {"kind": self.kind, "center": list(self.center), "semi_axes": list(self.semi_axes), "angle": self.angle}


@dataclass(frozen=True, eq=False)
class PowerCap:
    """Truncated power-law region ``{z >= eta r^a, z <= height}``.

    ``z = (x - apex) . axis`` and ``r`` is the distance from the axis line.
    """

    apex: tuple
    axis: tuple
    a: float
    eta: float
    height: float
    kind = "power_cap"

    def __post_init__(self):
        if self.a < 1:
            raise GeometryError("power cap exponent must be >= 1")
        if not (self.eta > 0 and self.height > 0):
            raise GeometryError("power cap needs eta > 0 and height > 0")
        object.__setattr__(self, "apex", tuple(float(c) for c in self.apex))
        object.__setattr__(self, "axis", tuple(_unit(self.axis)))

    @property
    def dim(self):
        return len(self.apex)

    @cached_property
    def _o(self):
        return np.array(self.apex)

    @cached_property
    def _e(self):
        return np.array(self.axis)

    @property
    def rim_radius(self):
        return (self.height / self.eta) ** (1.0 / self.a)

    @property
    def feature_size(self):
        return min(self.height, self.rim_radius)

    def meridian(self, x):
        """Return ``(r, z)`` coordinates of points in the cap's apex frame."""
        w = np.asarray(x, float) - self._o
        z = w @ self._e
        r = np.linalg.norm(w - z[..., None] * self._e, axis=-1)
        return r, z

    def contains(self, x, tol=0.0):
        r, z = self.meridian(x)
        return (z >= self.eta * r**self.a - tol) & (z <= self.height + tol)

    def _curve_distance(self, r, z):
        r = np.atleast_1d(np.asarray(r, float)).ravel()
        z = np.atleast_1d(np.asarray(z, float)).ravel()
        reach = np.abs(z - self.eta * r**self.a) + 1e-300
        lo = np.maximum(r - reach, 0.0)
        hi = r + reach

        def sq(s):
            return (s - r[:, None]) ** 2 + (self.eta * s**self.a - z[:, None]) ** 2

        return _profile_distance(sq, lo, hi)

    def surface_distance(self, x):
        r, z = self.meridian(x)
        shape = np.shape(r)
        d_curve = self._curve_distance(r, z).reshape(shape)
        return np.minimum(d_curve, np.abs(self.height - z))

    def exit_time(self, p, v):
        p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
        shape = p.shape[:-1]
        p = p.reshape(-1, p.shape[-1])
        v = v.reshape(-1, v.shape[-1])
        e = self._e
        z0 = (p - self._o) @ e
        vz = v @ e
        with np.errstate(divide="ignore", invalid="ignore"):
            t_top = np.where(vz > 0, (self.height - z0) / vz, INF)
        t_top = np.maximum(t_top, 0.0)

        def phi(t):
            r, z = self.meridian(p + t[:, None] * v)
            return z - self.eta * r**self.a

        # phi is concave along the ray and phi(0) >= 0
        hi = np.where(np.isfinite(t_top), t_top, 1.0)
        need = phi(hi) > 0
        unbounded = ~np.isfinite(t_top)
        for _ in range(200):
            grow = unbounded & need
            if not grow.any():
                break
            hi = np.where(grow, 2.0 * hi, hi)
            need = np.where(grow, phi(hi) > 0, need)
        lo = np.zeros_like(hi)
        crossing = phi(hi) < 0
        for _ in range(120):
            mid = 0.5 * (lo + hi)
            inside = phi(mid) >= 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        t_curve = np.where(crossing, lo, INF)
        return np.minimum(t_top, t_curve).reshape(shape)

    def outward_normals(self, x, tol):
        x = np.asarray(x, float)
        w = x - self._o
        z = w @ self._e
        radial = w - z[..., None] * self._e
        r = np.linalg.norm(radial, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            er = np.where(r[..., None] > 0, radial / r[..., None], 0.0)
        slope = self.eta * self.a * np.where(r > 0, r ** (self.a - 1.0), 0.0)
        g = slope[..., None] * er - self._e
        curve = g / np.linalg.norm(g, axis=-1, keepdims=True)
        top = np.broadcast_to(self._e, x.shape).copy()
        d_curve = self._curve_distance(r, z).reshape(r.shape)
        return [curve, top], [d_curve <= tol, np.abs(self.height - z) <= tol]

    def transformed(self, Q, t):
        return PowerCap(tuple(Q @ self._o + t), tuple(Q @ self._e), self.a, self.eta, self.height)

    def to_dict(self):
        return {
            "kind": self.kind,
            "apex": list(self.apex),
            "axis": list(self.axis),
            "a": self.a,
            "eta": self.eta,
            "height": self.height,
        }


_KINDS = {"half_plane": HalfPlane, "disk": Disk, "ellipse": Ellipse, "power_cap": PowerCap}


def primitive_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise GeometryError(f"unknown primitive kind {kind!r}") from None
    return cls(**d)


# --------------------------------------------------------------------------
# domain
# --------------------------------------------------------------------------


def sphere_directions(n: int, m: int) -> np.ndarray:
    """``m`` deterministic, well spread unit vectors in ``R^n``."""
    if n == 2:
        th = 2 * np.pi * np.arange(m) / m
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    # fixed scramble: the unscrambled sequence maps its second point to 0
    pts = qmc.Sobol(n, scramble=True, seed=20240607).random_base2(max(1, math.ceil(math.log2(m))))[:m]
    g = ndtri(np.clip(pts, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class DomainSpec:
    n: int
    primitives: tuple
    interior_point: tuple

    def __post_init__(self):
        if self.n < 2:
            raise GeometryError("dimension must be >= 2")
        prims = tuple(self.primitives)
        if not prims:
            raise GeometryError("a domain needs at least one primitive")
        for p in prims:
            if p.dim != self.n:
                raise GeometryError(f"{p.kind} has dimension {p.dim}, domain has {self.n}")
        object.__setattr__(self, "primitives", prims)
        object.__setattr__(self, "interior_point", tuple(float(c) for c in self.interior_point))
        if len(self.interior_point) != self.n:
            raise GeometryError("interior point has wrong dimension")
        p = self.p0
        t = ray_exit(self, p, sphere_directions(self.n, 64))
        if not np.all(np.isfinite(t)):
            raise GeometryError("domain is unbounded")
        depth = min(float(pr.surface_distance(p)) for pr in prims)
        if not contains(self, p) or depth <= 1e-9 * float(np.max(t)):
            raise GeometryError("interior point is not strictly inside (empty interior?)")

    @cached_property
    def p0(self) -> np.ndarray:
        return np.array(self.interior_point)

    @cached_property
    def scale(self) -> float:
        """Cheap diameter estimate used for tolerances."""
        return diameter(self, 256)

    @cached_property
    def feature_size(self) -> float:
        return min(p.feature_size for p in self.primitives)

    def transformed(self, Q, t) -> "DomainSpec":
        """Image under the rigid motion ``x -> Q x + t``."""
        Q = np.asarray(Q, float)
        t = np.asarray(t, float)
        return DomainSpec(self.n, tuple(p.transformed(Q, t) for p in self.primitives), tuple(Q @ self.p0 + t))

    def scaled(self, s: float) -> "DomainSpec":
        """Image under ``x -> s x`` (used for the local rescaling of caps)."""
        prims = []
        for p in self.primitives:
            if isinstance(p, HalfPlane):
                prims.append(HalfPlane(p.normal, p.offset * s))
            elif isinstance(p, Disk):
                prims.append(Disk(tuple(s * np.array(p.center)), p.radius * s))
            elif isinstance(p, Ellipse):
                prims.append(Ellipse(tuple(s * np.array(p.center)), tuple(s * np.array(p.semi_axes)), p.angle))
            else:
                prims.append(PowerCap(tuple(s * np.array(p.apex)), p.axis, p.a, p.eta * s ** (1 - p.a), p.height * s))
        return DomainSpec(self.n, tuple(prims), tuple(s * self.p0))

    def to_dict(self) -> dict:
        return {"n": self.n, "primitives": [p.to_dict() for p in self.primitives], "interior_point": list(self.interior_point)}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        try:
            return cls(int(d["n"]), tuple(primitive_from_dict(p) for p in d["primitives"]), tuple(d["interior_point"]))
        except (KeyError, TypeError) as exc:
            raise GeometryError(f"malformed domain config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "DomainSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def contains(domain: DomainSpec, x, tol: float = 0.0):
    x = np.asarray(x, float)
    out = np.ones(x.shape[:-1], dtype=bool)
    for p in domain.primitives:
        out &= p.contains(x, tol)
    return out if out.shape else bool(out)


def boundary_distance(domain: DomainSpec, x):
    """Distance to the boundary for points of the closed domain."""
    x = np.asarray(x, float)
    tol = 1e-10 * domain.scale
    if not np.all(contains(domain, x, tol)):
        raise GeometryError("exterior point")
    d = np.min(np.stack([np.broadcast_to(p.surface_distance(x), x.shape[:-1]) for p in domain.primitives]), axis=0)
    return d if d.shape else float(d)


def ray_exit(domain: DomainSpec, p, v):
    """Exit parameter ``t`` of rays ``p + t v`` started inside the domain."""
    ts = [p_.exit_time(p, v) for p_ in domain.primitives]
    return np.min(np.stack(np.broadcast_arrays(*ts)), axis=0)


def outward_normal(domain: DomainSpec, x, tol: float | None = None) -> np.ndarray:
    """Outward normal at boundary points; at corners the normalised sum of
    the normals of every active surface."""
    x = np.asarray(x, float)
    if tol is None:
        tol = 1e-9 * domain.scale
    acc = np.zeros(x.shape)
    hits = np.zeros(x.shape[:-1], dtype=int)
    for p in domain.primitives:
        normals, active = p.outward_normals(x, tol)
        for nu, act in zip(normals, active):
            acc += np.where(act[..., None], nu, 0.0)
            hits += act
    if np.any(hits == 0):
        raise GeometryError("point is not on the boundary")
    return acc / np.linalg.norm(acc, axis=-1, keepdims=True)


def boundary_samples(domain: DomainSpec, m: int) -> np.ndarray:
    """Boundary points hit by ``m`` rays cast from the interior point."""
    dirs = sphere_directions(domain.n, m)
    t = ray_exit(domain, domain.p0, dirs)
    return domain.p0 + t[:, None] * dirs


def diameter(domain: DomainSpec, m: int = 2048) -> float:
    """Largest distance between boundary samples.

    In the plane the best sampled pair is then polished by alternating
    golden-section searches over the ray angle of each endpoint, so the
    result no longer depends on how the sample rays sit relative to the
    domain (rotating a domain leaves its diameter unchanged to rounding).
    """
    if m < 16:
        raise GeometryError("need at least 16 samples")
    pts = boundary_samples(domain, m)
    if not np.all(np.isfinite(pts)):
        raise GeometryError("domain is unbounded")
    try:
        pts = pts[ConvexHull(pts).vertices]
    except Exception:  # degenerate hull: fall back to all pairs
        pass
    best, pair = 0.0, (pts[0], pts[0])
    for i in range(0, len(pts), 512):
        blk = pts[i : i + 512]
        dist = np.linalg.norm(blk[:, None, :] - pts[None, :, :], axis=-1)
        k, j = np.unravel_index(np.argmax(dist), dist.shape)
        if dist[k, j] > best:
            best, pair = float(dist[k, j]), (blk[k], pts[j])
    if domain.n != 2:
        return best
    p0 = domain.p0

    def on_boundary(th):
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return p0 + ray_exit(domain, np.broadcast_to(p0, dirs.shape), dirs)[..., None] * dirs

    p, q = pair
    step = 2 * np.pi / m
    for _ in range(3):
        for which in (0, 1):
            moving, fixed = (p, q) if which == 0 else (q, p)
            th0 = math.atan2(*(moving - p0)[::-1])
            th, _ = _golden_min(lambda t: -np.linalg.norm(on_boundary(t) - fixed, axis=-1), th0 - step, th0 + step, 60)
            moving = on_boundary(np.asarray(th))
            p, q = (moving, fixed) if which == 0 else (fixed, moving)
    return max(best, float(np.linalg.norm(p - q)))


def exterior_sphere_radius(domain: DomainSpec, m: int = 1024) -> float | None:
    """Smallest radius of tangent balls containing all boundary samples.

    For a sample ``x`` with inward normal ``nu`` the ball of radius ``R``
    centred at ``x + R nu`` contains ``q`` iff
    ``R >= |q - x|^2 / (2 nu.(q - x))``; the answer is the largest such bound.
    Returns ``None`` when no radius up to ten diameters works (flat pieces).
    """
    if m < 16:
        raise GeometryError("need at least 16 samples")
    pts = boundary_samples(domain, m)
    nu_in = -outward_normal(domain, pts)
    d = domain.scale
    tiny = 1e-12 * d
    worst = 0.0
    for i in range(0, m, 256):
        x = pts[i : i + 256, None, :]
        w = pts[None, :, :] - x
        sq = np.sum(w * w, axis=-1)
        den = 2.0 * np.sum(nu_in[i : i + 256, None, :] * w, axis=-1)
        far = sq > tiny**2
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(den > 0, sq / den, INF)
        need = np.where(far, need, 0.0)
        worst = max(worst, float(np.max(need)))
    if not worst <= 10.0 * d:
        return None
    return worst


# --------------------------------------------------------------------------
# (a, eta) classification
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryClassification:
    point: np.ndarray
    a: float
    eta: float | None
    rotation: np.ndarray  # rows: tangent basis then inward normal
    local_exponent: float = field(default=math.nan)

    def to_local(self, x):
        return (np.asarray(x, float) - self.point) @ self.rotation.T

    def to_dict(self):
        return {
            "point": self.point.tolist(),
            "a": "inf" if math.isinf(self.a) else self.a,
            "eta": self.eta,
            "local_exponent": self.local_exponent,
        }


def normal_frame(inward: np.ndarray) -> np.ndarray:
    """Orthonormal rows ``(t_1, ..., t_{n-1}, inward)``."""
    e = _unit(inward)
    n = len(e)
    if n == 2:
        return np.array([[e[1], -e[0]], e])
    # Householder reflection mapping e_n to e
    target = np.zeros(n)
    target[-1] = 1.0
    v = target - e
    if np.linalg.norm(v) < 1e-14:
        H = np.eye(n)
    else:
        v /= np.linalg.norm(v)
        H = np.eye(n) - 2.0 * np.outer(v, v)
    # columns of H map e_i to frame vectors; H e_n = e
    return H.T


def _local_samples(domain: DomainSpec, x0, rot, mu, levels=28):
    """Boundary points near ``x0`` as ``(|x'|, x_n, direction index)``."""
    n = domain.n
    tangents = rot[:-1]
    dirs = np.concatenate([tangents, -tangents])
    radii = mu * 2.0 ** (-0.5 * np.arange(levels))
    targets = x0 + radii[:, None, None] * dirs[None, :, :]
    v = targets - domain.p0
    t = ray_exit(domain, domain.p0, v)
    q = domain.p0 + t[..., None] * v
    loc = (q - x0) @ rot.T
    xn = loc[..., -1]
    rho = np.linalg.norm(loc[..., :-1], axis=-1)
    return rho, xn, radii


def _local_exponent(rho, xn, floor):
    """Largest log-log slope of ``x_n`` against ``|x'|`` at the smallest resolved radii."""
    slopes = []
    for j in range(rho.shape[1]):
        r, z = rho[:, j], xn[:, j]
        ok = (z > floor) & (r > 0)
        idx = np.flatnonzero(ok)
        if len(idx) < 2:
            continue
        i1, i0 = idx[-1], idx[-2]
        if r[i1] == r[i0]:
            continue
        slopes.append(math.log(z[i1] / z[i0]) / math.log(r[i1] / r[i0]))
    return max(slopes) if slopes else math.nan


def _eta_for(rho, xn, a, mu, noise=0.0):
    # heights below the rounding noise of the frame change are unresolved;
    # the outer samples stay in so that flat contact still gives eta = 0
    ok = (rho > 0) & (rho < mu * (1 + 1e-12)) & ((xn >= noise) | (rho >= 0.1 * mu))
    if not ok.any():
        return 0.0
    return float(np.min(np.maximum(xn[ok], 0.0) / rho[ok] ** a))


def classify_boundary_point(domain: DomainSpec, x0, a_candidates: Sequence[float] = (1.0, 1.5, 2.0, 3.0, 4.0), slope_tol: float = 0.1) -> BoundaryClassification:
    """Smallest candidate ``a`` for which ``x0`` is an ``(a, eta)``-type point.

    The frame puts ``x0`` at the origin with the supporting hyperplane as
    ``{x_n = 0}``.  A candidate is accepted when ``inf x_n/|x'|^a`` over the
    local samples stays above ``ETA_MIN`` and the observed local exponent of
    the boundary does not exceed it; flat contact yields ``a = inf``.
    """
    x0 = np.asarray(x0, float)
    d = domain.scale
    if min(float(p.surface_distance(x0)) for p in domain.primitives) > 1e-7 * d or not contains(domain, x0, 1e-7 * d):
        raise GeometryError("point is not on the boundary")
    rot = normal_frame(-outward_normal(domain, x0, tol=1e-7 * d))
    mu = min(0.1 * d, domain.feature_size)
    rho, xn, _ = _local_samples(domain, x0, rot, mu)
    floor = 1e-12 * d
    a_loc = _local_exponent(rho, xn, floor)
    for a in sorted(a_candidates):
        if math.isinf(a):
            break
        if not math.isnan(a_loc) and a < a_loc - slope_tol:
            continue
        eta = _eta_for(rho, xn, a, mu, ETA_NOISE * d)
        if eta >= ETA_MIN:
            return BoundaryClassification(x0, float(a), eta, rot, a_loc)
    return BoundaryClassification(x0, INF, None, rot, a_loc)


def eta_at_exponent(domain: DomainSpec, x0, a: float) -> float:
    """``inf x_n/|x'|^a`` over local boundary samples around ``x0``."""
    x0 = np.asarray(x0, float)
    d = domain.scale
    rot = normal_frame(-outward_normal(domain, x0, tol=1e-7 * d))
    mu = min(0.1 * d, domain.feature_size)
    rho, xn, _ = _local_samples(domain, x0, rot, mu)
    return _eta_for(rho, xn, a, mu, ETA_NOISE * d)


def classify_domain(domain: DomainSpec, m: int = 256, a_candidates: Sequence[float] = (1.0, 1.5, 2.0, 3.0, 4.0)):
    """Return ``(a, eta)`` for the whole domain: the worst point exponent
    and, at that exponent, the smallest ``eta`` over the samples."""
    if m < 16:
        raise GeometryError("need at least 16 samples")
    pts = boundary_samples(domain, m)
    results = []
    for i, x in enumerate(pts):
        try:
            results.append(classify_boundary_point(domain, x, a_candidates))
        except GeometryError as exc:
            raise GeometryError(f"boundary sample {i}: {exc}") from exc
    a_dom = max(r.a for r in results)
    if math.isinf(a_dom):
        return INF, None
    eta = min(eta_at_exponent(domain, r.point, a_dom) for r in results)
    return a_dom, eta


@dataclass(frozen=True)
class EnclosingBallReport:
    center: tuple
    radius: float
    max_violation: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1e-6 * self.radius


def enclosing_ball_check(domain: DomainSpec, z, R: float, m: int = 1024) -> EnclosingBallReport:
    """Check ``domain`` lies in the ball of radius ``R`` tangent at ``z``."""
    z = np.asarray(z, float)
    nu_in = -outward_normal(domain, z, tol=1e-7 * domain.scale)
    c = z + R * nu_in
    pts = boundary_samples(domain, m)
    viol = float(np.max(np.linalg.norm(pts - c, axis=1) - R))
    return EnclosingBallReport(tuple(c), R, viol, m)


@dataclass(frozen=True)
class GeometrySummary:
    diameter: float
    exterior_radius: float | None
    curvature_bound: float | None
    samples: int

    def to_dict(self):
        return {
            "diameter": self.diameter,
            "exterior_radius": self.exterior_radius,
            "curvature_bound": self.curvature_bound,
            "samples": self.samples,
        }


def curvature_lower_bound(domain: DomainSpec) -> float | None:
    """Lower curvature bound for intersections of disks and ellipses."""
    lam = INF
    for p in domain.primitives:
        if isinstance(p, Disk):
            lam = min(lam, 1.0 / p.radius)
        elif isinstance(p, Ellipse):
            a, b = max(p.semi_axes), min(p.semi_axes)
            lam = min(lam, b / a**2)
        else:
            return None
    return lam


def summarize(domain: DomainSpec, m: int = 1024) -> GeometrySummary:
    return GeometrySummary(diameter(domain, max(m, 16)), exterior_sphere_radius(domain, m), curvature_lower_bound(domain), m)


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------


def disk(R: float = 1.0, center=(0.0, 0.0)) -> DomainSpec:
    return DomainSpec(len(center), (Disk(tuple(center), R),), tuple(center))


def box(lo=(0.0, 0.0), hi=(1.0, 1.0)) -> DomainSpec:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    n = len(lo)
    prims = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        prims.append(HalfPlane(tuple(e), float(hi[i])))
        prims.append(HalfPlane(tuple(-e), float(-lo[i])))
    return DomainSpec(n, tuple(prims), tuple(0.5 * (lo + hi)))


def unit_square() -> DomainSpec:
    return box()


def lens(radius: float = 1.0, separation: float = 1.0) -> DomainSpec:
    c = 0.5 * separation
    return DomainSpec(2, (Disk((-c, 0.0), radius), Disk((c, 0.0), radius)), (0.0, 0.0))


def ellipse(a: float = 2.0, b: float = 1.0, center=(0.0, 0.0), angle: float = 0.0) -> DomainSpec:
    return DomainSpec(2, (Ellipse(tuple(center), (a, b), angle),), tuple(center))


def power_cap(a: float, eta: float = 1.0, height: float = 1.0, n: int = 2) -> DomainSpec:
    """Cap with apex at the origin opening along ``e_n``."""
    axis = np.zeros(n)
    axis[-1] = 1.0
    ip = np.zeros(n)
    ip[-1] = 0.5 * height
    return DomainSpec(n, (PowerCap(tuple(np.zeros(n)), tuple(axis), a, eta, height),), tuple(ip))

"""Finite-difference solver for the singular minimal-graph Dirichlet problem

    F[u] = Δu - u_i u_j u_ij / (1 + |∇u|²) + n/u = 0 in Ω,   u = 0 on ∂Ω,

on planar convex domains, plus the radial reduction for balls in any
dimension.  The boundary condition is approached by continuation in a lift
``u = τ`` on ∂Ω with τ decreasing geometrically.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_bvp

from . import geometry as geo

log = logging.getLogger(__name__)

OUTSIDE, ON_BOUNDARY, INTERIOR = 0, 1, 2
# arm order: +x, -x, +y, -y
_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))
MAX_STAGE_RETRIES = 8
STAGNATION_STEP, STAGNATION_COUNT = 1.0 / 64, 3


class SolverError(RuntimeError):
    pass


class GridError(ValueError):
    pass


# --------------------------------------------------------------------------
# grid
# --------------------------------------------------------------------------


@dataclass(eq=False)
class Grid:
    """Uniform lattice clipped to a planar domain.

    Lattice nodes sit at integer multiples of ``h``.  ``arms[k, d]`` is the
    fraction of ``h`` from interior node ``k`` to the next node or to the
    boundary along direction ``d`` (order +x, -x, +y, -y).
    """

    domain: geo.DomainSpec
    h: float
    origin: np.ndarray
    status: np.ndarray  # (nx, ny) OUTSIDE / ON_BOUNDARY / INTERIOR
    index: np.ndarray  # (nx, ny) unknown number or -1
    ij: np.ndarray  # (N, 2)
    arms: np.ndarray  # (N, 4)
    dist: np.ndarray  # (N,)

    @property
    def size(self) -> int:
        return len(self.ij)

    @property
    def points(self) -> np.ndarray:
        return self.origin + self.h * self.ij

    @cached_property
    def components(self) -> int:
        from scipy import ndimage

        return int(ndimage.label(self.status == INTERIOR)[1])

    @cached_property
    def stencils(self) -> "Stencils":
        return _build_stencils(self)


def build_grid(domain: geo.DomainSpec, h: float) -> Grid:
    if domain.n != 2:
        raise GridError("the lattice solver is planar; use solve_radial for n > 2")
    d = domain.scale
    if h > d / 16 * (1 + 1e-12):
        raise GridError("grid too coarse")
    bpts = geo.boundary_samples(domain, 1024)
    lo = np.floor(bpts.min(axis=0) / h) - 1
    hi = np.ceil(bpts.max(axis=0) / h) + 1
    origin = lo * h
    nx, ny = (hi - lo + 1).astype(int)
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    pts = origin + h * np.stack([I, J], axis=-1)
    tol_on = 1e-12 * d
    inside = geo.contains(domain, pts, tol_on)
    status = np.zeros((nx, ny), dtype=np.int8)
    depth = np.full((nx, ny), -1.0)
    depth[inside] = np.min(np.stack([p.surface_distance(pts[inside]) for p in domain.primitives]), axis=0)
    status[inside] = ON_BOUNDARY
    status[inside & (depth > tol_on)] = INTERIOR
    if not np.any(status == INTERIOR):
        raise GridError("grid too coarse")
    index = np.full((nx, ny), -1, dtype=np.int64)
    ij = np.argwhere(status == INTERIOR)
    index[ij[:, 0], ij[:, 1]] = np.arange(len(ij))
    xy = origin + h * ij
    arms = np.ones((len(ij), 4))
    for k, (di, dj) in enumerate(_STEPS):
        nb = status[ij[:, 0] + di, ij[:, 1] + dj]
        cut = nb != INTERIOR
        if cut.any():
            v = np.array([di, dj], dtype=float)
            t = geo.ray_exit(domain, xy[cut], v) / h
            arms[cut, k] = np.clip(t, 1e-300, 1.0)
    dist = depth[ij[:, 0], ij[:, 1]]
    return Grid(domain, h, origin, status, index, ij, arms, dist)


# --------------------------------------------------------------------------
# stencils
# --------------------------------------------------------------------------


@dataclass(eq=False)
class Stencils:
    """Linear difference operators ``D u + tau * g`` on the unknowns.

    ``S*p`` / ``S*m`` are the one-sided secant slopes towards the forward and
    backward neighbour (or boundary crossing); ``hb*`` the half-sum of the
    two arm lengths.
    """

    Dx: sp.csr_matrix
    Dy: sp.csr_matrix
    Dxy: sp.csr_matrix
    gx: np.ndarray
    gy: np.ndarray
    gxy: np.ndarray
    secants: dict  # name -> (matrix, g) for "xp", "xm", "yp", "ym"
    hbx: np.ndarray
    hby: np.ndarray
    mixed_quadrants: np.ndarray  # number of quadrants used for u_xy


class _Assembler:
    def __init__(self, N):
        self.rows, self.cols, self.vals = [], [], []
        self.g = np.zeros(N)
        self.N = N

    def add(self, rows, cols, vals):
        """Add coefficients; ``cols < 0`` marks a boundary value (tau)."""
        rows, cols, vals = np.broadcast_arrays(rows, cols, vals)
        known = cols >= 0
        self.rows.append(rows[known])
        self.cols.append(cols[known])
        self.vals.append(vals[known])
        np.add.at(self.g, rows[~known], vals[~known])

    def matrix(self):
        r = np.concatenate(self.rows) if self.rows else np.zeros(0, int)
        c = np.concatenate(self.cols) if self.cols else np.zeros(0, int)
        v = np.concatenate(self.vals) if self.vals else np.zeros(0)
        return sp.csr_matrix((v, (r, c)), shape=(self.N, self.N)), self.g


def _build_stencils(grid: Grid) -> Stencils:
    N, h = grid.size, grid.h
    rows = np.arange(N)
    i, j = grid.ij[:, 0], grid.ij[:, 1]
    nb = [grid.index[i + di, j + dj] for di, dj in _STEPS]
    th = grid.arms

    ops, secants, hb = {}, {}, {}
    for axis, (p, m) in (("x", (0, 1)), ("y", (2, 3))):
        tp, tm = th[:, p], th[:, m]
        s = tp + tm
        first, fwd, bwd = _Assembler(N), _Assembler(N), _Assembler(N)
        first.add(rows, nb[p], tm / (h * tp * s))
        first.add(rows, nb[m], -tp / (h * tm * s))
        first.add(rows, rows, (tp - tm) / (h * tp * tm))
        fwd.add(rows, nb[p], 1.0 / (h * tp))
        fwd.add(rows, rows, -1.0 / (h * tp))
        bwd.add(rows, rows, 1.0 / (h * tm))
        bwd.add(rows, nb[m], -1.0 / (h * tm))
        ops[axis] = first.matrix()
        secants[axis + "p"] = fwd.matrix()
        secants[axis + "m"] = bwd.matrix()
        hb[axis] = 0.5 * h * s

    # u_xy: average of the one-sided quadrant stencils that only touch
    # lattice nodes with known status (interior unknowns or on-boundary)
    quads = []
    for sx, sy in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        ok = (
            (grid.status[i + sx, j] >= ON_BOUNDARY)
            & (grid.status[i, j + sy] >= ON_BOUNDARY)
            & (grid.status[i + sx, j + sy] >= ON_BOUNDARY)
        )
        quads.append((sx, sy, ok))
    count = sum(q[2].astype(int) for q in quads)
    w = np.where(count > 0, 1.0 / np.maximum(count, 1), 0.0) / (h * h)
    mixed = _Assembler(N)
    for sx, sy, ok in quads:
        r = rows[ok]
        sgn = sx * sy * w[ok]
        mixed.add(r, grid.index[i[ok] + sx, j[ok] + sy], sgn)
        mixed.add(r, grid.index[i[ok] + sx, j[ok]], -sgn)
        mixed.add(r, grid.index[i[ok], j[ok] + sy], -sgn)
        mixed.add(r, r, sgn)
    Dxy, gxy = mixed.matrix()
    (Dx, gx), (Dy, gy) = ops["x"], ops["y"]
    return Stencils(Dx, Dy, Dxy, gx, gy, gxy, secants, hb["x"], hb["y"], count)


# --------------------------------------------------------------------------
# residual and Jacobian
# --------------------------------------------------------------------------


def _apply(op, u, tau):
    D, g = op
    return D @ u + tau * g


def _axis_term(st: Stencils, axis, u, tau, kappa):
    """``kappa * d/dx atan(u_x / kappa)`` from the two secants.

    With ``kappa = sqrt(1 + u_y^2)`` frozen at the node this equals
    ``(1 + u_y^2) u_xx / (1 + |grad u|^2)``; the flux form stays monotone in
    the neighbours when the normal slope is large near the boundary.
    """
    hb = st.hbx if axis == "x" else st.hby
    sp_, sm = _apply(st.secants[axis + "p"], u, tau), _apply(st.secants[axis + "m"], u, tau)
    ap, am = sp_ / kappa, sm / kappa
    val = kappa * (np.arctan(ap) - np.arctan(am)) / hb
    d_sp = 1.0 / (1.0 + ap * ap) / hb
    d_sm = -1.0 / (1.0 + am * am) / hb
    d_kappa = (np.arctan(ap) - np.arctan(am) - ap / (1.0 + ap * ap) + am / (1.0 + am * am)) / hb
    return val, d_sp, d_sm, d_kappa


def residual_F(grid: Grid, u, tau: float, n: int = 2) -> np.ndarray:
    """Discrete ``F[u]`` at every interior node for boundary value ``tau``."""
    u = np.asarray(u, float)
    if np.any(u <= 0) or tau < 0:
        raise SolverError("singular term undefined")
    return _assemble(grid.stencils, u, tau, n, jacobian=False)


def jacobian_F(grid: Grid, u, tau: float, n: int = 2):
    """Residual and exact Jacobian of the discrete operator."""
    return _assemble(grid.stencils, np.asarray(u, float), tau, n, jacobian=True)


def _assemble(st: Stencils, u, tau, n, jacobian):
    p, q, C = _apply((st.Dx, st.gx), u, tau), _apply((st.Dy, st.gy), u, tau), _apply((st.Dxy, st.gxy), u, tau)
    G = 1.0 + p * p + q * q
    kx, ky = np.sqrt(1.0 + q * q), np.sqrt(1.0 + p * p)
    X, x_sp, x_sm, x_k = _axis_term(st, "x", u, tau, kx)
    Y, y_sp, y_sm, y_k = _axis_term(st, "y", u, tau, ky)
    F = X + Y - 2.0 * p * q * C / G + n / u
    if not jacobian:
        return F
    dg = sp.diags
    # mixed term M = -2 p q C / G
    dM_dp = -2.0 * q * C / G + 4.0 * p * p * q * C / G**2
    dM_dq = -2.0 * p * C / G + 4.0 * p * q * q * C / G**2
    dM_dC = -2.0 * p * q / G
    dp = dM_dp + y_k * p / ky
    dq = dM_dq + x_k * q / kx
    sec = st.secants
    J = (
        dg(x_sp) @ sec["xp"][0]
        + dg(x_sm) @ sec["xm"][0]
        + dg(y_sp) @ sec["yp"][0]
        + dg(y_sm) @ sec["ym"][0]
        + dg(dM_dC) @ st.Dxy
        + dg(dp) @ st.Dx
        + dg(dq) @ st.Dy
        - dg(n / u**2)
    )
    return F, J.tocsc()


# --------------------------------------------------------------------------
# Newton continuation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """Continuation and Newton parameters.

    Lift values default to fractions of the domain diameter:
    ``tau_start = 0.05 d`` down to ``tau_min = 1e-3 d``.
    """

    tau_start: float | None = None
    tau_min: float | None = None
    tau_ratio: float = 0.5
    tol: float = 1e-10
    max_iter: int = 50
    backtrack: float = 0.5
    max_backtracks: int = 40
    n: int | None = None
    keep_stages: bool = False

    def __post_init__(self):
        if not 0 < self.tau_ratio < 1:
            raise ValueError("tau_ratio must lie in (0, 1)")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tolerances must be positive")

    def schedule(self, diameter: float) -> list[float]:
        t0 = self.tau_start if self.tau_start is not None else 0.05 * diameter
        tK = self.tau_min if self.tau_min is not None else 1e-3 * diameter
        if not (t0 > 0 and tK > 0):
            raise ValueError("lifts must be positive")
        if tK > t0:
            t0 = tK
        taus = [t0]
        while taus[-1] * self.tau_ratio > tK * (1 + 1e-9):
            taus.append(taus[-1] * self.tau_ratio)
        if taus[-1] > tK * (1 + 1e-12):
            taus.append(tK)
        return taus

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "keep_stages"}


@dataclass
class StageRecord:
    tau: float
    iterations: int
    residual: float
    tolerance: float


@dataclass(eq=False)
class Solution:
    grid: Grid
    u: np.ndarray
    tau: float
    residual: float
    n: int
    config: SolverConfig
    history: list = field(default_factory=list)
    stages: list = field(default_factory=list)  # (tau, u) when keep_stages

    @property
    def points(self):
        return self.grid.points

    @property
    def dist(self):
        return self.grid.dist

    def lattice(self) -> np.ndarray:
        """Values on the whole lattice: ``u`` inside, ``tau`` on the
        boundary, ``nan`` outside."""
        g = self.grid
        out = np.full(g.status.shape, np.nan)
        out[g.status == ON_BOUNDARY] = self.tau
        out[g.ij[:, 0], g.ij[:, 1]] = self.u
        return out

    def interpolate(self, x) -> np.ndarray:
        """Bilinear interpolation; ``nan`` where a cell touches the exterior."""
        g = self.grid
        L = self.lattice()
        s = (np.asarray(x, float) - g.origin) / g.h
        i0 = np.floor(s).astype(int)
        f = s - i0
        nx, ny = L.shape
        ok = (i0[..., 0] >= 0) & (i0[..., 1] >= 0) & (i0[..., 0] < nx - 1) & (i0[..., 1] < ny - 1)
        i = np.clip(i0[..., 0], 0, nx - 2)
        j = np.clip(i0[..., 1], 0, ny - 2)
        fx, fy = f[..., 0], f[..., 1]
        val = (
            L[i, j] * (1 - fx) * (1 - fy)
            + L[i + 1, j] * fx * (1 - fy)
            + L[i, j + 1] * (1 - fx) * fy
            + L[i + 1, j + 1] * fx * fy
        )
        return np.where(ok, val, np.nan)

    def F(self) -> np.ndarray:
        return residual_F(self.grid, self.u, self.tau, self.n)


def enclosing_ball_guess(grid: Grid, tau: float) -> np.ndarray:
    """Ball solution over a ball containing the domain, lifted to ``tau``."""
    bpts = geo.boundary_samples(grid.domain, 1024)
    c = 0.5 * (bpts.min(axis=0) + bpts.max(axis=0))
    rho = float(np.max(np.linalg.norm(bpts - c, axis=1)))
    r2 = np.sum((grid.points - c) ** 2, axis=1)
    return np.maximum(np.sqrt(np.maximum(rho**2 + tau**2 - r2, 0.0)), tau)


def _linear_solve(J, rhs):
    lu = spla.splu(J, permc_spec="MMD_AT_PLUS_A")
    x = lu.solve(rhs)
    # one refinement sweep keeps the relative residual near 1e-12
    r = rhs - J @ x
    if np.linalg.norm(r) > 1e-12 * np.linalg.norm(rhs):
        x += lu.solve(r)
    return x


def _newton_stage(grid, u, tau, n, cfg: SolverConfig):
    tol = cfg.tol * n / tau
    F, J = jacobian_F(grid, u, tau, n)
    res = float(np.max(np.abs(F)))
    merit = float(F @ F)
    it = 0
    short_steps = 0
    while res > tol:
        if it >= cfg.max_iter:
            raise SolverError(f"Newton did not converge at tau={tau:.3e}: residual {res:.3e} after {it} iterations")
        it += 1
        du = _linear_solve(J, -F)
        lam = 1.0
        for _ in range(cfg.max_backtracks + 1):
            trial = u + lam * du
            if np.all(trial > 0):
                F_t = residual_F(grid, trial, tau, n)
                m_t = float(F_t @ F_t)
                if m_t <= (1 - 1e-4 * lam) * merit or m_t == 0:
                    break
            lam *= cfg.backtrack
        else:
            # rounding floor: a full step no longer changes anything measurable
            if float(np.max(np.abs(du))) <= 1e-12 * float(np.max(u)):
                break
            raise SolverError(f"line search failed at tau={tau:.3e} (residual {res:.3e})")
        # repeated heavy damping means the guess is outside Newton's basin;
        # give up early so the continuation can pick a gentler stage
        short_steps = short_steps + 1 if lam < STAGNATION_STEP else 0
        if short_steps >= STAGNATION_COUNT:
            raise SolverError(f"Newton stagnated at tau={tau:.3e} (residual {res:.3e})")
        u = trial
        F, J = jacobian_F(grid, u, tau, n)
        new_res = float(np.max(np.abs(F)))
        merit = float(F @ F)
        step = lam * float(np.max(np.abs(du)))
        res = new_res
        if step <= 1e-13 * float(np.max(u)) and res > tol:
            # converged to rounding level; the max-norm floor is set by the
            # smallest cut-cell arms
            break
    return u, it, res, tol


def newton_solve(grid: Grid, config: SolverConfig | None = None, u0=None) -> Solution:
    """Continuation in the lift ``tau`` with Newton at each stage.

    Step control: if the first stage fails from the initial guess, it is
    retried at a doubled lift; if a later stage fails, an intermediate lift
    (geometric mean with the last converged one) is inserted.
    """
    cfg = config or SolverConfig()
    n = cfg.n or grid.domain.n
    pending = cfg.schedule(grid.domain.scale)
    history, stages = [], []
    u = None
    prev_tau = None
    retries = 0
    while pending:
        tau = pending[0]
        start = u
        if start is None:
            start = enclosing_ball_guess(grid, tau) if u0 is None else np.maximum(np.asarray(u0, float), tau)
        try:
            u_new, it, res, tol = _newton_stage(grid, start, tau, n, cfg)
        except SolverError:
            retries += 1
            if retries > MAX_STAGE_RETRIES:
                raise
            if prev_tau is None:
                pending.insert(0, 2.0 * tau)
            else:
                pending.insert(0, math.sqrt(prev_tau * tau))
            log.info("stage at tau=%.3e failed, retrying from tau=%.3e", tau, pending[0])
            continue
        pending.pop(0)
        u, prev_tau = u_new, tau
        log.info("tau=%.3e newton=%d residual=%.3e", tau, it, res)
        history.append(StageRecord(tau, it, res, tol))
        if cfg.keep_stages:
            stages.append((tau, u.copy()))
    return Solution(grid, u, history[-1].tau, history[-1].residual, n, cfg, history, stages)


# --------------------------------------------------------------------------
# balls: closed form and radial reduction
# --------------------------------------------------------------------------


def exact_ball_solution(R: float, x) -> np.ndarray:
    """``sqrt(R^2 - |x|^2)`` for ``|x| <= R``."""
    x = np.asarray(x, float)
    r2 = np.sum(x * x, axis=-1) if x.ndim else x * x
    if np.any(r2 > R * R * (1 + 1e-14)):
        raise ValueError("point outside the ball")
    return np.sqrt(np.maximum(R * R - r2, 0.0))


def radial_residual(R: float, n: int, r) -> np.ndarray:
    """Left side of the radial equation at the ball solution, from the
    closed-form derivatives ``U_r = -r/U`` and ``U_rr = -R^2/U^3``."""
    r = np.asarray(r, float)
    if np.any(r <= 0) or np.any(r >= R):
        raise ValueError("radius must lie strictly inside (0, R)")
    U = np.sqrt(R * R - r * r)
    Ur = -r / U
    Ur_over_r = -1.0 / U
    Urr = -R * R / (U * U * U)
    return (n - 1) * Ur_over_r + Urr / (1.0 + Ur * Ur) + n / U


@dataclass(eq=False)
class RadialProfile:
    n: int
    R: float
    tau: float
    r: np.ndarray
    u: np.ndarray
    ur: np.ndarray
    nodes: int

    def __call__(self, r):
        return np.interp(r, self.r, self.u)


def solve_radial(R: float, n: int, config: SolverConfig | None = None, nodes: int = 512) -> RadialProfile:
    """Radial profile on ``[0, R]`` with ``u'(0) = 0`` and ``u(R) = tau``.

    The profile curve is parametrised by arclength ``s = L t``, ``t in [0,1]``:
    ``r' = L cos ψ``, ``u' = L sin ψ``,
    ``ψ' = -L ((n-1) sin ψ / r + n cos ψ / u)``, which stays regular where
    ``u_r`` blows up.  Collocation with the unknown length ``L``.
    """
    if n < 2 or R <= 0:
        raise ValueError("need n >= 2 and R > 0")
    cfg = config or SolverConfig()
    tau = cfg.tau_min if cfg.tau_min is not None else 1e-3 * 2 * R
    nodes = max(int(nodes), 512)

    def rhs(t, y, p):
        L = p[0]
        r, u, psi = y
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(r > 1e-14 * R, np.sin(psi) / r, -1.0 / u)
        return L * np.vstack([np.cos(psi), np.sin(psi), -((n - 1) * ratio + n * np.cos(psi) / u)])

    def bc(ya, yb, p):
        return np.array([ya[0], ya[2], yb[0] - R, yb[1] - tau])

    # start from a quarter circle of radius R (the unlifted answer)
    t = np.linspace(0.0, 1.0, nodes)
    ang = 0.5 * np.pi * t
    y0 = np.vstack([R * np.sin(ang), np.maximum(R * np.cos(ang), tau), -ang])
    sol = solve_bvp(rhs, bc, t, y0, p=[0.5 * np.pi * R], tol=1e-10, max_nodes=200000)
    if not sol.success:
        raise SolverError(f"radial collocation failed: {sol.message}")
    tt = np.union1d(np.linspace(0, 1, nodes), sol.x)
    r, u, psi = sol.sol(tt)
    r[0], r[-1] = 0.0, R
    return RadialProfile(n, R, tau, r, u, np.tan(psi), len(sol.x))

"""Command-line front end.

Every subcommand takes its parameters from flags, from a JSON ``--config``
file holding the same keys, or both (flags win).  Outputs are CSV and JSON
in ``--out``; every JSON embeds the resolved config.

Exit codes: 0 ok, 1 bad config or input, 2 solver failure,
3 certification failure, 4 estimation or tolerance failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import barriers as bar
from . import geometry as geo
from . import io
from . import regularity as reg
from . import solver as sol

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CERT, EXIT_ESTIMATE = 0, 1, 2, 3, 4

log = logging.getLogger("hypgraph")

# flag name -> (type, help); the same keys are accepted in --config files
FLAGS = {
    "domain": (str, "domain JSON file"),
    "h": (float, "grid spacing (default: diameter / 128)"),
    "tau_min": (float, "final boundary lift (default: 1e-3 * diameter)"),
    "tau_start": (float, "first boundary lift (default: 0.05 * diameter)"),
    "samples": (int, "sample count for certification / classification"),
    "seed": (int, "seed for the scrambled Sobol samples"),
    "out": (str, "output directory"),
    "family": (str, "barrier family: s3, s4, flat or ball"),
    "a": (float, "barrier exponent a"),
    "b": (float, "barrier exponent b (s4)"),
    "delta": (float, "exponent loss delta; sets b = 2(a + delta)/a"),
    "eps": (float, "force the s3 width eps instead of the admissible choice"),
    "n": (int, "dimension n in the operator"),
    "R": (float, "ball radius (validate-ball, ball barrier)"),
    "solution": (str, "directory written by 'solve' (estimate)"),
    "anchor": (str, "boundary anchor 'x,y' (repeatable)"),
    "window": (str, "fit window 'd_min,d_max'"),
}
REPEATABLE = {"anchor"}

DEFAULTS = {
    "solve": {"out": "."},
    "verify-barrier": {"out": ".", "seed": 0},
    "classify": {"out": ".", "samples": 256},
    "estimate": {"out": "."},
    "validate-ball": {"out": ".", "R": 1.0, "n": 2, "samples": 100, "seed": 0},
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# config resolution
# --------------------------------------------------------------------------


def _flag_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file with any of the flags below")
    for key, (typ, text) in FLAGS.items():
        flag = "--" + key.replace("_", "-")
        if key in REPEATABLE:
            p.add_argument(flag, dest=key, action="append", help=text, default=argparse.SUPPRESS)
        else:
            p.add_argument(flag, dest=key, type=typ, help=text, default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypgraph", description="Minimal graphs over convex domains: solver, barriers, boundary regularity.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _flag_parent()
    helps = {
        "solve": "solve the Dirichlet problem on a planar domain",
        "verify-barrier": "certify a barrier family on sampled points",
        "classify": "boundary exponent, eta and exterior sphere radius",
        "estimate": "fit boundary exponents of a stored solution",
        "validate-ball": "compare planar and radial solves with the exact ball solution",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[parent], help=text, description=text)
    return parser


def _coerce(key, value):
    if key not in FLAGS:
        raise ConfigError(f"unknown config key {key!r}")
    typ = FLAGS[key][0]
    if key in REPEATABLE:
        values = value if isinstance(value, list) else [value]
        return [v if isinstance(v, str) else ",".join(str(c) for c in v) for v in values]
    if key == "window" and isinstance(value, (list, tuple)):
        return ",".join(str(c) for c in value)
    try:
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS.get(command, {}))
    explicit = {k: v for k, v in vars(args).items() if k in FLAGS}
    path = getattr(args, "config", None)
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, v in raw.items():
            key = k.replace("-", "_")
            cfg[key] = _coerce(key, v)
    cfg.update(explicit)
    for key in ("domain", "solution"):
        if key in cfg and not Path(cfg[key]).exists():
            raise ConfigError(f"{key} path {cfg[key]} does not exist")
    return cfg


def _pair(text: str, what: str) -> tuple[float, float]:
    try:
        x, y = (float(t) for t in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"{what} must be two comma-separated numbers, got {text!r}") from exc
    return x, y


def _domain(cfg) -> geo.DomainSpec:
    if "domain" not in cfg:
        raise ConfigError("--domain is required")
    return geo.DomainSpec.load(cfg["domain"])


def _solver_config(cfg) -> sol.SolverConfig:
    return sol.SolverConfig(tau_start=cfg.get("tau_start"), tau_min=cfg.get("tau_min"), n=cfg.get("n"))


def _single_cap(domain):
    caps = [p for p in domain.primitives if isinstance(p, geo.PowerCap)]
    return caps[0] if len(caps) == 1 else None


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_solve(cfg: dict) -> int:
    domain = _domain(cfg)
    h = cfg.get("h") or domain.scale / 128
    cfg["h"] = h
    grid = sol.build_grid(domain, h)
    t0 = time.perf_counter()
    solution = sol.newton_solve(grid, _solver_config(cfg))
    elapsed = time.perf_counter() - t0
    csv_path, meta_path = io.write_solution(solution, cfg["out"], cfg)
    print(f"solved {grid.size} nodes in {elapsed:.1f}s, tau={solution.tau:.3e}, residual={solution.residual:.3e}")
    print(f"wrote {csv_path} and {meta_path}")
    return EXIT_OK


def _cap_data(cfg, domain):
    cap = _single_cap(domain)
    a = cfg.get("a", cap.a if cap else None)
    if a is None:
        raise ConfigError("--a is required for a domain without a single power cap")
    if cap is None:
        raise bar.BarrierError("family/domain mismatch: the domain has no single power-cap apex")
    if a < cap.a - 1e-12:
        raise bar.BarrierError(f"family/domain mismatch: barrier a = {a} is below the cap exponent {cap.a}")
    return cap, a


def _verify_flat(cfg) -> dict:
    ns = [cfg["n"]] if "n" in cfg else [2, 3, 4, 5]
    points = cfg.get("samples", 10_000)
    reports = [bar.certify_flat_barrier(n, points) for n in ns]
    return {
        "family": "flat",
        "samples": points,
        "seed": cfg["seed"],
        "reports": [r.to_dict() for r in reports],
        "pass": all(r.passed for r in reports),
    }


def _verify_s3(cfg, domain) -> dict:
    cap, a = _cap_data(cfg, domain)
    d = geo.diameter(domain)
    eps = cfg.get("eps")
    if eps is None:
        eps = bar.choose_epsilon(a, cap.eta, d)
    params = bar.BarrierParams.power(a, eps, domain.n)
    rep = bar.certify_supersolution(params, domain, cfg.get("samples", 100_000), cfg["seed"])
    out = rep.to_dict()
    out["admissible_eps"] = bar.choose_epsilon(a, cap.eta, d)
    return out


def _verify_s4(cfg, domain) -> dict:
    cap, a = _cap_data(cfg, domain)
    if "b" in cfg:
        b = cfg["b"]
    elif "delta" in cfg:
        b = bar.delta_to_b(a, cfg["delta"])
    else:
        b = 2.5
    d = geo.diameter(domain)
    scaling = bar.choose_A(a, cap.eta, d, domain.n, b)
    # move the apex to the origin with the axis along e_n, then dilate
    rot = geo.normal_frame(np.asarray(cap.axis, float))
    local = domain.transformed(rot, -rot @ np.asarray(cap.apex, float))
    scaled = scaling.scale_domain(local)
    params = bar.BarrierParams.local(a, b, domain.n)
    rep = bar.certify_supersolution(params, scaled, cfg.get("samples", 100_000), cfg["seed"])
    out = rep.to_dict()
    out["scaling"] = scaling.to_dict()
    out["Phi_at_A"] = bar.eval_Phi(a, b, domain.n, scaling.A)
    if out["Phi_at_A"] > 0:
        out["pass"] = False
    return out


def cmd_verify_barrier(cfg: dict) -> int:
    family = cfg.get("family")
    if family not in ("s3", "s4", "flat", "ball"):
        raise ConfigError("--family must be one of s3, s4, flat, ball")
    if family == "flat":
        payload = _verify_flat(cfg)
    else:
        domain = _domain(cfg)
        if family == "s3":
            payload = _verify_s3(cfg, domain)
        elif family == "s4":
            payload = _verify_s4(cfg, domain)
        else:
            rep = bar.certify_ball_barrier(domain, cfg.get("R"), cfg.get("samples", 100_000), cfg["seed"])
            payload = rep.to_dict()
    path = io.write_report(Path(cfg["out"]) / "certification.json", payload, cfg)
    print(f"{family}: {'pass' if payload['pass'] else 'FAIL'} -> {path}")
    return EXIT_OK if payload["pass"] else EXIT_CERT


def cmd_classify(cfg: dict) -> int:
    domain = _domain(cfg)
    m = cfg["samples"]
    summary = geo.summarize(domain)
    a, eta = geo.classify_domain(domain, m)
    payload = {
        "summary": summary.to_dict(),
        "classification": {"a": a, "eta": eta, "samples": m},
    }
    if a == 2 and eta and summary.exterior_radius is not None:
        bound = max(1.0 / eta, summary.diameter)
        payload["exterior_radius_check"] = {
            "bound": bound,
            "radius": summary.exterior_radius,
            "pass": summary.exterior_radius <= bound + 1e-3,
        }
    path = io.write_report(Path(cfg["out"]) / "classification.json", payload, cfg)
    a_txt = "inf" if math.isinf(a) else f"{a:g}"
    print(f"a={a_txt} eta={eta if eta is None else f'{eta:.6g}'} diameter={summary.diameter:.6g} -> {path}")
    return EXIT_OK


def default_anchors(domain: geo.DomainSpec) -> np.ndarray:
    """Boundary points hit by rays from the interior point along +-x, +-y."""
    dirs = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    t = geo.ray_exit(domain, np.broadcast_to(domain.p0, dirs.shape), dirs)
    return domain.p0 + t[:, None] * dirs


def cmd_estimate(cfg: dict) -> int:
    src = cfg.get("solution", cfg["out"])
    try:
        solution = io.read_solution(src)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load solution from {src}: {exc}") from exc
    domain = solution.grid.domain
    window = _pair(cfg["window"], "--window") if "window" in cfg else None
    if "anchor" in cfg:
        anchors = np.array([_pair(t, "--anchor") for t in cfg["anchor"]])
    else:
        anchors = default_anchors(domain)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for k, z in enumerate(anchors):
        cls = geo.classify_boundary_point(domain, z)
        try:
            predicted = reg.predicted_exponent(cls.a, solution.n)
        except reg.EstimationError:
            predicted = None
        rep = reg.exponent_report(solution, z, predicted, window=window)
        entry = rep.to_dict()
        entry["boundary_a"] = cls.a
        if predicted is None:
            entry["flags"].append("no exponent prediction for a < 2")
        csv_path = out / f"profile_{k}.csv"
        rep.profile.write_csv(csv_path)
        entry["profile_csv"] = csv_path.name
        reports.append(entry)
        print(f"anchor {np.round(z, 6).tolist()}: alpha={rep.fit.alpha:.4f} predicted={predicted} {'pass' if entry['pass'] else 'FAIL'} {rep.flags}")
    bounds = []
    a_dom, eta = geo.classify_domain(domain, 64)
    if a_dom == 2:
        bounds.append(reg.check_constant_bound(solution, "a2", classification=(a_dom, eta)).to_dict())
    elif math.isinf(a_dom):
        bounds.append(reg.check_constant_bound(solution, "a_inf", classification=(a_dom, eta)).to_dict())
    payload = {
        "anchors": reports,
        "bounds": bounds,
        "domain_a": a_dom,
        "pass": all(r["pass"] for r in reports) and all(b["pass"] for b in bounds),
    }
    path = io.write_report(out / "estimate.json", payload, cfg)
    print(f"estimate: {'pass' if payload['pass'] else 'FAIL'} -> {path}")
    return EXIT_OK if payload["pass"] else EXIT_ESTIMATE


PLANAR_TOL = 5e-3  # times R, over d >= 0.05 R
RADIAL_TOL = 1e-4  # times R, over r <= 0.95 R
IDENTITY_TOL = 1e-10


def cmd_validate_ball(cfg: dict) -> int:
    R, n = float(cfg["R"]), int(cfg["n"])
    if R <= 0 or n < 2:
        raise ConfigError("need R > 0 and n >= 2")
    scfg = sol.SolverConfig(tau_start=cfg.get("tau_start"), tau_min=cfg.get("tau_min"), n=n)
    payload = {"R": R, "n": n}
    ok = True
    if n == 2:
        h = cfg.get("h") or R / 128
        cfg["h"] = h
        t0 = time.perf_counter()
        s = sol.newton_solve(sol.build_grid(geo.disk(R), h), scfg)
        elapsed = time.perf_counter() - t0
        far = s.dist >= 0.05 * R
        err = float(np.max(np.abs(s.u[far] - sol.exact_ball_solution(R, s.points[far]))))
        planar = {"h": h, "tau": s.tau, "max_error": err, "tol": PLANAR_TOL * R, "runtime_s": elapsed, "nodes": s.grid.size}
        planar["pass"] = err <= PLANAR_TOL * R
        payload["planar"] = planar
        ok &= planar["pass"]
        print(f"planar: h={h:.5g} max error {err:.3e} (tol {PLANAR_TOL * R:.1e}) in {elapsed:.1f}s")
    prof = sol.solve_radial(R, n, scfg)
    inner = prof.r <= 0.95 * R
    rerr = float(np.max(np.abs(prof.u[inner] - sol.exact_ball_solution(R, prof.r[inner, None]))))
    rng = np.random.default_rng(cfg["seed"])
    r = R * rng.uniform(1e-3, 1 - 1e-3, cfg["samples"])
    ident = float(np.max(np.abs(sol.radial_residual(R, n, r))))
    payload["radial"] = {
        "tau": prof.tau,
        "max_error": rerr,
        "tol": RADIAL_TOL * R,
        "identity_residual": ident,
        "identity_tol": IDENTITY_TOL,
        "pass": rerr <= RADIAL_TOL * R and ident <= IDENTITY_TOL,
    }
    ok &= payload["radial"]["pass"]
    payload["pass"] = bool(ok)
    print(f"radial: max error {rerr:.3e}, identity residual {ident:.1e}")
    path = io.write_report(Path(cfg["out"]) / "validate_ball.json", payload, cfg)
    print(f"validate-ball: {'pass' if ok else 'FAIL'} -> {path}")
    return EXIT_OK if ok else EXIT_ESTIMATE


COMMANDS = {
    "solve": cmd_solve,
    "verify-barrier": cmd_verify_barrier,
    "classify": cmd_classify,
    "estimate": cmd_estimate,
    "validate-ball": cmd_validate_ball,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, geo.GeometryError, sol.GridError, bar.BarrierError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except sol.SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except reg.EstimationError as exc:
        print(f"estimation failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATE


if __name__ == "__main__":
    sys.exit(main())

"""Batch front end: one executable, six subcommands, JSON/CSV/PNG artifacts.

Input is a strict JSON file (unknown fields are rejected). Each run writes
a deterministic result JSON (sorted keys), CSV tables of the plotted data,
rendered PNG figures, and a manifest recording versions, tolerances, and
wall clock. Exit codes: 0 success, 1 input error, 2 verification-residual
failure.
"""

import argparse
import csv
import json
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np
import scipy

from . import __version__, plotting
from .balayage import default_sweep_target, exterior_tail_mass, sweep_measure_analytic, \
    balayage_project, mass_preservation_check
from .capacity import capacitary_measure, default_shell_count, thinness_classify
from .condenser import Condenser, solve_standard_problem, solve_weak_problem, \
    verify_condenser_measure
from .energies import GridSpec, deny_schwartz_energy, green_energy, identity_residuals, \
    smoothed_standard_energy, weak_energy
from .geometry import DomainSpec, ProfileSpec, _fibonacci_directions, discretize_ball, \
    discretize_sphere
from .kernels import KernelSpec, potential_field
from .measures import DiscreteMeasure, canonical_suite, measure_from_cloud

SCHEMA_VERSION = 1
SUBCOMMANDS = ("energy", "capacity", "balayage", "condenser", "thinness", "verify")


class InputError(Exception):
    """Anything wrong with the input file or its fields (exit code 1)."""


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    payload: dict
    out_dir: Path
    alpha: float  # resolved: flag overrides payload overrides default 2.0
    tol_scale: float
    q: float
    kmax: int


# ---------------------------------------------------------------------------
# strict input parsing

def _require_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise InputError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise InputError(f"unknown field(s) {unknown} in {where}; "
                         f"allowed: {sorted(allowed)}")


def _load_payload(path, subcommand):
    try:
        with open(path) as f:
            payload = json.load(f)
    except FileNotFoundError:
        raise InputError(f"input file not found: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"malformed JSON in {path}: {e.msg} "
                         f"at line {e.lineno} column {e.colno}")
    allowed = {
        "energy": {"schema_version", "alpha", "measure", "grid", "domain"},
        "capacity": {"schema_version", "alpha", "body"},
        "balayage": {"schema_version", "alpha", "source", "domain", "n_boundary"},
        "condenser": {"schema_version", "alpha", "domain", "plate_mesh", "options"},
        "thinness": {"schema_version", "alpha", "profile"},
        "verify": {"schema_version", "alpha", "measures", "inject_fault"},
    }[subcommand]
    _require_keys(payload, allowed, "input")
    if payload.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise InputError(f"unsupported schema_version {payload['schema_version']}")
    return payload


def _measure_from(d, where="measure"):
    if "suite" in d:
        _require_keys(d, {"suite"}, where)
        suite = canonical_suite()
        if d["suite"] not in suite:
            raise InputError(f"unknown suite measure {d['suite']!r}; "
                             f"choose from {sorted(suite)}")
        return suite[d["suite"]]
    _require_keys(d, {"points", "weights", "cell_radii", "n"}, where)
    try:
        return DiscreteMeasure.from_dict(d)
    except (ValueError, KeyError) as e:
        raise InputError(f"invalid {where}: {e}")


def _domain_from(d, where="domain"):
    variant = d.get("variant")
    allowed = {
        "Ball": {"variant", "n", "center", "radius"},
        "BallComplement": {"variant", "n", "center", "radius"},
        "HalfSpace": {"variant", "n", "normal", "offset"},
        "RotationBodyComplement": {"variant", "n", "profile"},
    }.get(variant)
    if allowed is None:
        raise InputError(f"{where}.variant must be one of Ball, BallComplement, "
                         f"HalfSpace, RotationBodyComplement")
    _require_keys(d, allowed, where)
    if variant == "RotationBodyComplement":
        _require_keys(d["profile"], {"family", "s", "q", "k_max"}, f"{where}.profile")
    try:
        return DomainSpec.from_dict(d)
    except (ValueError, KeyError) as e:
        raise InputError(f"invalid {where}: {e}")


def _grid_from(d, where="grid"):
    _require_keys(d, {"L", "M", "origin"}, where)
    try:
        return GridSpec(L=float(d["L"]), M=int(d.get("M", 64)),
                        origin=tuple(d.get("origin", (0.0, 0.0, 0.0))))
    except (ValueError, KeyError) as e:
        raise InputError(f"invalid {where}: {e}")


def _cloud_from(d, where):
    _require_keys(d, {"kind", "center", "radius", "count"}, where)
    try:
        kind = d["kind"]
        center = tuple(d.get("center", (0.0, 0.0, 0.0)))
        if kind == "sphere":
            return discretize_sphere(center, float(d["radius"]), int(d["count"]))
        if kind == "ball":
            return discretize_ball(center, float(d["radius"]), int(d["count"]))
        raise InputError(f"{where}.kind must be 'sphere' or 'ball'")
    except ValueError as e:
        raise InputError(f"invalid {where}: {e}")


def _auto_grid(mu, margin_factor=2.5):
    reach = float((np.linalg.norm(mu.points, axis=1) + mu.cell_radii).max())
    return GridSpec(L=margin_factor * reach, M=48, origin=(0.0, 0.0, 0.0))


# ---------------------------------------------------------------------------
# artifact writers

def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(_jsonable(obj), f, indent=2, sort_keys=True)
        f.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _check(name, residual, tolerance):
    residual = float(residual)
    return {"name": name, "residual": residual, "tolerance": float(tolerance),
            "passed": bool(residual <= tolerance)}


# ---------------------------------------------------------------------------
# subcommands; each returns (result dict, check rows, artifact names)

def cmd_energy(cfg, out):
    payload = cfg.payload
    spec = KernelSpec(3, cfg.alpha)
    mu = _measure_from(payload["measure"])
    grid = _grid_from(payload["grid"]) if "grid" in payload else _auto_grid(mu)

    std = smoothed_standard_energy(mu, spec)
    wk, tail = weak_energy(mu, spec, grid)
    result = {"alpha": cfg.alpha, "standard_energy": std, "weak_energy": wk,
              "weak_tail_estimate": tail, "grid": grid.to_dict(),
              "total_mass": mu.total_mass, "n_atoms": len(mu)}
    try:
        result["deny_schwartz_energy"] = deny_schwartz_energy(mu, spec)
    except ValueError:
        result["deny_schwartz_energy"] = None

    checks = []
    if std > 0.0:
        checks.append(_check("weak_vs_standard", abs(wk - std) / std,
                             cfg.tol_scale * 0.02 + tail / std))
    if "domain" in payload:
        D = _domain_from(payload["domain"])
        result["green_energy"] = green_energy(mu, D, spec)
        r = identity_residuals(mu, D, spec)
        result["identity_residuals"] = r.as_dict()
        checks += [
            _check("green_vs_weak", r.green_vs_weak, cfg.tol_scale * 0.03),
            _check("green_vs_difference", r.green_vs_difference, cfg.tol_scale * 0.03),
            _check("potential_sup", r.potential_sup, cfg.tol_scale * 0.02),
        ]

    # radial potential table along the +x ray
    reach = float(np.linalg.norm(mu.points, axis=1).max() + mu.cell_radii.max())
    dist = np.linspace(0.05 * reach + 1e-9, 3.0 * max(reach, 1e-6), 80)
    pts = np.zeros((dist.size, 3))
    pts[:, 0] = dist
    vals = potential_field(mu, pts, spec)
    _write_csv(out / "potential_profile.csv", ["distance", "potential"],
               list(zip(dist.tolist(), vals.tolist())))
    plotting.potential_profile(out / "potential_profile.png", dist, vals,
                               title=f"potential along +x ray (alpha={cfg.alpha:g})")
    plotting.weight_scatter(out / "measure_weights.png", mu.points, mu.weights,
                            title="input measure")
    return result, checks, ["potential_profile.csv", "potential_profile.png",
                            "measure_weights.png"]


def cmd_capacity(cfg, out):
    spec = KernelSpec(3, cfg.alpha)
    cloud = _cloud_from(cfg.payload["body"], "body")
    res = capacitary_measure(cloud, spec)
    result = {"alpha": cfg.alpha, "capacity": res.capacity, "w_value": res.w_value,
              "kkt_residual": res.kkt_residual,
              "total_mass": res.measure.total_mass, "n_nodes": len(cloud)}
    checks = [
        _check("kkt_residual", res.kkt_residual, 1e-6 * cfg.tol_scale),
        _check("normalization_residual", abs(res.measure.total_mass - 1.0), 1e-9),
    ]
    res.measure.to_csv(out / "capacitary_measure.csv")
    plotting.weight_scatter(out / "capacitary_weights.png", res.measure.points,
                            res.measure.weights, title="capacitary weights")
    return result, checks, ["capacitary_measure.csv", "capacitary_weights.png"]


def _match_points(D):
    """Test points in the complement where swept and source potentials agree."""
    dirs = _fibonacci_directions(24)
    c = np.asarray(D.center) if D.variant != "HalfSpace" else None
    if D.variant == "Ball":
        radii = D.radius * np.array([1.2, 1.6, 2.4])
    elif D.variant == "BallComplement":
        radii = D.radius * np.array([0.25, 0.5, 0.8])
    else:
        raise InputError("balayage checks support Ball and BallComplement domains")
    return (c[None, None, :] + radii[:, None, None] * dirs[None, :, :]).reshape(-1, 3)


def cmd_balayage(cfg, out):
    payload = cfg.payload
    spec = KernelSpec(3, cfg.alpha)
    mu = _measure_from(payload["source"], "source")
    D = _domain_from(payload["domain"])
    n_boundary = int(payload.get("n_boundary", 1000))
    # the analytic route only evaluates densities on the target, so it can
    # afford a fine exterior mesh; the projection fallback builds a Gram
    # matrix over the target and needs the moderate one
    fine = {"n_dirs": 512, "n_radial": 32} if cfg.alpha < 2.0 else {}
    target = default_sweep_target(D, spec, n_boundary=n_boundary, **fine)
    try:
        swept = sweep_measure_analytic(mu, D, spec, target)
        route = "analytic"
    except (ValueError, NotImplementedError):
        target = default_sweep_target(D, spec, n_boundary=n_boundary)
        swept = balayage_project(mu, target, spec).swept
        route = "projection"
    m_in, m_out, preserved = mass_preservation_check(mu, D, spec, target=target)

    pts = _match_points(D)
    p_src = potential_field(mu, pts, spec)
    p_sw = potential_field(swept, pts, spec)
    pot_res = float(np.max(np.abs(p_sw - p_src) / (1.0 + np.abs(p_src))))

    mass_tol = (1e-3 if cfg.alpha == 2.0 else 1e-2) * cfg.tol_scale
    checks = [
        _check("balayage_mass_residual", abs(m_out - m_in) / max(1.0, abs(m_in)),
               mass_tol),
        _check("balayage_potential_residual", pot_res, 0.02 * cfg.tol_scale),
    ]
    result = {"alpha": cfg.alpha, "route": route, "mass_in": m_in, "mass_out": m_out,
              "mass_preserved": preserved, "n_target_nodes": len(target),
              "potential_residual": pot_res}

    swept.to_csv(out / "swept_measure.csv")
    order = np.argsort(np.linalg.norm(pts, axis=1))
    _write_csv(out / "potential_match.csv",
               ["distance", "source_potential", "swept_potential"],
               list(zip(np.linalg.norm(pts, axis=1)[order].tolist(),
                        p_src[order].tolist(), p_sw[order].tolist())))
    plotting.density_slice(out / "swept_measure.png", swept.points, swept.weights)
    plotting.potential_profile(out / "potential_match.png",
                               np.linalg.norm(pts, axis=1), p_sw - p_src,
                               title="swept minus source potential")
    return result, checks, ["swept_measure.csv", "potential_match.csv",
                            "swept_measure.png", "potential_match.png"]


def cmd_condenser(cfg, out):
    payload = cfg.payload
    spec = KernelSpec(3, cfg.alpha)
    D = _domain_from(payload["domain"])
    plate = _cloud_from(payload["plate_mesh"], "plate_mesh")
    options = dict(payload.get("options", {}))
    _require_keys(options, {"route"}, "options")
    route = options.get("route", "standard")
    if route not in ("standard", "weak"):
        raise InputError("options.route must be 'standard' or 'weak'")

    try:
        target = default_sweep_target(D, spec)
        A = Condenser(plate, D, target, spec)
    except (ValueError, NotImplementedError) as e:
        raise InputError(str(e))
    sol = (solve_standard_problem if route == "standard" else solve_weak_problem)(A)
    ver = verify_condenser_measure(sol)

    caps = [sol.c_g_A1, sol.c_alpha_A, sol.c_dot_alpha_A]
    spread = (max(caps) - min(caps)) / sol.c_g_A1
    checks = [
        _check("capacity_chain_spread", spread, 0.03 * cfg.tol_scale),
        _check("plate_potential_dev", ver["a1_max_dev"], 0.02 * cfg.tol_scale),
        _check("target_potential_dev", ver["a2_max_dev"], 0.02 * cfg.tol_scale),
        _check("gap_range_violation", ver["gap_range_violation"], 1e-6),
    ]
    if sol.residuals.get("mesh_resolution_failure"):
        checks.append(_check("standard_vs_weak", sol.residuals["standard_vs_weak"],
                             0.05 * cfg.tol_scale))
    result = {"alpha": cfg.alpha, "route": route,
              "c_g_A1": sol.c_g_A1, "c_alpha_A": sol.c_alpha_A,
              "c_dot_alpha_A": sol.c_dot_alpha_A,
              "residuals": sol.residuals, "verification": ver,
              "n_plate_nodes": len(plate), "n_target_nodes": len(A.target),
              "plate_mass_pos": sol.residuals["plate_mass_pos"],
              "plate_mass_neg": sol.residuals["plate_mass_neg"]}

    sol.mu_A.to_csv(out / "condenser_measure.csv")
    prof = sol.potential_profile
    rows = []
    for region in ("a1", "gap", "a2"):
        d = np.linalg.norm(prof[region + "_points"] - np.asarray(D.center), axis=1)
        rows += [(region, float(di), float(vi))
                 for di, vi in zip(d, prof[region + "_values"])]
    _write_csv(out / "potential_profile.csv", ["region", "distance", "potential"],
               rows)
    dist = np.array([r[1] for r in rows])
    vals = np.array([r[2] for r in rows])
    plotting.potential_profile(out / "potential_profile.png", dist, vals,
                               title="condenser potential profile")
    plotting.weight_scatter(out / "condenser_weights.png", sol.mu_A.points,
                            sol.mu_A.weights, title="condenser measure")
    return result, checks, ["condenser_measure.csv", "potential_profile.csv",
                            "potential_profile.png", "condenser_weights.png"]


def cmd_thinness(cfg, out):
    payload = cfg.payload
    spec = KernelSpec(3, cfg.alpha)
    prof_d = dict(payload["profile"])
    _require_keys(prof_d, {"family", "s", "q", "k_max"}, "profile")
    q = cfg.q if cfg.q is not None else float(prof_d.get("q", 2.0))
    kmax = cfg.kmax if cfg.kmax is not None else \
        int(prof_d.get("k_max", default_shell_count(q)))
    try:
        profile = ProfileSpec(family=prof_d["family"], s=float(prof_d["s"]),
                              q=q, k_max=kmax)
    except (ValueError, KeyError) as e:
        raise InputError(f"invalid profile: {e}")

    verdict = thinness_classify(profile, spec)
    result = {"alpha": cfg.alpha, "profile": profile.to_dict(),
              **verdict.to_dict()}
    rows = list(zip(range(1, len(verdict.wiener_partial_sums) + 1),
                    verdict.wiener_partial_sums, verdict.capacity_partial_sums))
    _write_csv(out / "partial_sums.csv",
               ["k", "wiener_partial_sum", "capacity_partial_sum"], rows)
    plotting.partial_sums(out / "partial_sums.png", verdict.wiener_partial_sums,
                          verdict.capacity_partial_sums, q,
                          title=f"{profile.family}(s={profile.s:g}): "
                                f"{verdict.classification}")
    return result, [], ["partial_sums.csv", "partial_sums.png"]


def cmd_verify(cfg, out):
    payload = cfg.payload
    fault = payload.get("inject_fault")
    if fault not in (None, "balayage_mass", "normalization"):
        raise InputError("inject_fault must be null, 'balayage_mass', "
                         "or 'normalization'")
    suite = canonical_suite()
    names = payload.get("measures", sorted(suite))
    unknown = sorted(set(names) - set(suite))
    if unknown:
        raise InputError(f"unknown measure(s) {unknown}; choose from {sorted(suite)}")

    spec = KernelSpec(3, cfg.alpha)
    D = DomainSpec("Ball", radius=1.0)
    checks = []

    # capacitary normalization (and the capacity value at the classical order)
    res = capacitary_measure(discretize_sphere((0, 0, 0), 1.0, 600), spec)
    mass = res.measure.total_mass * (1.02 if fault == "normalization" else 1.0)
    checks.append(_check("normalization_residual", abs(mass - 1.0), 1e-9))
    if cfg.alpha == 2.0:
        checks.append(_check("sphere_capacity_error", abs(res.capacity - 1.0),
                             0.012 * cfg.tol_scale))

    # balayage of an interior atom: mass account and exterior potential match
    # (analytic sweep and potential sums are linear in the target, so the
    # order < 2 exterior mesh can be fine without memory cost)
    mu = DiscreteMeasure([[0.0, 0.0, 0.5]], [1.0], [0.01])
    fine = {"n_dirs": 512, "n_radial": 32} if cfg.alpha < 2.0 else {}
    target = default_sweep_target(D, spec, **fine)
    swept = sweep_measure_analytic(mu, D, spec, target)
    if fault == "balayage_mass":
        swept = swept.scaled(0.5)
    m_out = swept.total_mass
    if cfg.alpha < 2.0:
        m_out += exterior_tail_mass(mu.points[0], D, spec)
    mass_tol = (1e-3 if cfg.alpha == 2.0 else 1e-2) * cfg.tol_scale
    checks.append(_check("balayage_mass_residual", abs(m_out - 1.0), mass_tol))
    pts = _match_points(D)
    p_src = potential_field(mu, pts, spec)
    p_sw = potential_field(swept, pts, spec)
    checks.append(_check("balayage_potential_residual",
                         float(np.max(np.abs(p_sw - p_src) / (1.0 + np.abs(p_src)))),
                         0.02 * cfg.tol_scale))

    # identity battery + weak-vs-standard on the requested canonical measures
    grid = GridSpec(L=1.8, M=48, origin=(0.0, 0.0, 0.0))
    for name in names:
        m = suite[name]
        r = identity_residuals(m, D, spec)
        checks += [
            _check(f"{name}_green_vs_weak", r.green_vs_weak, 0.03 * cfg.tol_scale),
            _check(f"{name}_green_vs_difference", r.green_vs_difference,
                   0.03 * cfg.tol_scale),
            _check(f"{name}_potential_sup", r.potential_sup, 0.02 * cfg.tol_scale),
        ]
        std = smoothed_standard_energy(m, spec)
        wk, tail = weak_energy(m, spec, grid, subdiv=3)
        checks.append(_check(f"{name}_weak_vs_standard", abs(wk - std) / std,
                             0.02 * cfg.tol_scale + tail / std))

    result = {"alpha": cfg.alpha, "inject_fault": fault, "measures": list(names),
              "n_checks": len(checks),
              "n_failed": sum(not c["passed"] for c in checks)}
    _write_csv(out / "residuals.csv", ["name", "residual", "tolerance", "passed"],
               [(c["name"], c["residual"], c["tolerance"], c["passed"])
                for c in checks])
    plotting.residual_bars(out / "residuals.png", [c["name"] for c in checks],
                           [max(c["residual"], 1e-300) for c in checks],
                           [c["tolerance"] for c in checks])
    return result, checks, ["residuals.csv", "residuals.png"]


_DISPATCH = {"energy": cmd_energy, "capacity": cmd_capacity,
             "balayage": cmd_balayage, "condenser": cmd_condenser,
             "thinness": cmd_thinness, "verify": cmd_verify}


# ---------------------------------------------------------------------------

def _build_parser():
    p = argparse.ArgumentParser(
        prog="rieszpot",
        description="Riesz potential theory runs: energies, capacities, balayage, "
                    "condensers, thinness, verification.")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--input", required=True, help="JSON input file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--alpha", type=float, default=None,
                        help="kernel order override")
        sp.add_argument("--tol-scale", type=float, default=None,
                        help="scale every verification tolerance")
        sp.add_argument("--q", type=float, default=None,
                        help="shell ratio override (thinness)")
        sp.add_argument("--kmax", type=int, default=None,
                        help="shell count override (thinness)")
    return p


def run(cfg):
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result, checks, artifacts = _DISPATCH[cfg.subcommand](cfg, out)
    result["schema_version"] = SCHEMA_VERSION
    result["checks"] = checks
    _write_json(out / "result.json", result)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": cfg.subcommand,
        "wall_clock_seconds": time.perf_counter() - t0,
        "versions": {"python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "matplotlib": matplotlib.__version__,
                     "rieszpot": __version__},
        "tolerances": {c["name"]: c["tolerance"] for c in checks},
        "tol_scale": cfg.tol_scale,
        "outputs": sorted(artifacts + ["result.json"]),
    }
    _write_json(out / "manifest.json", manifest)
    for c in checks:
        mark = "PASS" if c["passed"] else "FAIL"
        print(f"[{mark}] {c['name']}: residual {c['residual']:.3e} "
              f"(tolerance {c['tolerance']:.3e})")
    failing = [c for c in checks if not c["passed"]]
    if failing:
        worst = failing[0]
        print(f"verification failure: {worst['name']} = {worst['residual']:.3e} "
              f"exceeds tolerance {worst['tolerance']:.3e}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        payload = _load_payload(args.input, args.subcommand)
        alpha = args.alpha if args.alpha is not None else \
            float(payload.get("alpha", 2.0))
        tol_scale = args.tol_scale if args.tol_scale is not None else \
            (1.0 if alpha == 2.0 else 2.0)
        cfg = RunConfig(subcommand=args.subcommand, payload=payload,
                        out_dir=Path(args.out), alpha=alpha,
                        tol_scale=tol_scale, q=args.q, kmax=args.kmax)
        return run(cfg)
    except InputError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 1
    except (ValueError, NotImplementedError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

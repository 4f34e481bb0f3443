"""Command-line entry point.

Every subcommand prints a JSON summary on stdout. With ``-o`` it also writes
its data files atomically next to a manifest sidecar. Exit codes: 0 when
all reports pass, 1 when any report fails or is undecided, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from . import __version__
from . import approx, branches, domain, verify
from .io import cloud_csv, dumps, polylines_csv, schedule_to_json, write_outputs, load_params
from .schedule import ConstructionParams, build_schedule, demo_schedule, unit_preset, validate_schedule

VERIFY_IDS = (
    "fiber_hausdorff",
    "fiber_cover_area",
    "eval_P_remark",
    "estimate_C",
    "slope_statistic",
    "verify_sublevel_nesting",
    "verify_phi_cauchy",
    "verify_mean_value",
    "hull_separation",
)


class UsageError(Exception):
    pass


def parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise UsageError(f"not a complex number: {text!r}") from exc


def parse_point(text: str) -> np.ndarray:
    return np.array([parse_complex(t) for t in text.split(",")], dtype=complex)


def random_base_points(count: int, R: float, n: int, seed: int) -> np.ndarray:
    """``count`` base points drawn uniformly from the ball of radius R in C^(n-1)."""
    rng = np.random.default_rng(seed)
    m = n - 1
    g = rng.standard_normal((count, m)) + 1j * rng.standard_normal((count, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * R * rng.random((count, 1)) ** (1.0 / (2 * m))


def _add_schedule_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("schedule")
    g.add_argument("--preset", choices=("demo", "unit"), help="demo: shipped schedule; unit: eps_1 = 1, a_1 = 0")
    g.add_argument("--config", help="JSON file with ConstructionParams fields")
    g.add_argument("--n", type=int, help="dimension n")
    g.add_argument("--depth", type=int, help="truncation depth nu_max")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--safety", type=float, default=None, help="epsilon_safety in (0, 1]")
    p.add_argument("-o", "--output", help="output file; a .manifest.json sidecar is written next to it")


def _params_from_args(args) -> ConstructionParams | None:
    if args.config:
        return load_params(args.config)
    if args.n is None and args.depth is None and args.seed is None and args.safety is None:
        return None
    base = demo_schedule().params
    return ConstructionParams(
        n=args.n if args.n is not None else base.n,
        nu_max=args.depth if args.depth is not None else base.nu_max,
        seed=args.seed if args.seed is not None else base.seed,
        epsilon_safety=args.safety if args.safety is not None else base.epsilon_safety,
    )


def _schedule(args, min_depth: int = 1):
    if args.preset == "unit":
        return unit_preset(max(min_depth, 1))
    params = _params_from_args(args)
    if params is None or args.preset == "demo":
        return demo_schedule()
    return build_schedule(params)


def _config_record(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("output", "func")}


# -- subcommands ------------------------------------------------------------


def cmd_schedule(args):
    s = _schedule(args)
    report = validate_schedule(s, s.depth)
    files = {args.output: schedule_to_json(s)} if args.output else {}
    summary = {"depth": s.depth, "n": s.params.n, "eps": s.eps, "delta": s.delta, "notes": s.notes,
               "validation": report.checked_conditions, "passed": report.passed}
    return summary, files, s, [report.passed]


def cmd_eval(args):
    s = _schedule(args, min_depth=args.nu)
    z, w = parse_point(args.z), parse_complex(args.w)
    val = branches.eval_P(z, w, args.nu, s)
    summary = {"nu": args.nu, "z": z, "w": w, "log_abs_P": val.log_mag, "arg_P": val.arg,
               "phi_nu": val.log_mag / 2.0**args.nu}
    if args.tol is not None:
        est = branches.eval_phi(z, w, args.tol, args.cap or s.params.nu_max, s)
        summary["phi_estimate"] = est
    return summary, {}, s, [True]


def cmd_slice(args):
    s = _schedule(args)
    grid = approx.real_segment(args.R, args.count, s.params.n)
    smp = approx.sample_slice(grid, args.nu, s, R=args.R)
    z, w = smp.points()
    files = {args.output: cloud_csv(z, w, args.nu)} if args.output else {}
    summary = {"nu": args.nu, "grid_points": args.count, "values": int(w.size), "R": args.R}
    return summary, files, s, [True]


def cmd_hausdorff(args):
    s = _schedule(args)
    grid = approx.real_segment(args.R, args.grid, s.params.n)
    depths = range(max(1, math.ceil(args.R)), args.mu + 1) if args.all_pairs else (args.nu, args.mu)
    table = approx.hausdorff_table(grid, depths, s)
    rows = [{"nu": r.nu, "mu": r.mu, "max": r.per_fiber_max, "bound": r.bound, "pass": r.passed} for r in table]
    judged = [r.passed for r in table if r.nu >= args.R]
    files = {args.output: dumps(rows)} if args.output else {}
    return {"pairs": rows, "passed": all(judged)}, files, s, judged


def _verify_one(args, s):
    vid = args.lemma_id
    rng_seed = args.seed_samples
    if vid == "fiber_hausdorff":
        grid = approx.real_segment(args.R, args.grid, s.params.n)
        t = approx.hausdorff_table(grid, (args.nu, args.mu), s)[0]
        return verify.LemmaReport(vid, {"R": args.R, "grid": args.grid, "nu": t.nu, "mu": t.mu},
                                  t.bound - t.per_fiber_max, "pass" if t.passed else "fail", 0.0,
                                  {"per_fiber_max": t.per_fiber_max, "bound": t.bound})
    if vid == "fiber_cover_area":
        zs = random_base_points(args.samples, args.R, s.params.n, rng_seed)
        try:
            area = [approx.fiber_cover_area(z, args.nu, s, cap=args.mu) for z in zs][0]
        except approx.CoverViolation as exc:
            return verify.LemmaReport(vid, {"nu": args.nu, "cap": args.mu}, -1.0, "fail", 0.0, {"error": str(exc)})
        return verify.LemmaReport(vid, {"nu": args.nu, "cap": args.mu, "points": len(zs)}, 1.0, "pass", 0.0,
                                  {"area": area})
    if vid == "eval_P_remark":
        x = np.linspace(-1, 1, args.grid)
        pts = [(complex(a), complex(b)) for a in x for b in x]
        audit = verify.remark_audit(pts, args.nu, s)
        audit.pop("rows")
        return verify.LemmaReport(vid, {"nu": args.nu, "grid": args.grid}, 1.0, "pass", 0.0, audit)
    if vid == "estimate_C":
        C = verify.estimate_C(args.grid)
        return verify.LemmaReport(vid, {"grid_resolution": args.grid}, C, "pass" if 0 < C < 1 else "fail", 0.0, {"C": C})
    if vid == "slope_statistic":
        ss = verify.slope_statistic(s.a[args.nu - 1], args.nu, {s.directions[args.nu - 1]},
                                    verify.branch_point_deltas(args.nu, s), args.samples, s, seed=rng_seed)
        return verify.LemmaReport(vid, {"nu": args.nu, "samples": args.samples}, ss.best_ratio - ss.threshold,
                                  "pass" if ss.exceeds_threshold else "fail", 0.0, {"sample": ss})
    if vid == "verify_sublevel_nesting":
        return verify.verify_sublevel_nesting(args.nu, args.mu, args.R, args.grid, s)
    if vid == "verify_phi_cauchy":
        region = verify.region_away_from_fiber(args.samples, args.nu, args.r, s, seed=rng_seed)
        return verify.verify_phi_cauchy(region, args.nu, s)
    if vid == "verify_mean_value":
        return verify.verify_mean_value(parse_point(args.center), parse_point(args.direction), args.radius,
                                        args.nu, args.mode, s)
    if vid == "hull_separation":
        return _hull_report(args, s, parse_point(args.center))
    raise UsageError(f"unknown lemma id {vid!r}")


def cmd_verify(args):
    s = _schedule(args, min_depth=max(args.nu, args.mu or 0) + 1)
    rep = _verify_one(args, s)
    files = {args.output: dumps(rep)} if args.output else {}
    return rep, files, s, [rep.passed]


def _hull_report(args, s, q):
    E = verify.cap_fiber_samples(args.samples, args.R, args.cap, s, seed=args.seed_samples)
    return verify.hull_separation(q, args.R, E, args.cap, s)


def cmd_hull(args):
    s = _schedule(args)
    E = verify.cap_fiber_samples(args.samples, args.R, args.cap, s, seed=args.seed_samples)
    nu_min = max(1, math.ceil(args.R))
    depths = list(range(nu_min, args.cap + 1))
    table = verify.sublevel_table(E, depths, s)
    rng = np.random.default_rng(args.seed_samples)
    reports = []
    for _ in range(args.probes):
        q = _out_probe(rng, s, args.R, args.cap)
        reports.append(verify.hull_separation(q, args.R, E, args.cap, s, E_table=table))
    files = {args.output: dumps(reports)} if args.output else {}
    summary = {"probes": len(reports), "statuses": [r.status for r in reports],
               "separating_depths": [r.details.get("separating_depth") for r in reports]}
    return summary, files, s, [r.passed for r in reports]


def _out_probe(rng, s, R: float, cap: int) -> np.ndarray:
    """A point of the R-ball whose w sits at least 0.3 away from the depth-cap fiber."""
    n1 = s.params.n - 1
    while True:
        z = rng.uniform(-1, 1, n1) * R / math.sqrt(2 * n1) + 1j * rng.uniform(-1, 1, n1) * R / math.sqrt(2 * n1)
        room = R * R - float(np.sum(np.abs(z) ** 2))
        w = math.sqrt(room) * math.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
        fib = branches.fibers(z[None, :], cap, s)[0]
        if np.abs(w - fib).min() >= 0.3:
            return np.concatenate([z, [w]])


def cmd_domain(args):
    s = _schedule(args)
    C1 = args.C1 if args.C1 is not None else domain.default_C1(s, args.cap)
    rays = domain.rays_from_fiber(args.rays, args.cap, s, seed=args.seed_samples)
    bs = domain.sample_boundary(rays, C1, args.tol, args.cap, s)
    files = {}
    if args.output:
        files[args.output] = cloud_csv(bs.points[:, :-1], bs.points[:, -1], args.cap)
    yield_ = len(bs.points) / max(1, len(rays))
    summary = {"C1": C1, "rays": len(rays), "boundary_points": len(bs.points), "yield": yield_,
               "max_residual": float(np.abs(bs.residuals).max()) if len(bs.residuals) else None,
               "gradient_floor": bs.gradient_floor, "h": bs.h, "skipped": len(bs.skipped)}
    return summary, files, s, [len(bs.points) > 0]


def cmd_foliate(args):
    s = _schedule(args, min_depth=args.N)
    C1 = args.C1 if args.C1 is not None else 1.0
    spec = domain.DomainSpec(C1=C1, C2=C1 + 1.0, depth_N=args.N, a_level=args.a_level)
    sec = domain.real_zw_section(s.params.n, args.extent, (args.grid, args.grid))
    cs = [parse_complex(c) for c in args.c]
    fam = domain.foliation_slice(sec, spec, cs, args.cap or s.params.nu_max, s)
    curves = [(i, cur.c, cur.points) for i, cur in enumerate(fam.curves)]
    files = {args.output: polylines_csv(curves)} if args.output else {}
    summary = {"levels": cs, "curves": len(curves), "points": int(sum(len(c[2]) for c in curves))}
    return summary, files, s, [True]


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wermer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="build, validate and export a schedule")
    _add_schedule_args(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("eval", help="evaluate P_nu and phi_nu at one point")
    _add_schedule_args(p)
    p.add_argument("--z", required=True, help="base point, comma separated for n > 2")
    p.add_argument("--w", required=True)
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--tol", type=float, help="also iterate phi until successive values agree to tol")
    p.add_argument("--cap", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("slice", help="export fibers over a real segment as CSV")
    _add_schedule_args(p)
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--count", type=int, default=11)
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("hausdorff", help="fiber Hausdorff distances against 2^-nu")
    _add_schedule_args(p)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--nu", type=int, default=1)
    p.add_argument("--mu", type=int, default=12)
    p.add_argument("--grid", type=int, default=41)
    p.add_argument("--all-pairs", action="store_true", help="every pair R <= nu < mu")
    p.set_defaults(func=cmd_hausdorff)

    p = sub.add_parser("verify", help="run one sampled check by id")
    _add_schedule_args(p)
    p.add_argument("lemma_id", choices=VERIFY_IDS)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--nu", type=int, default=4)
    p.add_argument("--mu", type=int, default=8)
    p.add_argument("--grid", type=int, default=41)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed-samples", type=int, default=0)
    p.add_argument("--r", type=float, default=0.5, help="distance from the fiber for verify_phi_cauchy")
    p.add_argument("--center", default="0.3,0.5")
    p.add_argument("--direction", default="1,1")
    p.add_argument("--radius", type=float, default=0.1)
    p.add_argument("--mode", choices=("pluriharmonic", "submean"), default="pluriharmonic")
    p.add_argument("--cap", type=int, default=14)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("hull", help="separate random OUT probes from depth-cap fiber samples")
    _add_schedule_args(p)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--cap", type=int, default=14)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--probes", type=int, default=10)
    p.add_argument("--seed-samples", type=int, default=0)
    p.set_defaults(func=cmd_hull)

    p = sub.add_parser("domain", help="sample the boundary of the domain by ray bisection")
    _add_schedule_args(p)
    p.add_argument("--cap", type=int, default=12)
    p.add_argument("--rays", type=int, default=200)
    p.add_argument("--C1", type=float)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed-samples", type=int, default=0)
    p.set_defaults(func=cmd_domain)

    p = sub.add_parser("foliate", help="level curves |P_N| = |c| on the (Re z_1, Re w) section")
    _add_schedule_args(p)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--c", nargs="+", required=True)
    p.add_argument("--a-level", type=float, default=0.0)
    p.add_argument("--C1", type=float)
    p.add_argument("--extent", type=float, default=2.0)
    p.add_argument("--grid", type=int, default=128)
    p.add_argument("--cap", type=int)
    p.set_defaults(func=cmd_foliate)
    return parser


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        summary, files, s, flags = args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"wermer: error: {exc}", file=sys.stderr)
        return 2
    if files:
        seeds = {"schedule": s.params.seed, "samples": getattr(args, "seed_samples", None)}
        write_outputs(files, ["wermer", *argv], _config_record(args), s, seeds, started)
    sys.stdout.write(dumps(summary))
    return 0 if all(flags) else 1


def main() -> None:
    sys.exit(run())

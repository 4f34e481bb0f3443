"""Acceptance suite: ten finite-depth checks at their stated tolerances and time budgets.

Each test prints one ``ACCEPTANCE <k> PASS|FAIL`` line (shown even without ``-s``)
and then asserts. Reports for the slope trend are archived under ``reports/``.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from wermer.approx import fiber_cover_area, hausdorff_table, real_segment
from wermer.branches import (
    eval_P,
    eval_P_remark,
    fibers,
    gray_fiber_from_terms,
    log_abs_on_fiber,
    root_terms,
)
from wermer.io import atomic_write_text, dumps
from wermer.schedule import from_values, unit_preset
from wermer.verify import (
    branch_point_deltas,
    cap_fiber_samples,
    hull_separation,
    region_away_from_fiber,
    slope_statistic,
    sublevel_table,
    verify_mean_value,
    verify_phi_cauchy,
    verify_sublevel_nesting,
    winding_number,
)

REPORTS = Path(__file__).resolve().parent.parent / "reports"


@pytest.fixture
def announce(capsys):
    def emit(k: int, ok: bool, runtime: float, budget: float, detail: str) -> None:
        line = f"ACCEPTANCE {k:2d} {'PASS' if ok else 'FAIL'}  {runtime:6.2f}s/{budget:.0f}s  {detail}"
        with capsys.disabled():
            print("\n" + line)

    return emit


def _random_points(rng, count, zr=1.0, wr=2.0):
    z = zr * np.sqrt(rng.random(count)) * np.exp(2j * np.pi * rng.random(count))
    w = wr * np.sqrt(rng.random(count)) * np.exp(2j * np.pi * rng.random(count))
    return z, w


def test_1_fiberwise_hausdorff(demo, announce):
    t0 = time.perf_counter()
    table = hausdorff_table(real_segment(1.0, 41), range(1, 13), demo)
    runtime = time.perf_counter() - t0
    worst = min(r.bound - r.per_fiber_max for r in table)
    ok = all(r.passed for r in table) and len(table) == 66 and runtime < 30
    announce(1, ok, runtime, 30, f"66 pairs 1<=nu<mu<=12, 41 z, worst slack {worst:.3e}")
    assert ok


def test_2_factorization_law(demo, announce):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    z, w = _random_points(rng, 200)
    terms = root_terms(z[:, None], 11, demo)
    worst = 0.0
    for nu in range(1, 11):
        fib = gray_fiber_from_terms(terms[:, :nu])
        deep = log_abs_on_fiber(gray_fiber_from_terms(terms[:, : nu + 1]), w[:, None])[:, 0]
        u = z - demo.a[nu]
        quad = (w[:, None] - fib) ** 2 - demo.eps[nu] ** 2 * u[:, None]
        via_product = np.log(np.abs(quad)).sum(axis=1)
        rel = np.abs(deep - via_product) / np.maximum(1.0, np.abs(via_product))
        worst = max(worst, float(rel.max()))
    runtime = time.perf_counter() - t0
    ok = worst <= 1e-10 and runtime < 10
    announce(2, ok, runtime, 10, f"200 points x nu=1..10, worst relative log gap {worst:.2e}")
    assert ok


def test_3_degeneration(demo, announce):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    ts = (1.0, 1 / 4, 1 / 16, 1 / 64)
    all_ok = True
    summary = []
    for nu in range(1, 6):
        z, w = _random_points(rng, 2000, 1.0, 1.5)
        keep = np.abs(w[:, None] - fibers(z[:, None], nu, demo)).min(axis=1) >= 0.1
        z, w = z[keep][:400], w[keep][:400]
        shallow = 2 * log_abs_on_fiber(fibers(z[:, None], nu, demo), w[:, None])[:, 0]
        devs = []
        for t in ts:
            s = demo.with_eps(nu + 1, t * demo.eps[nu])
            deep = log_abs_on_fiber(fibers(z[:, None], nu + 1, s), w[:, None])[:, 0]
            devs.append(float(np.abs(deep - shallow).max()))
        decreasing = all(b < a for a, b in zip(devs, devs[1:]))
        # at least linear decay in t toward zero
        all_ok &= decreasing and devs[-1] <= devs[0] * ts[-1]
        summary.append(f"nu={nu}:{devs[0]:.1e}->{devs[-1]:.1e}")
    runtime = time.perf_counter() - t0
    ok = all_ok and runtime < 10
    announce(3, ok, runtime, 10, " ".join(summary))
    assert ok


def test_4_closed_form_audit(announce):
    t0 = time.perf_counter()
    s1 = unit_preset(1)
    x = np.linspace(-1.9, 1.9, 20)
    worst1 = 0.0
    for zr in x:
        for wr in x:
            z, w = complex(zr, 0.3), complex(wr, -0.2)
            p = eval_P(z, w, 1, s1).to_complex()
            r = eval_P_remark(z, w, 1, s1).to_complex()
            worst1 = max(worst1, abs(p - r) / abs(p))
    # depth two with unit eps, independent radicands u1 = z1, u2 = z2
    s2 = from_values([1.0, 1.0], [0.0, 0.0], n=3, directions=(1, 2))
    rng = np.random.default_rng(4)
    worst_prod, worst_remark = 0.0, 0.0
    for _ in range(200):
        z = rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)
        w = complex(*rng.uniform(-1.5, 1.5, 2))
        oracle = w**4 - 2 * (z[0] + z[1]) * w**2 + (z[0] - z[1]) ** 2
        scale = max(1.0, abs(oracle))
        worst_prod = max(worst_prod, abs(eval_P(z, w, 2, s2).to_complex() - oracle) / scale)
        worst_remark = max(worst_remark, abs(eval_P_remark(z, w, 2, s2).to_complex() - oracle) / scale)
    runtime = time.perf_counter() - t0
    ok = worst1 <= 1e-12 and worst_prod <= 1e-10 and runtime < 5
    announce(4, ok, runtime, 5, f"nu=1 rel {worst1:.1e}; nu=2 product vs expansion {worst_prod:.1e}; "
             f"closed form vs expansion {worst_remark:.2e} (discrepancy reported)")
    assert ok


def test_5_sublevel_nesting(demo, announce):
    t0 = time.perf_counter()
    rep = verify_sublevel_nesting(3, 5, 2.0, 41, demo)
    control = verify_sublevel_nesting(3, 5, 2.0, 41, demo.with_eps(4, 1000 * demo.eps[3]))
    runtime = time.perf_counter() - t0
    ok = rep.passed and rep.details["item1_margin"] > 0 and rep.details["item2_margin"] > 0
    ok = ok and not control.passed and runtime < 60
    announce(5, ok, runtime, 60, f"margins {rep.details['item1_margin']:.3f}/{rep.details['item2_margin']:.3f}, "
             f"corrupted control {control.status} ({control.worst_margin:.3f})")
    assert ok


def test_6_phi_cauchy_rate(demo, announce):
    t0 = time.perf_counter()
    region = region_away_from_fiber(2000, 10, 0.5, demo, seed=6)
    rep = verify_phi_cauchy(region, 10, demo)
    runtime = time.perf_counter() - t0
    ok = rep.passed and rep.domain["measured_r"] >= 0.5 and runtime < 10
    announce(6, ok, runtime, 10, f"2000 points, max gap {rep.details.get('max_gap', float('nan')):.3e} "
             f"<= {rep.details['bound']:.3e}")
    assert ok


def test_7_pluriharmonic_mean_value(demo, announce):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    nu = 8
    statuses, worst = [], math.inf
    for _ in range(100):
        center = np.array([complex(*rng.uniform(-0.7, 0.7, 2)), complex(*rng.uniform(-1.5, 1.5, 2))])
        direction = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        radius = 0.05
        # shrink until the doubled disc is certified zero-free
        while radius > 1e-9 and winding_number(center, direction, 2 * radius, nu, demo, nodes=1024) != 0:
            radius /= 2
        rep = verify_mean_value(center, direction, radius, nu, "pluriharmonic", demo, nodes=1024, tol=1e-8)
        statuses.append(rep.status)
        worst = min(worst, rep.worst_margin)
    runtime = time.perf_counter() - t0
    ok = all(s == "pass" for s in statuses) and runtime < 10
    announce(7, ok, runtime, 10, f"100 circles at nu={nu}, {statuses.count('pass')} pass, "
             f"worst slack {worst:.2e} of 1e-8")
    assert ok


def _out_probes(rng, s, count, cap, clearance=0.3):
    out = []
    while len(out) < count:
        z = complex(*rng.uniform(-0.7, 0.7, 2))
        if abs(z) >= 1:
            continue
        w = math.sqrt(1 - abs(z) ** 2) * math.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
        if np.abs(w - fibers(z, cap, s)[0]).min() >= clearance:
            out.append(np.array([z, w]))
    return out


def test_8_hull_separation(demo, announce):
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    cap = 14
    E = cap_fiber_samples(1000, 1.0, cap, demo, seed=8)
    table = sublevel_table(E, range(1, cap + 1), demo)
    out_reports = [hull_separation(q, 1.0, E, cap, demo, E_table=table) for q in _out_probes(rng, demo, 10, cap)]
    in_probes = cap_fiber_samples(10, 1.0, cap, demo, seed=80)
    in_reports = [hull_separation(q, 1.0, E, cap, demo, E_table=table) for q in in_probes]
    runtime = time.perf_counter() - t0
    out_ok = all(r.passed and r.domain["verdict"] == "OUT" and r.details["separating_depth"] <= cap
                 for r in out_reports)
    in_ok = all(r.passed and r.domain["verdict"] == "IN" and r.details["separating_depth"] is None
                for r in in_reports)
    ok = out_ok and in_ok and runtime < 60
    depths = [r.details["separating_depth"] for r in out_reports]
    announce(8, ok, runtime, 60, f"OUT probes separated at depths {depths}; IN probes unseparated: {in_ok}")
    assert ok


def test_9_fiber_cover(demo, announce):
    rng = np.random.default_rng(9)
    t0 = time.perf_counter()
    zs = np.sqrt(rng.random(10)) * np.exp(2j * np.pi * rng.random(10))
    ok = True
    for z in zs:
        for nu in range(4, 13):
            area = fiber_cover_area(z, nu, demo)  # raises if a deeper fiber leaves the cover
            ok &= area == pytest.approx(math.pi * 2.0**-nu, rel=1e-15)
    runtime = time.perf_counter() - t0
    ok = ok and runtime < 10
    announce(9, ok, runtime, 10, f"10 z x nu=4..12, containment checked through depth {demo.depth}")
    assert ok


def test_10_slope_trend(demo, announce):
    t0 = time.perf_counter()
    rows = []
    for nu in range(2, 7):
        assert demo.directions[nu - 1] == 1
        ss = slope_statistic(demo.a[nu - 1], nu, {1}, branch_point_deltas(nu, demo), 200, demo, seed=nu)
        rows.append(ss)
    runtime = time.perf_counter() - t0
    best = [r.best_ratio for r in rows]
    nondecreasing = all(b >= a for a, b in zip(best, best[1:]))
    above = all(r.best_ratio > r.nu / 2 for r in rows)
    ok = nondecreasing and above and runtime < 120
    REPORTS.mkdir(exist_ok=True)
    atomic_write_text(REPORTS / "slope_trend.json", dumps({"runtime": runtime, "samples": rows}))
    announce(10, ok, runtime, 120, "best min-ratios " + ", ".join(f"{b:.1f}" for b in best)
             + f" for nu=2..6 (thresholds nu/2); archived {REPORTS.name}/slope_trend.json")
    assert ok

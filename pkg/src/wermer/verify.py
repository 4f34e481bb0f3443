"""Sampled checks of the quantitative estimates behind the construction.

Each check returns a :class:`LemmaReport` whose ``worst_margin`` is positive
exactly when every sampled instance satisfied the inequality. Nothing here
is a proof: grids, sample counts and seeds are recorded in ``domain`` so a
report can be reproduced and its resolution judged.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .approx import membership
from .branches import (
    as_points,
    gray_fiber_from_terms,
    log_abs_on_fiber,
    principal_sqrt,
    root_terms,
)
from .schedule import ConstructionSchedule

PASS, FAIL, UNKNOWN = "pass", "fail", "unknown"


@dataclass(frozen=True)
class LemmaReport:
    lemma_id: str
    domain: dict
    worst_margin: float
    status: str
    runtime: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS


def _report(lemma_id: str, domain: dict, margin: float, t0: float, details=None, unknown=False) -> LemmaReport:
    status = UNKNOWN if unknown else (PASS if margin > 0 else FAIL)
    return LemmaReport(lemma_id, domain, float(margin), status, time.perf_counter() - t0, details or {})


# -- square-root constant -------------------------------------------------


def _disc_grid(resolution: int) -> np.ndarray:
    """Grid of the closed unit disc: square lattice clipped to the disc plus boundary points."""
    x = np.linspace(-1.0, 1.0, resolution + 1)
    sq = (x[:, None] + 1j * x[None, :]).ravel()
    sq = sq[np.abs(sq) <= 1.0]
    rim = np.exp(2j * np.pi * np.arange(resolution) / resolution)
    return np.concatenate([sq, rim])


def _sqrt_pair_margin(C: float, resolution: int) -> float:
    """Worst slack of 1 <= |sqrt(z+1) -+ sqrt(z'-1)| <= 2 over |z|, |z'| <= C on the grid."""
    d = C * _disc_grid(resolution)
    u = principal_sqrt(d + 1.0)
    v = principal_sqrt(d - 1.0)
    worst = math.inf
    step = max(1, (1 << 22) // len(v))
    for start in range(0, len(u), step):
        uu = u[start : start + step, None]
        for sign in (1.0, -1.0):
            m = np.abs(uu - sign * v[None, :])
            worst = min(worst, float((m - 1.0).min()), float((2.0 - m).min()))
    return worst


def estimate_C(grid_resolution: int, steps: int = 10) -> float:
    """Largest C = k / 2^steps passing the grid test for the square-root pair bound.

    Both roots are rescaled by sqrt|zeta|, so fixing zeta = 1 loses nothing
    for the modulus; the four sign choices collapse to the two signs of the
    difference. C is located by bisection over k.
    """
    if grid_resolution < 32:
        raise ValueError("grid_resolution must be >= 32")
    lo, hi = 0, 1 << steps  # lo passes (vacuously at C = 0), hi is the open bound C < 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _sqrt_pair_margin(mid / (1 << steps), grid_resolution) > 0:
            lo = mid
        else:
            hi = mid
    return lo / (1 << steps)


@lru_cache(maxsize=None)
def working_C(grid_resolution: int = 64) -> float:
    """The single C threaded through slope checks: estimate_C rounded down to 1/64."""
    return math.floor(estimate_C(grid_resolution) * 64) / 64


# -- cones and index sets -------------------------------------------------


@dataclass(frozen=True)
class ConeSpec:
    P: frozenset[int]  # 1-based directions
    alpha: float
    on_slice: bool = False  # also require zeta_q = 0 for q outside P

    def __post_init__(self) -> None:
        if not self.P:
            raise ValueError("cone needs at least one direction")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


def cone_contains(zeta, cone: ConeSpec) -> bool:
    z = np.atleast_1d(np.asarray(zeta, dtype=complex))
    mags = np.abs(z)
    for p in cone.P:
        if not 1 <= p <= len(z):
            raise ValueError(f"direction {p} outside 1..{len(z)}")
        if mags[p - 1] == 0:
            return False
        others = np.delete(mags, p - 1)
        if np.any(others >= cone.alpha * mags[p - 1]):
            return False
    if cone.on_slice:
        outside = [q for q in range(1, len(z) + 1) if q not in cone.P]
        if any(mags[q - 1] != 0 for q in outside):
            return False
    return True


@dataclass(frozen=True)
class SliceIndexSets:
    nu: int
    z: tuple[complex, ...]
    L: dict[int, frozenset[int]]
    L_at_z: dict[int, frozenset[int]]
    L_tilde: dict[int, frozenset[int]]

    def script_L(self, P) -> frozenset[int]:
        return frozenset().union(*(self.L_at_z[p] for p in P))

    def script_L_tilde(self, P) -> frozenset[int]:
        return frozenset().union(*(self.L_tilde[p] for p in P))


def index_sets(z, nu: int, s: ConstructionSchedule) -> SliceIndexSets:
    pts = as_points(z, s.params.n)[0]
    L: dict[int, set[int]] = {p: set() for p in range(1, s.params.n)}
    at: dict[int, set[int]] = {p: set() for p in range(1, s.params.n)}
    tl: dict[int, set[int]] = {p: set() for p in range(1, s.params.n)}
    rho = s.rho[nu - 1]
    for l in range(1, nu + 1):
        p = s.directions[l - 1]
        L[p].add(l)
        d = abs(pts[p - 1] - s.a[l - 1])
        if d == 0:
            at[p].add(l)
        if d <= rho:
            tl[p].add(l)
    freeze = lambda m: {p: frozenset(v) for p, v in m.items()}  # noqa: E731
    return SliceIndexSets(nu, tuple(complex(c) for c in pts), freeze(L), freeze(at), freeze(tl))


def tilde_alpha(z, nu: int, P, s: ConstructionSchedule) -> float:
    """Cone aperture used near z in S_nu, shrunk by every thickened slice z meets."""
    P = frozenset(P)
    pts = as_points(z, s.params.n)[0]
    p_nu = s.directions[nu - 1]
    if p_nu not in P:
        raise ValueError(f"direction {p_nu} of level {nu} must belong to P")
    if pts[p_nu - 1] != s.a[nu - 1]:
        raise ValueError(f"z is not on the slice z_{p_nu} = a_{nu}")
    hits = sorted(index_sets(pts, nu, s).script_L_tilde(P))
    if hits == [nu]:
        return float(nu + 1)
    best = float(nu + 1)
    for i, l in enumerate(hits):
        for lp in hits[i + 1 :]:
            best = min(best, (s.eps[l - 1] / s.eps[lp - 1]) ** 2 / 9.0)
    return best


# -- slope statistic ------------------------------------------------------


@dataclass(frozen=True)
class SlopeSample:
    z0: tuple[complex, ...]
    nu: int
    cone: ConeSpec
    deltas: tuple[float, ...]
    min_ratios: tuple[float, ...]  # per delta, min over samples and fiber pairs of |w'-w''| / (2|zeta|)
    deep_ratios: tuple[float, ...]  # per delta, same numerator over |zeta' + 2 zeta + zeta''|
    threshold: float  # nu
    deep_threshold: float  # (nu - 1) / (1 + C/2)
    C: float
    samples: int
    vacuous: bool = False

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.min_ratios))

    @property
    def best_ratio(self) -> float:
        return float(self.min_ratios[self.best_index])

    @property
    def best_delta(self) -> float:
        return float(self.deltas[self.best_index])

    @property
    def exceeds_threshold(self) -> bool:
        return not self.vacuous and self.best_ratio > self.threshold


def _sample_cone_directions(rng, n1: int, cone: ConeSpec, count: int) -> np.ndarray:
    """Unit vectors of C^{n-1} inside the cone (rejection sampling)."""
    out = []
    tries = 0
    while len(out) < count and tries < 200 * count:
        tries += 1
        v = rng.standard_normal(n1) + 1j * rng.standard_normal(n1)
        if cone.on_slice:
            mask = np.array([q + 1 in cone.P for q in range(n1)])
            v = v * mask
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        v /= nv
        if cone_contains(v, cone):
            out.append(v)
    return np.array(out).reshape(-1, n1)


def _polydisc(rng, radii: np.ndarray) -> np.ndarray:
    """Uniform points of the polydisc with the given per-coordinate radii."""
    r = radii * np.sqrt(rng.random(radii.shape))
    return r * np.exp(2j * np.pi * rng.random(radii.shape))


def _pair_differences(u: np.ndarray, h_plus: np.ndarray, h_minus: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Every w_j(z0 + h_plus) - w_k(z0 - h_minus) with radicands u + h_plus, u - h_minus.

    u: (nu,) offsets z0_[l] - a_l; h_plus, h_minus: (S, nu). Returns (S, 4**nu).
    Same-sign terms use (A - B) / (sqrt A + sqrt B), which keeps full
    relative precision when |h| is far below |u|.
    """
    A = u[None, :] + h_plus
    B = u[None, :] - h_minus
    sa = principal_sqrt(A)
    sb = principal_sqrt(B)
    flip = np.abs(sa - sb) > np.abs(sa + sb)
    sb = np.where(flip, -sb, sb)
    tot = sa + sb
    safe = np.where(tot == 0, 1.0, tot)
    same = np.where(tot == 0, sa - sb, (h_plus + h_minus) / safe)
    opts = np.stack([same, -same, tot, -tot], axis=2) * eps[None, :, None]  # (S, nu, 4)
    acc = opts[:, 0, :]
    for l in range(1, opts.shape[1]):
        acc = (acc[:, :, None] + opts[:, l, None, :]).reshape(acc.shape[0], -1)
    return acc


def slope_statistic(
    z0,
    nu: int,
    P,
    delta_list: Sequence[float],
    samples: int,
    s: ConstructionSchedule,
    seed: int = 0,
    C: float | None = None,
) -> SlopeSample:
    """Minimum slope between the fibers over z0 + zeta + zeta' and z0 - zeta - zeta''.

    zeta runs over the cone gamma(P, tilde_alpha) on the sphere of radius
    delta, and zeta', zeta'' over the polydisc of radii (C/2)|zeta_p|.
    """
    P = frozenset(P)
    if nu > 13:
        raise ValueError("slope_statistic enumerates 4**nu fiber pairs; nu <= 13 only")
    pts = as_points(z0, s.params.n)[0]
    n1 = s.params.n - 1
    if np.linalg.norm(pts) >= nu:
        raise ValueError("z0 must lie in the open ball of radius nu")
    alpha = tilde_alpha(pts, nu, P, s)
    C = working_C() if C is None else C
    cone = ConeSpec(P, alpha, on_slice=True)
    rng = np.random.default_rng(seed)
    if alpha <= 1 and len(P) >= 2:
        empty = tuple(math.nan for _ in delta_list)
        return SlopeSample(tuple(pts), nu, cone, tuple(delta_list), empty, empty, float(nu),
                           (nu - 1) / (1 + C / 2), C, 0, vacuous=True)
    dirs = _sample_cone_directions(rng, n1, cone, samples)
    u = pts[s.dir_index[:nu]] - s.a_array[:nu]
    eps = s.eps_array[:nu]
    min_r, deep_r = [], []
    for delta in delta_list:
        zeta = delta * dirs
        radii = np.broadcast_to((C / 2) * np.abs(zeta), zeta.shape)
        zp = _polydisc(rng, radii)
        zpp = _polydisc(rng, radii)
        hp = (zeta + zp)[:, s.dir_index[:nu]]
        hm = (zeta + zpp)[:, s.dir_index[:nu]]
        diffs = np.abs(_pair_differences(u, hp, hm, eps)).min(axis=1)
        min_r.append(float((diffs / (2 * np.linalg.norm(zeta, axis=1))).min()))
        deep_r.append(float((diffs / np.linalg.norm(zp + 2 * zeta + zpp, axis=1)).min()))
    return SlopeSample(tuple(pts), nu, cone, tuple(map(float, delta_list)), tuple(min_r), tuple(deep_r),
                       float(nu), (nu - 1) / (1 + C / 2), C, len(dirs))


def branch_point_deltas(nu: int, s: ConstructionSchedule, count: int = 8) -> list[float]:
    """Radii (eps_nu / nu)^2 4^-k, k = 0..count-1: the scale where the level-nu root dominates."""
    base = (s.eps[nu - 1] / nu) ** 2
    return [base * 4.0**-k for k in range(count)]


# -- sublevel nesting -----------------------------------------------------


def _real_section_grid(R: float, g: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.linspace(-R, R, g)
    return x, (x[:, None] + 1j * x[None, :]).ravel()


def verify_sublevel_nesting(nu: int, mu: int, R: float, grid: int, s: ConstructionSchedule) -> LemmaReport:
    """Both nesting implications between depths nu <= mu on a grid of the closed R-ball.

    The grid is the cube of side 2R in (Re z_1, Re w, Im w), other coordinates
    zero, clipped to the ball.
      item 1: phi_mu < -log(nu+1)  =>  phi_nu < -log nu
      item 2: phi_nu < -log nu     =>  phi_mu < -log(nu-1)
    """
    t0 = time.perf_counter()
    if not (mu >= nu >= R):
        raise ValueError("need mu >= nu >= R")
    x, W = _real_section_grid(R, grid)
    zs = np.zeros((grid, s.params.n - 1), dtype=complex)
    zs[:, 0] = x
    terms = root_terms(zs, mu, s)
    probes = np.broadcast_to(W, (grid, W.size))
    phi_n = log_abs_on_fiber(gray_fiber_from_terms(terms[:, :nu]), probes) / float(1 << nu)
    phi_m = phi_n if mu == nu else log_abs_on_fiber(gray_fiber_from_terms(terms), probes) / float(1 << mu)
    inside = x[:, None] ** 2 + np.abs(W)[None, :] ** 2 <= R * R
    hyp1 = inside & (phi_m < -math.log(nu + 1))
    hyp2 = inside & (phi_n < -math.log(nu))
    with np.errstate(invalid="ignore"):
        m1 = float((-math.log(nu) - phi_n)[hyp1].min()) if hyp1.any() else math.inf
        upper = math.inf if nu == 1 else -math.log(nu - 1)
        m2 = float((upper - phi_m)[hyp2].min()) if hyp2.any() else math.inf
    domain = {"nu": nu, "mu": mu, "R": R, "grid": grid, "axes": "Re z1, Re w, Im w", "points": int(inside.sum())}
    details = {"item1_margin": m1, "item2_margin": m2, "item1_points": int(hyp1.sum()), "item2_points": int(hyp2.sum())}
    return _report("verify_sublevel_nesting", domain, min(m1, m2), t0, details)


# -- convergence rate of phi_nu -------------------------------------------


@dataclass(frozen=True)
class CauchyRegion:
    """Sample points (z_i, w_i) claimed to stay at distance >= r from the depth-nu fiber."""

    z: np.ndarray  # (B, n-1)
    w: np.ndarray  # (B,)
    r: float


def region_away_from_fiber(
    count: int, nu: int, r: float, s: ConstructionSchedule, z_radius: float = 1.0, w_radius: float = 3.0, seed: int = 0
) -> CauchyRegion:
    """Random points with |z| <= z_radius, |w| <= w_radius, kept when r away from the fiber."""
    rng = np.random.default_rng(seed)
    n1 = s.params.n - 1
    zs, ws = [], []
    while sum(len(b) for b in ws) < count:
        B = 4 * count
        g = rng.standard_normal((B, n1)) + 1j * rng.standard_normal((B, n1))
        g *= (z_radius * rng.random(B) ** (1 / (2 * n1)) / np.linalg.norm(g, axis=1))[:, None]
        w = w_radius * np.sqrt(rng.random(B)) * np.exp(2j * np.pi * rng.random(B))
        fib = gray_fiber_from_terms(root_terms(g, nu, s))
        keep = np.abs(w[:, None] - fib).min(axis=1) >= r
        zs.append(g[keep])
        ws.append(w[keep])
    return CauchyRegion(np.concatenate(zs)[:count], np.concatenate(ws)[:count], r)


def verify_phi_cauchy(region: CauchyRegion, nu: int, s: ConstructionSchedule) -> LemmaReport:
    """|phi_{nu+1} - phi_nu| <= log(1 + 2^-nu / r) at every region point."""
    t0 = time.perf_counter()
    terms = root_terms(region.z, nu + 1, s)
    f_n = gray_fiber_from_terms(terms[:, :nu])
    f_m = gray_fiber_from_terms(terms)
    dist = float(np.abs(region.w[:, None] - f_n).min())
    domain = {"nu": nu, "points": int(len(region.w)), "claimed_r": region.r, "measured_r": dist}
    bound = math.log1p(2.0**-nu / region.r) if region.r > 0 else math.inf
    if region.r <= 0 or dist < region.r:
        return _report("verify_phi_cauchy", domain, 0.0, t0, {"bound": bound}, unknown=True)
    w = region.w[:, None]
    with np.errstate(divide="ignore"):
        phi_n = np.log(np.abs(w - f_n)).sum(axis=1) / float(1 << nu)
        phi_m = np.log(np.abs(w - f_m)).sum(axis=1) / float(1 << (nu + 1))
    gap = np.abs(phi_m - phi_n)
    return _report("verify_phi_cauchy", domain, bound - float(gap.max()), t0, {"bound": bound, "max_gap": float(gap.max())})


# -- mean value on complex lines -------------------------------------------


def _phi_on_points(
    points: np.ndarray, nu: int, s: ConstructionSchedule, with_arg: bool = False
) -> tuple[np.ndarray, np.ndarray | None]:
    """phi_nu at points (B, n) in C^n, and arg P_nu (unwrapped sum) when asked."""
    z = points[:, :-1]
    w = points[:, -1]
    fib = gray_fiber_from_terms(root_terms(z, nu, s))
    d = w[:, None] - fib
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(d)).sum(axis=1)
    args = np.angle(d).sum(axis=1) if with_arg else None
    return logs / float(1 << nu), args


def _circle(center: np.ndarray, direction: np.ndarray, radius: float, nodes: int) -> np.ndarray:
    t = radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    return center[None, :] + t[:, None] * direction[None, :]


def winding_number(center, direction, radius: float, nu: int, s: ConstructionSchedule, nodes: int = 2048) -> int | None:
    """Zeros of t -> P_nu(center + t direction) in |t| < radius, or None if unresolved.

    The count is the winding of arg P_nu around the circle; it is trusted
    only when no step between neighbouring nodes turns by pi/2 or more.
    """
    c = np.asarray(center, dtype=complex)
    d = np.asarray(direction, dtype=complex)
    d = d / np.linalg.norm(d)
    phi, arg = _phi_on_points(_circle(c, d, radius, nodes), nu, s, with_arg=True)
    return _winding_from(phi, arg)


def _winding_from(phi: np.ndarray, arg: np.ndarray) -> int | None:
    if not np.all(np.isfinite(phi)):
        return None
    steps = np.angle(np.exp(1j * np.diff(np.concatenate([arg, arg[:1]]))))
    if np.abs(steps).max() >= math.pi / 2:
        return None
    return int(round(steps.sum() / (2 * math.pi)))


def verify_mean_value(
    center,
    direction,
    radius: float,
    nu: int,
    mode: str,
    s: ConstructionSchedule,
    nodes: int = 1024,
    tol: float = 1e-8,
) -> LemmaReport:
    """Circle average of phi_nu along a complex line against its center value.

    pluriharmonic: |average - center| < tol, with the average also recomputed
    on 2*nodes nodes; the disc must be certified zero-free by the winding
    number, otherwise the report is UNKNOWN.
    submean: average >= center - tol; vacuous when the center is on the fiber.
    """
    t0 = time.perf_counter()
    if mode not in ("pluriharmonic", "submean"):
        raise ValueError(f"unknown mode {mode!r}")
    c = np.asarray(center, dtype=complex).reshape(-1)
    d = np.asarray(direction, dtype=complex).reshape(-1)
    if c.shape != (s.params.n,) or d.shape != (s.params.n,):
        raise ValueError(f"center and direction must have {s.params.n} coordinates")
    d = d / np.linalg.norm(d)
    domain = {"nu": nu, "mode": mode, "radius": radius, "nodes": nodes, "tol": tol,
              "center": [complex(v) for v in c], "direction": [complex(v) for v in d]}
    phi_c = float(_phi_on_points(c[None, :], nu, s)[0][0])
    # the nodes-point circle is every other node of the doubled one
    phi2, arg2 = _phi_on_points(_circle(c, d, radius, 2 * nodes), nu, s, with_arg=True)
    if mode == "pluriharmonic":
        wind = _winding_from(phi2, arg2)
        if wind != 0 or not math.isfinite(phi_c):
            return _report("verify_mean_value", domain, 0.0, t0, {"winding": wind}, unknown=True)
    avg = float(np.mean(phi2[::2]))
    avg2 = float(np.mean(phi2))
    details = {"center_value": phi_c, "average": avg, "average_doubled": avg2}
    if mode == "pluriharmonic":
        margin = tol - max(abs(avg - phi_c), abs(avg2 - avg))
    else:
        margin = math.inf if phi_c == -math.inf else (avg - phi_c) + tol
    return _report("verify_mean_value", domain, margin, t0, details)


# -- polynomial hull --------------------------------------------------------


def sublevel_table(points: np.ndarray, depths: Sequence[int], s: ConstructionSchedule) -> np.ndarray:
    """phi_nu at each point (rows) for each depth (columns); points have shape (B, n)."""
    pts = np.asarray(points, dtype=complex)
    z = pts[:, :-1]
    w = pts[:, -1]
    depths = list(depths)
    out = np.empty((len(pts), len(depths)))
    top = max(depths)
    per = max(1, (1 << 22) >> top)
    for start in range(0, len(pts), per):
        terms = root_terms(z[start : start + per], top, s)
        for j, d in enumerate(depths):
            fib = gray_fiber_from_terms(terms[:, :d])
            with np.errstate(divide="ignore"):
                out[start : start + per, j] = (
                    np.log(np.abs(w[start : start + per, None] - fib)).sum(axis=1) / float(1 << d)
                )
    return out


def cap_fiber_samples(count: int, R: float, cap: int, s: ConstructionSchedule, seed: int = 0) -> np.ndarray:
    """Random points of E_cap inside the closed R-ball, shape (count, n)."""
    rng = np.random.default_rng(seed)
    n1 = s.params.n - 1
    out: list[np.ndarray] = []
    got = 0
    while got < count:
        B = 2 * count
        g = rng.standard_normal((B, n1)) + 1j * rng.standard_normal((B, n1))
        g *= (R * rng.random(B) ** (1 / (2 * n1)) / np.linalg.norm(g, axis=1))[:, None]
        per = max(1, (1 << 22) >> cap)
        for start in range(0, B, per):
            fib = gray_fiber_from_terms(root_terms(g[start : start + per], cap, s))
            pick = rng.integers(0, fib.shape[1], size=fib.shape[0])
            w = fib[np.arange(fib.shape[0]), pick]
            zz = g[start : start + per]
            ok = np.sum(np.abs(zz) ** 2, axis=1) + np.abs(w) ** 2 <= R * R
            block = np.concatenate([zz[ok], w[ok, None]], axis=1)
            out.append(block)
            got += len(block)
            if got >= count:
                break
    return np.concatenate(out)[:count]


def hull_separation(
    q,
    R: float,
    E_samples: np.ndarray,
    cap: int,
    s: ConstructionSchedule,
    nu_min: int | None = None,
    E_table: np.ndarray | None = None,
) -> LemmaReport:
    """Look for a depth nu whose sublevel set {phi_nu < -log nu} holds every E-sample but not q.

    For an OUT probe the report passes when such a nu exists (the polynomial
    P_nu then separates q from the samples by the maximum modulus). For an
    IN probe it passes when no tested depth separates.
    """
    t0 = time.perf_counter()
    qv = np.asarray(q, dtype=complex).reshape(-1)
    radius = float(np.linalg.norm(qv))
    if radius > R * (1 + 1e-12):
        raise ValueError("probe must lie in the closed R-ball")
    nu_min = max(1, math.ceil(R)) if nu_min is None else nu_min
    depths = list(range(nu_min, cap + 1))
    E = np.asarray(E_samples, dtype=complex)
    keep = np.linalg.norm(E, axis=1) <= R * (1 + 1e-12)
    if E_table is None:
        E_table = sublevel_table(E[keep], depths, s)
    else:
        E_table = E_table[keep]
    verdict = membership(qv[:-1], qv[-1], nu_min, cap, s)
    logs = np.log(np.asarray(depths, dtype=float))
    q_gap = sublevel_table(qv[None, :], depths, s)[0] + logs  # >= 0: q outside the sublevel set
    e_gap = -(E_table.max(axis=0) + logs)  # > 0: all samples strictly inside
    separated = (q_gap >= 0) & (e_gap > 0)
    domain = {"R": R, "cap": cap, "nu_min": nu_min, "E_samples": int(keep.sum()), "verdict": verdict.verdict}
    details = {"q_gap": q_gap.tolist(), "E_gap": e_gap.tolist()}
    if verdict.verdict == "OUT":
        if separated.any():
            k = int(np.argmax(separated))
            details["separating_depth"] = depths[k]
            # a zero q_gap still counts as separated, so report a strictly positive floor
            margin = min(max(float(q_gap[k]), np.finfo(float).tiny), float(e_gap[k]))
            return _report("hull_separation", domain, margin, t0, details)
        details["separating_depth"] = None
        return _report("hull_separation", domain, -1.0, t0, details)
    if verdict.verdict == "IN":
        slack = np.maximum(-q_gap, -e_gap)
        details["separating_depth"] = None
        return _report("hull_separation", domain, float(slack.min()), t0, details)
    return _report("hull_separation", domain, 0.0, t0, details, unknown=True)


# -- closed-form audit ----------------------------------------------------


def remark_audit(points: Sequence[tuple[complex, complex]], nu: int, s: ConstructionSchedule) -> dict:
    """Compare the printed closed-form sum with the defining product at each point."""
    from .branches import eval_P, eval_P_remark

    rows = []
    for z, w in points:
        prod = eval_P(z, w, nu, s)
        rem = eval_P_remark(z, w, nu, s)
        rows.append(
            {
                "z": complex(z),
                "w": complex(w),
                "product_log_mag": prod.log_mag,
                "closed_form_log_mag": rem.log_mag,
                "abs_diff": abs(prod.to_complex() - rem.to_complex()),
            }
        )
    worst = max(r["abs_diff"] for r in rows)
    return {"nu": nu, "points": len(rows), "max_abs_diff": worst, "rows": rows}


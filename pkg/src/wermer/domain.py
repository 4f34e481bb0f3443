"""The domain {phi + |z|^2 + |w|^2 < C1} around the limit set, at a finite depth.

phi is replaced throughout by phi_cap. The defining function is therefore
psi = phi_cap + |z|^2 + |w|^2, which is -inf exactly on E_cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage
from skimage import measure

from .branches import log_abs_P
from .schedule import ConstructionSchedule
from .verify import cap_fiber_samples

SINGULAR_GUARD = 1e-6


@dataclass(frozen=True)
class DomainSpec:
    C1: float
    C2: float
    depth_N: int
    a_level: float

    def __post_init__(self) -> None:
        if not self.C2 > self.C1:
            raise ValueError("C2 must exceed C1")
        if self.depth_N < 1:
            raise ValueError("depth_N must be >= 1")

    def threshold(self) -> float:
        """Lower bound a - 1 that log|c| / 2^N must exceed."""
        return self.a_level - 1.0


def psi(points: np.ndarray, cap: int, s: ConstructionSchedule) -> np.ndarray:
    """phi_cap + |z|^2 + |w|^2 for points of shape (B, n)."""
    pts = np.asarray(points, dtype=complex)
    z, w = pts[:, :-1], pts[:, -1]
    return log_abs_P(z, w, cap, s) / float(1 << cap) + np.sum(np.abs(pts) ** 2, axis=1)


@dataclass(frozen=True)
class DefiningValue:
    value: float
    status: str  # "converged" | "near_E" | "depth_capped"

    def __float__(self) -> float:
        return self.value


def defining_value(z, w: complex, C1: float, cap: int, s: ConstructionSchedule, tol: float = 1e-9) -> DefiningValue:
    """psi(z, w) - C1, tagged with whether phi_cap has settled to ``tol``."""
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).reshape(1, -1)
    point = np.concatenate([zz[0], [complex(w)]])[None, :]
    value = float(psi(point, cap, s)[0]) - C1
    if value == -math.inf:
        return DefiningValue(value, "near_E")
    if cap == 1:
        return DefiningValue(value, "depth_capped")
    prev = float(log_abs_P(zz, complex(w), cap - 1, s)[0]) / float(1 << (cap - 1))
    cur = float(log_abs_P(zz, complex(w), cap, s)[0]) / float(1 << cap)
    return DefiningValue(value, "converged" if abs(cur - prev) < tol else "depth_capped")


def default_C1(s: ConstructionSchedule, cap: int, fraction: float = 0.5, samples: int = 2000, seed: int = 0) -> float:
    """Quantile of |z|^2 + |w|^2 over depth-cap fiber points in the closed unit ball."""
    pts = cap_fiber_samples(samples, 1.0, cap, s, seed=seed)
    return float(np.quantile(np.sum(np.abs(pts) ** 2, axis=1), fraction))


# -- boundary ---------------------------------------------------------------


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray  # (n,)
    direction: np.ndarray  # (n,)
    length: float


@dataclass(frozen=True)
class BoundarySample:
    points: np.ndarray  # (K, n)
    residuals: np.ndarray  # psi - C1 at each point
    gradient_norms: np.ndarray
    C1: float
    tol: float
    h: float
    skipped: tuple[str, ...] = field(default=())
    bracket_widths: np.ndarray = field(default_factory=lambda: np.empty(0))  # final hi - lo per point

    @property
    def gradient_floor(self) -> float:
        return float(self.gradient_norms.min()) if len(self.gradient_norms) else math.nan


def _gradient_norms(points: np.ndarray, cap: int, s: ConstructionSchedule, h: float) -> np.ndarray:
    n = points.shape[1]
    grads = []
    for k in range(n):
        for unit in (1.0, 1j):
            e = np.zeros(n, dtype=complex)
            e[k] = unit
            fwd = psi(points + h * e, cap, s)
            bwd = psi(points - h * e, cap, s)
            grads.append((fwd - bwd) / (2 * h))
    return np.linalg.norm(np.stack(grads, axis=1), axis=1)


def sample_boundary(
    rays: Sequence[Ray],
    C1: float,
    tol: float,
    cap: int,
    s: ConstructionSchedule,
    h: float = 1e-6,
    max_iter: int = 200,
) -> BoundarySample:
    """Bisect psi - C1 along each ray; rays without a sign change are skipped with a note."""
    if not rays:
        return BoundarySample(np.empty((0, s.params.n), complex), np.empty(0), np.empty(0), C1, tol, h)
    O = np.array([r.origin for r in rays], dtype=complex)
    D = np.array([r.direction / np.linalg.norm(r.direction) for r in rays], dtype=complex)
    L = np.array([r.length for r in rays], dtype=float)
    f0 = psi(O, cap, s) - C1
    f1 = psi(O + L[:, None] * D, cap, s) - C1
    ok = (f0 < 0) & (f1 > 0)
    skipped = [f"ray {i}: origin value {f0[i]:.6g}, end value {f1[i]:.6g}" for i in np.flatnonzero(~ok)]
    lo = np.zeros(ok.sum())
    hi = L[ok]
    O, D = O[ok], D[ok]
    res = np.full(len(lo), np.inf)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        res = psi(O + mid[:, None] * D, cap, s) - C1
        inside = res < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
        if np.all(np.abs(res) < tol):
            break
    good = np.abs(res) < tol
    for i in np.flatnonzero(~good):
        skipped.append(f"bisection residual {res[i]:.3g} above tol")
    pts = O[good] + mid[good, None] * D[good]
    grads = _gradient_norms(pts, cap, s, h) if len(pts) else np.empty(0)
    return BoundarySample(pts, res[good], grads, C1, tol, h, tuple(skipped), (hi - lo)[good])


def rays_from_fiber(count: int, cap: int, s: ConstructionSchedule, length: float = 3.0, seed: int = 0) -> list[Ray]:
    """Rays leaving depth-cap fiber points of the unit ball in random directions."""
    rng = np.random.default_rng(seed)
    origins = cap_fiber_samples(count, 1.0, cap, s, seed=seed)
    n = s.params.n
    dirs = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return [Ray(o, d / np.linalg.norm(d), length) for o, d in zip(origins, dirs)]


# -- real sections ------------------------------------------------------------


@dataclass(frozen=True)
class Section:
    """Affine real 2-plane base + x u + y v inside the complex plane H.

    H fixes the coordinates z_2..z_{n-1} to ``base``; u and v are real
    directions in C^n that move only the free coordinates (z_1 and w).
    """

    base: np.ndarray  # (n,)
    u: np.ndarray
    v: np.ndarray
    xlim: tuple[float, float]
    ylim: tuple[float, float]
    shape: tuple[int, int]

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linspace(*self.xlim, self.shape[0]), np.linspace(*self.ylim, self.shape[1])

    def points(self) -> np.ndarray:
        x, y = self.axes()
        return (self.base[None, None, :] + x[:, None, None] * self.u + y[None, :, None] * self.v).reshape(-1, len(self.base))

    def at(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.base[None, :] + np.asarray(x)[:, None] * self.u + np.asarray(y)[:, None] * self.v


def real_zw_section(n: int, extent: float, shape: tuple[int, int], base=None) -> Section:
    """The (Re z_1, Re w) section of H through ``base``."""
    b = np.zeros(n, dtype=complex) if base is None else np.asarray(base, dtype=complex)
    u = np.zeros(n, dtype=complex)
    u[0] = 1.0
    v = np.zeros(n, dtype=complex)
    v[-1] = 1.0
    return Section(b, u, v, (-extent, extent), (-extent, extent), shape)


def _check_plane(sec: Section) -> None:
    for vec in (sec.u, sec.v):
        if np.any(vec[1:-1] != 0):
            raise ValueError("section directions must keep z_2..z_{n-1} fixed")


def _field_phi(sec: Section, nu: int, s: ConstructionSchedule) -> np.ndarray:
    pts = sec.points()
    return (log_abs_P(pts[:, :-1], pts[:, -1], nu, s) / float(1 << nu)).reshape(sec.shape)


@dataclass(frozen=True)
class LevelCurve:
    c: complex
    points: np.ndarray  # (K, n) points of C^n on the section


@dataclass(frozen=True)
class LevelCurveFamily:
    section: Section
    levels: tuple[complex, ...]
    curves: tuple[LevelCurve, ...]
    depth_N: int
    tol: float


def _refine_contour(sec: Section, field_, level: float, contour: np.ndarray, nu: int, s: ConstructionSchedule, iters: int = 60):
    """Bisect phi_nu - level along the grid edge holding each contour point."""
    x, y = sec.axes()
    r, c = contour[:, 0], contour[:, 1]
    on_row = np.abs(r - np.round(r)) < 1e-9
    i0 = np.where(on_row, np.round(r), np.minimum(np.floor(r), sec.shape[0] - 2)).astype(int)
    j0 = np.where(on_row, np.minimum(np.floor(c), sec.shape[1] - 2), np.round(c)).astype(int)
    i1 = np.where(on_row, i0, i0 + 1)
    j1 = np.where(on_row, j0 + 1, j0)
    p0 = sec.at(x[i0], y[j0])
    p1 = sec.at(x[i1], y[j1])
    below0 = field_[i0, j0] < level
    lo = np.zeros(len(r))
    hi = np.ones(len(r))
    for _ in range(iters):
        m = 0.5 * (lo + hi)
        p = p0 + m[:, None] * (p1 - p0)
        f = log_abs_P(p[:, :-1], p[:, -1], nu, s) / float(1 << nu)
        same = (f < level) == below0
        lo = np.where(same, m, lo)
        hi = np.where(same, hi, m)
    return p0 + (0.5 * (lo + hi))[:, None] * (p1 - p0)


def foliation_slice(
    H: Section,
    spec: DomainSpec,
    c_list: Sequence[complex],
    cap: int,
    s: ConstructionSchedule,
    tol: float = 1e-6,
) -> LevelCurveFamily:
    """Level curves |P_N| = |c| on a real section of H, kept where psi < C1.

    A real 2-plane meets the complex curve {P_N = c} only in points, so the
    section shows the modulus level {phi_N = log|c| / 2^N}, which is the same
    for c and c e^{i theta}. Every exported point is refined by bisection
    along its grid edge to within ``tol`` in phi units.
    """
    _check_plane(H)
    N = spec.depth_N
    thr = spec.threshold()
    for c in c_list:
        if abs(c) <= SINGULAR_GUARD:
            raise ValueError(f"|c| = {abs(c):.3g} is within the guard {SINGULAR_GUARD} of the singular value 0")
        if math.log(abs(c)) / 2.0**N <= thr:
            raise ValueError(f"log|c| / 2^N = {math.log(abs(c)) / 2.0 ** N:.6g} does not exceed a - 1 = {thr:.6g}")
    fld = _field_phi(H, N, s)
    finite = fld[np.isfinite(fld)]
    if finite.size == 0 or np.ptp(finite) == 0:
        raise ValueError("P_N is constant on this section")
    curves = []
    for c in c_list:
        level = math.log(abs(c)) / 2.0**N
        for contour in measure.find_contours(np.where(np.isfinite(fld), fld, -1e300), level):
            pts = _refine_contour(H, fld, level, contour, N, s)
            inside = psi(pts, cap, s) < spec.C1
            # split into runs that stay inside the domain
            runs = np.split(np.arange(len(pts)), np.flatnonzero(np.diff(inside.astype(int))) + 1)
            for run in runs:
                if inside[run[0]] and len(run) >= 2:
                    curves.append(LevelCurve(complex(c), pts[run]))
    return LevelCurveFamily(H, tuple(complex(c) for c in c_list), tuple(curves), N, tol)


# -- components -------------------------------------------------------------


@dataclass(frozen=True)
class GridBox:
    """Axis-aligned real grid in C^n; ``axes`` names which real coordinates vary.

    Real coordinate 2k is Re of complex coordinate k and 2k+1 is Im of it.
    """

    base: np.ndarray  # (n,)
    axes: tuple[int, ...]
    lows: tuple[float, ...]
    highs: tuple[float, ...]
    shape: tuple[int, ...]

    def points(self) -> np.ndarray:
        lines = [np.linspace(lo, hi, m) for lo, hi, m in zip(self.lows, self.highs, self.shape)]
        mesh = np.meshgrid(*lines, indexing="ij")
        pts = np.repeat(np.asarray(self.base, dtype=complex)[None, :], mesh[0].size, axis=0)
        for ax, vals in zip(self.axes, mesh):
            k, im = divmod(ax, 2)
            if im:
                pts[:, k] = pts[:, k].real + 1j * vals.ravel()
            else:
                pts[:, k] = vals.ravel() + 1j * pts[:, k].imag
        return pts


@dataclass(frozen=True)
class ComponentMap:
    labels: np.ndarray
    count: int
    sizes: tuple[int, ...]
    boxes: tuple[tuple[tuple[float, float], ...], ...]  # per component, per axis (low, high)


def slice_components(box: GridBox, C1: float, cap: int, s: ConstructionSchedule) -> ComponentMap:
    """Face-connected components of {psi < C1} sampled on the grid."""
    n = s.params.n
    for ax in box.axes:
        k = ax // 2
        if 0 < k < n - 1:
            raise ValueError("grid axes must move only z_1 and w, the free coordinates of H")
    inside = (psi(box.points(), cap, s) < C1).reshape(box.shape)
    structure = ndimage.generate_binary_structure(len(box.shape), 1)
    labels, count = ndimage.label(inside, structure=structure)
    lines = [np.linspace(lo, hi, m) for lo, hi, m in zip(box.lows, box.highs, box.shape)]
    sizes, boxes = [], []
    for sl in ndimage.find_objects(labels):
        boxes.append(tuple((float(line[s_.start]), float(line[s_.stop - 1])) for line, s_ in zip(lines, sl)))
    if count:
        sizes = np.bincount(labels.ravel())[1:].tolist()
    return ComponentMap(labels, int(count), tuple(sizes), tuple(boxes))


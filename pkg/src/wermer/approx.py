"""Sampled approximations of E_nu and of the limit set.

The limit set is never stored. It is seen through depth-cap fibers (points
that approximate it from inside) and through the sublevel test
phi_mu < -log mu (which encloses it from outside).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .branches import as_points, fibers, gray_fiber_from_terms, log_abs_on_fiber, root_terms
from .schedule import ConstructionSchedule


@dataclass(frozen=True)
class SliceSample:
    grid: np.ndarray  # (B, n-1) base points
    depth: int
    fibers: np.ndarray  # (B, 2**depth)
    region_radius: float

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (z, w) pairs: z with shape (B * 2**depth, n-1), w flat."""
        B, N = self.fibers.shape
        z = np.repeat(self.grid, N, axis=0)
        return z, self.fibers.reshape(-1)


def sample_slice(grid, nu: int, s: ConstructionSchedule, R: float | None = None) -> SliceSample:
    pts = as_points(grid, s.params.n)
    norms = np.linalg.norm(pts, axis=1)
    if R is None:
        R = float(norms.max())
    elif np.any(norms > R * (1 + 1e-12)):
        raise ValueError(f"grid leaves the ball of radius {R}")
    return SliceSample(pts, nu, fibers(pts, nu, s), float(R))


def real_segment(R: float, count: int, n: int = 2) -> np.ndarray:
    """``count`` evenly spaced base points on [-R, R] along the first axis."""
    z = np.zeros((count, n - 1), dtype=complex)
    z[:, 0] = np.linspace(-R, R, count)
    return z


def _as_real(cloud) -> np.ndarray:
    arr = np.asarray(cloud, dtype=complex)
    if arr.ndim == 1:
        arr = arr[:, None]
    return np.concatenate([arr.real, arr.imag], axis=1)


def _directed(a: np.ndarray, b: np.ndarray) -> float:
    d, _ = cKDTree(b).query(a, k=1)
    return float(d.max())


def cloud_hausdorff(A, B) -> float:
    """Symmetric Hausdorff distance between finite point sets in C^k."""
    a, b = _as_real(A), _as_real(B)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("point clouds must be nonempty")
    if a.shape[1] != b.shape[1]:
        raise ValueError("point clouds live in different dimensions")
    return max(_directed(a, b), _directed(b, a))


def fiber_hausdorff(z, nu: int, mu: int, s: ConstructionSchedule) -> float:
    """Hausdorff distance between the depth-nu and depth-mu fibers over one z."""
    if mu < nu:
        raise ValueError("need mu >= nu")
    if mu == nu:
        return 0.0
    deep = fibers(z, mu, s)
    if deep.shape[0] != 1:
        raise ValueError("fiber_hausdorff takes a single base point")
    return cloud_hausdorff(fibers(z, nu, s)[0], deep[0])


@dataclass(frozen=True)
class HausdorffReport:
    nu: int
    mu: int
    per_fiber_max: float
    bound: float
    grid_size: int

    @property
    def passed(self) -> bool:
        return self.per_fiber_max < self.bound


def hausdorff_table(grid, depths, s: ConstructionSchedule) -> list[HausdorffReport]:
    """Worst fiber_hausdorff over the grid for every pair nu < mu from ``depths``.

    Root terms are computed once per grid point and each depth's fiber and
    k-d tree is built once, then shared by all pairs.
    """
    pts = as_points(grid, s.params.n)
    depths = sorted(set(depths))
    top = depths[-1]
    worst = {(nu, mu): 0.0 for i, nu in enumerate(depths) for mu in depths[i + 1 :]}
    for b in range(pts.shape[0]):
        terms = root_terms(pts[b : b + 1], top, s)
        fib = {d: _as_real(gray_fiber_from_terms(terms[:, :d])[0]) for d in depths}
        trees = {d: cKDTree(fib[d]) for d in depths}
        for nu, mu in worst:
            h = max(float(trees[mu].query(fib[nu])[0].max()), float(trees[nu].query(fib[mu])[0].max()))
            worst[(nu, mu)] = max(worst[(nu, mu)], h)
    return [HausdorffReport(nu, mu, h, 2.0**-nu, pts.shape[0]) for (nu, mu), h in worst.items()]


# -- membership -----------------------------------------------------------


@dataclass(frozen=True)
class MembershipVerdict:
    verdict: str  # "IN" | "OUT" | "UNKNOWN"
    witness_depth: int
    margin: float


def phi_profile(z, w: complex, depths, s: ConstructionSchedule) -> np.ndarray:
    """phi_nu(z, w) for each requested depth, from one set of root terms."""
    pts = as_points(z, s.params.n)
    depths = list(depths)
    terms = root_terms(pts[:1], max(depths), s)
    w_arr = np.array([[complex(w)]])
    out = np.empty(len(depths))
    for i, d in enumerate(depths):
        out[i] = log_abs_on_fiber(gray_fiber_from_terms(terms[:, :d]), w_arr)[0, 0] / float(1 << d)
    return out


def membership(
    z, w: complex, nu_min: int, cap: int, s: ConstructionSchedule, out_margin: float = 0.05
) -> MembershipVerdict:
    """Classify (z, w) against the sublevel signature at depths nu_min..cap.

    OUT needs phi_mu >= -log mu + out_margin at some mu and at every deeper
    tested depth; IN needs phi_mu < -log mu at every tested depth.
    """
    pts = as_points(z, s.params.n)
    radius = math.sqrt(float(np.sum(np.abs(pts[0]) ** 2)) + abs(complex(w)) ** 2)
    if nu_min < 1 or nu_min < radius:
        raise ValueError(f"nu_min={nu_min} must be >= 1 and >= |(z, w)| = {radius:.6g}")
    if cap < nu_min:
        raise ValueError("cap must be >= nu_min")
    depths = np.arange(nu_min, cap + 1)
    phi = phi_profile(pts, w, depths, s)
    gap = phi + np.log(depths)  # >= 0 means outside the sublevel set
    if np.all(gap < 0):
        return MembershipVerdict("IN", cap, float(-gap.max()))
    above = gap >= out_margin
    # longest run of depths that stays above the threshold through the cap
    k = len(depths)
    while k > 0 and above[k - 1]:
        k -= 1
    if k < len(depths):
        return MembershipVerdict("OUT", int(depths[k]), float(gap[k:].min()))
    return MembershipVerdict("UNKNOWN", cap, float(np.abs(gap).min()))


# -- disc cover -----------------------------------------------------------


class CoverViolation(RuntimeError):
    """A deeper fiber left the disc cover around a shallower one."""


def fiber_cover_area(z, nu: int, s: ConstructionSchedule, cap: int | None = None) -> float:
    """Area pi 2^-nu of the 2^nu discs of radius 2^-nu around the depth-nu fiber.

    Before returning, every fiber of depth nu+1..cap over the same z is
    checked to lie inside that union of discs.
    """
    cap = s.params.nu_max if cap is None else cap
    if cap < nu:
        raise ValueError("cap must be >= nu")
    pts = as_points(z, s.params.n)
    terms = root_terms(pts[:1], cap, s)
    shallow = gray_fiber_from_terms(terms[:, :nu])[0]
    tree = cKDTree(_as_real(shallow))
    radius = 2.0**-nu
    for mu in range(nu + 1, cap + 1):
        # the depth-mu fiber is shallow + tails (Minkowski sum); a point whose own
        # tail is shorter than the radius sits in its parent's disc already
        tails = gray_fiber_from_terms(terms[:, nu:mu])[0]
        far = tails[np.abs(tails) >= radius]
        if far.size == 0:
            continue
        d, _ = tree.query(_as_real((shallow[:, None] + far[None, :]).ravel()))
        if d.max() >= radius:
            raise CoverViolation(f"depth {mu} fiber leaves the depth {nu} cover by {d.max() - radius:.3g}")
    return math.pi * 2.0**-nu

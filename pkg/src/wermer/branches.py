"""Branch enumeration for g_nu(z) = sum_l eps_l sqrt(z_[l] - a_l) and the
polynomials P_nu, phi_nu built from it.

The vectorized kernels take a batch of base points ``z`` with shape
``(B, n-1)`` and return one fiber of ``2**nu`` values per base point. Fibers
are laid out in reflected-binary Gray order: entry ``k`` uses the sign vector
``gray(k) = k ^ (k >> 1)`` where bit ``l-1`` set means the ``l``-th radical
enters with a minus sign. Consecutive entries therefore differ by a single
sign flip.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, Sequence

import numpy as np

from .logpolar import LogPolarValue, wrap_angle

if TYPE_CHECKING:
    from .schedule import ConstructionSchedule

MAX_FIBER_DEPTH = 26
# complex entries per working block, keeps peak memory near 64 MiB
_BLOCK = 1 << 22


class DepthError(ValueError):
    """Requested depth exceeds what the schedule defines."""


class ResourceLimitError(RuntimeError):
    """Requested work exceeds a configured guardrail."""


def principal_sqrt(c):
    """Square root with argument in (-pi/2, pi/2].

    The cut runs along the negative real axis and points on the cut map to
    the upper imaginary axis, including inputs carrying a negative zero
    imaginary part.
    """
    arr = np.asarray(c, dtype=complex)
    folded = arr.real + (arr.imag + 0.0) * 1j
    out = np.sqrt(folded)
    if np.ndim(c) == 0:
        return complex(out)
    return out


def to_gray(k: int) -> int:
    return k ^ (k >> 1)


def gray_walk(nu: int) -> Iterator[tuple[int, int | None]]:
    """Yield (code, flipped_bit) over all 2**nu codes, one bit flip per step."""
    prev = 0
    yield 0, None
    for k in range(1, 1 << nu):
        code = to_gray(k)
        yield code, (code ^ prev).bit_length() - 1
        prev = code


def _check_depth(nu: int, s: "ConstructionSchedule") -> None:
    if nu < 1:
        raise DepthError(f"depth must be >= 1, got {nu}")
    if nu > s.params.nu_max:
        raise DepthError(f"depth {nu} exceeds schedule nu_max={s.params.nu_max}")
    if nu > MAX_FIBER_DEPTH:
        raise ResourceLimitError(f"fibers above depth {MAX_FIBER_DEPTH} are refused")


def as_points(z, n: int) -> np.ndarray:
    """Coerce base points to shape (B, n-1)."""
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.shape[0] == n - 1 and n > 2 else arr.reshape(-1, 1)
    if arr.shape[-1] != n - 1:
        raise ValueError(f"base points need {n - 1} coordinates, got shape {arr.shape}")
    return arr


def radicands(z: np.ndarray, nu: int, s: "ConstructionSchedule") -> np.ndarray:
    """z_[l] - a_l for l = 1..nu; shape (B, nu)."""
    return z[:, s.dir_index[:nu]] - s.a_array[:nu]


def root_terms(z: np.ndarray, nu: int, s: "ConstructionSchedule") -> np.ndarray:
    """eps_l * sqrt(z_[l] - a_l) on the principal branch; shape (B, nu)."""
    return s.eps_array[:nu] * principal_sqrt(radicands(z, nu, s))


def gray_fiber_from_terms(terms: np.ndarray) -> np.ndarray:
    """All signed sums of the columns of ``terms`` in Gray order.

    Level l appends the reversed previous block with the l-th term
    subtracted, so the whole fiber costs 2**nu additions per base point.
    """
    B, nu = terms.shape
    out = np.empty((B, 1 << nu), dtype=complex)
    out[:, 0] = 0.0
    size = 1
    for l in range(nu):
        r = terms[:, l : l + 1]
        out[:, size : 2 * size] = out[:, size - 1 :: -1][:, :size] - r
        out[:, :size] += r
        size *= 2
    return out


def fibers(z, nu: int, s: "ConstructionSchedule") -> np.ndarray:
    """Fibers of E_nu over a batch of base points; shape (B, 2**nu)."""
    _check_depth(nu, s)
    pts = as_points(z, s.params.n)
    return gray_fiber_from_terms(root_terms(pts, nu, s))


def naive_fiber(z: Sequence[complex], nu: int, s: "ConstructionSchedule") -> list[complex]:
    """Reference enumeration: re-sum every sign vector from scratch."""
    pts = as_points(z, s.params.n)
    terms = root_terms(pts, nu, s)[0]
    out = []
    for signs in itertools.product((1.0, -1.0), repeat=nu):
        acc = 0j
        for sg, t in zip(signs, terms):
            acc += sg * t
        out.append(acc)
    return out


def log_abs_on_fiber(fib: np.ndarray, w: np.ndarray) -> np.ndarray:
    """sum_j log|w - fib_j| for fibers (B, N) and probes (B, W) -> (B, W)."""
    B, N = fib.shape
    w = np.asarray(w, dtype=complex).reshape(B, -1)
    W = w.shape[1]
    out = np.empty((B, W))
    step = max(1, _BLOCK // max(N, 1))
    with np.errstate(divide="ignore"):
        for b in range(B):
            fb = fib[b]
            for start in range(0, W, step):
                blk = w[b, start : start + step, None] - fb[None, :]
                out[b, start : start + step] = np.log(np.abs(blk)).sum(axis=1)
    return out


def log_abs_P(z, w, nu: int, s: "ConstructionSchedule") -> np.ndarray:
    """log|P_nu(z_i, w_i)| for paired batches of points; shape (B,)."""
    _check_depth(nu, s)
    pts = as_points(z, s.params.n)
    w = np.asarray(w, dtype=complex).reshape(-1)
    if pts.shape[0] == 1 and w.shape[0] > 1:
        fib = fibers(pts, nu, s)
        return log_abs_on_fiber(fib, w[None, :])[0]
    if pts.shape[0] != w.shape[0]:
        raise ValueError("z and w batches differ in length")
    out = np.empty(w.shape[0])
    per = max(1, _BLOCK >> nu)
    with np.errstate(divide="ignore"):
        for start in range(0, w.shape[0], per):
            fib = gray_fiber_from_terms(root_terms(pts[start : start + per], nu, s))
            d = w[start : start + per, None] - fib
            out[start : start + per] = np.log(np.abs(d)).sum(axis=1)
    return out


def phi_nu(z, w, nu: int, s: "ConstructionSchedule") -> np.ndarray:
    """phi_nu = 2**-nu log|P_nu| for paired batches; -inf on E_nu."""
    return log_abs_P(z, w, nu, s) / float(1 << nu)


# -- single-point surface -------------------------------------------------


@dataclass(frozen=True)
class BranchFiber:
    z: tuple[complex, ...]
    nu: int
    values: np.ndarray  # 2**nu values in Gray order

    def __len__(self) -> int:
        return len(self.values)


def branch_fiber(z, nu: int, s: "ConstructionSchedule") -> BranchFiber:
    pts = as_points(z, s.params.n)
    if pts.shape[0] != 1:
        raise ValueError("branch_fiber takes a single base point")
    vals = fibers(pts, nu, s)[0]
    return BranchFiber(tuple(complex(c) for c in pts[0]), nu, vals)


def logpolar_product(factors: np.ndarray) -> LogPolarValue:
    """Product of the given complex factors in log-polar form."""
    f = np.asarray(factors, dtype=complex).ravel()
    if np.any(f == 0):
        return LogPolarValue.zero()
    return LogPolarValue(float(np.log(np.abs(f)).sum()), wrap_angle(float(np.angle(f).sum())))


def eval_P(z, w: complex, nu: int, s: "ConstructionSchedule") -> LogPolarValue:
    """P_nu(z, w) as a product over the fiber."""
    fib = branch_fiber(z, nu, s).values
    return logpolar_product(complex(w) - fib)


def remark_terms(z, w: complex, nu: int, s: "ConstructionSchedule", term_cap: int = 1 << 20):
    """Closed-form sum_{d=0}^{2^(nu-1)} (-1)^d U^d w^(2^nu - 2d), U = sum_l eps_l^2 (z_[l]-a_l).

    Evaluated term by term in log-polar form and combined with a
    max-shifted sum.
    """
    _check_depth(nu, s)
    M = 1 << (nu - 1)
    if M + 1 > term_cap:
        raise ResourceLimitError(f"closed form needs {M + 1} terms, cap is {term_cap}")
    pts = as_points(z, s.params.n)
    U = complex(np.sum(s.eps_array[:nu] ** 2 * radicands(pts, nu, s)[0]))
    w = complex(w)
    d = np.arange(M + 1, dtype=float)
    wexp = float(1 << nu) - 2.0 * d
    with np.errstate(divide="ignore", invalid="ignore"):
        lu = math.log(abs(U)) if U != 0 else -math.inf
        lw = math.log(abs(w)) if w != 0 else -math.inf
        log_u = np.where(d == 0, 0.0, d * lu)
        log_w = np.where(wexp == 0, 0.0, wexp * lw)
    au = cmath_phase(U)
    aw = cmath_phase(w)
    logs = log_u + log_w
    args = d * (au + math.pi) + wexp * aw
    return logs, args


def cmath_phase(c: complex) -> float:
    return math.atan2(c.imag, c.real) if c != 0 else 0.0


def eval_P_remark(z, w: complex, nu: int, s: "ConstructionSchedule", term_cap: int = 1 << 20) -> LogPolarValue:
    logs, args = remark_terms(z, w, nu, s, term_cap)
    finite = np.isfinite(logs)
    if not finite.any():
        return LogPolarValue.zero()
    top = logs[finite].max()
    total = np.sum(np.exp(logs[finite] - top) * np.exp(1j * np.mod(args[finite], 2 * math.pi)))
    if total == 0:
        return LogPolarValue.zero()
    return LogPolarValue(float(top + math.log(abs(total))), wrap_angle(cmath_phase(complex(total))))


def eval_phi_nu(z, w: complex, nu: int, s: "ConstructionSchedule") -> float:
    return eval_P(z, w, nu, s).log_mag / float(1 << nu)


@dataclass(frozen=True)
class PhiEstimate:
    value: float
    depth_used: int
    status: str  # "converged" | "near_E" | "depth_capped"


def eval_phi(z, w: complex, tol: float, cap: int, s: "ConstructionSchedule") -> PhiEstimate:
    """Iterate phi_nu upward until successive values agree to ``tol``.

    Stops early with ``near_E`` when phi_nu hits -inf or, once nu is at
    least max(2, |(z, w)|), drops below -log(nu).
    """
    _check_depth(cap, s)
    pts = as_points(z, s.params.n)
    w = complex(w)
    radius = math.sqrt(float(np.sum(np.abs(pts[0]) ** 2)) + abs(w) ** 2)
    nu_signature = max(2, math.ceil(radius))
    terms = root_terms(pts, cap, s)
    prev = None
    value = math.nan
    for nu in range(1, cap + 1):
        fib = gray_fiber_from_terms(terms[:, :nu])[0]
        with np.errstate(divide="ignore"):
            value = float(np.log(np.abs(w - fib)).sum()) / float(1 << nu)
        if value == -math.inf:
            return PhiEstimate(value, nu, "near_E")
        if math.isinf(tol) or (prev is not None and abs(value - prev) < tol):
            return PhiEstimate(value, nu, "converged")
        if nu >= nu_signature and value < -math.log(nu):
            return PhiEstimate(value, nu, "near_E")
        prev = value
    return PhiEstimate(value, cap, "depth_capped")

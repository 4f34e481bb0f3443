"""Construction schedule: centers, direction pairing, and the eps/rho/delta sequences.

Every other module reads a frozen :class:`ConstructionSchedule`. Building one
is deterministic given :class:`ConstructionParams`; the seed only drives the
random sample points used by the sampled containment checks.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterator

import numpy as np

from .branches import gray_fiber_from_terms, log_abs_on_fiber, principal_sqrt

DENSE_SCHEMES = ("gaussian-dyadic",)
RHO_SCHEMES = ("geometric-4",)
# keeps the strict inequalities strict when epsilon_safety is exactly 1
_STRICT = 1.0 - 2.0**-20


@dataclass(frozen=True)
class ConstructionParams:
    n: int
    nu_max: int
    seed: int = 0
    dense_scheme: str = "gaussian-dyadic"
    epsilon_safety: float = 0.5
    rho_scheme: str = "geometric-4"
    paper_normalization: bool = False
    check_depth: int = 8
    check_samples: int = 48

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.nu_max < 1:
            raise ValueError(f"nu_max must be >= 1, got {self.nu_max}")
        if not (0.0 < self.epsilon_safety <= 1.0):
            raise ValueError(f"epsilon_safety must lie in (0, 1], got {self.epsilon_safety}")
        if self.dense_scheme not in DENSE_SCHEMES:
            raise ValueError(f"unknown dense_scheme {self.dense_scheme!r}")
        if self.rho_scheme not in RHO_SCHEMES:
            raise ValueError(f"unknown rho_scheme {self.rho_scheme!r}")
        if self.check_depth < 0 or self.check_samples < 1:
            raise ValueError("check_depth must be >= 0 and check_samples >= 1")


# -- dense centers --------------------------------------------------------


def _dyadic_level(j: int) -> list[complex]:
    """Gaussian dyadics (m + ik)/2^j with |m|, |k| <= j 2^j, spiral-sorted."""
    scale = 1 << j
    bound = j * scale
    pts = [complex(m, k) / scale for m in range(-bound, bound + 1) for k in range(-bound, bound + 1)]
    pts.sort(key=lambda c: (abs(c), math.atan2(c.imag, c.real) % (2 * math.pi)))
    return pts


@lru_cache(maxsize=None)
def dense_prefix(count: int) -> tuple[complex, ...]:
    """First ``count`` entries of the de-duplicated dyadic spiral.

    Level j refines the grid to spacing 2^-j and widens the box to side 2j,
    so the union over j is dense in the plane.
    """
    out: list[complex] = []
    seen: set[complex] = set()
    j = 0
    while len(out) < count:
        for c in _dyadic_level(j):
            if c not in seen:
                seen.add(c)
                out.append(c)
                if len(out) == count:
                    break
        j += 1
    return tuple(out)


def iter_dense() -> Iterator[complex]:
    seen: set[complex] = set()
    j = 0
    while True:
        for c in _dyadic_level(j):
            if c not in seen:
                seen.add(c)
                yield c
        j += 1


# -- direction pairing ----------------------------------------------------


def direction_and_index(l: int, n: int) -> tuple[int, int]:
    """Map l >= 1 to (direction p, index k) along truncated anti-diagonals.

    Diagonal s = p + k is walked with p increasing; only p <= n-1 is kept,
    so for n = 2 the map is l -> (1, l).
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    m = n - 1
    full = m * (m + 1) // 2
    if l <= full:
        t = (1 + math.isqrt(8 * l - 7)) // 2 + 1
        while (t - 1) * t // 2 < l:
            t += 1
        while t > 2 and (t - 2) * (t - 1) // 2 >= l:
            t -= 1
        p = l - (t - 2) * (t - 1) // 2
        return p, t - p
    r = l - full
    s = m + 1 + -(-r // m)
    p = r - (s - m - 2) * m
    return p, s - p


def index_of(p: int, k: int, n: int) -> int:
    """Inverse of :func:`direction_and_index`."""
    m = n - 1
    if not (1 <= p <= m) or k < 1:
        raise ValueError(f"(p, k) = ({p}, {k}) out of range for n={n}")
    s = p + k
    if s <= m + 1:
        return (s - 2) * (s - 1) // 2 + p
    return m * (m + 1) // 2 + (s - m - 2) * m + p


def center_for(l: int, n: int) -> tuple[int, complex]:
    p, k = direction_and_index(l, n)
    return p, dense_prefix(k)[k - 1]


# -- schedule -------------------------------------------------------------


@dataclass(frozen=True)
class ConstructionSchedule:
    params: ConstructionParams
    a: tuple[complex, ...]
    directions: tuple[int, ...]  # [l], 1-based
    indices: tuple[int, ...]  # second slot of the pairing
    eps: tuple[float, ...]
    rho: tuple[float, ...]
    delta: tuple[float, ...]
    notes: tuple[str, ...] = ()
    check_log: tuple[dict, ...] = field(default=(), compare=False)

    @cached_property
    def eps_array(self) -> np.ndarray:
        return np.asarray(self.eps, dtype=float)

    @cached_property
    def a_array(self) -> np.ndarray:
        return np.asarray(self.a, dtype=complex)

    @cached_property
    def dir_index(self) -> np.ndarray:
        return np.asarray(self.directions, dtype=int) - 1

    @property
    def depth(self) -> int:
        return len(self.eps)

    def truncated(self, depth: int) -> "ConstructionSchedule":
        if not 1 <= depth <= self.depth:
            raise ValueError(f"cannot truncate depth {self.depth} schedule to {depth}")
        return dataclasses.replace(
            self,
            params=dataclasses.replace(self.params, nu_max=depth),
            a=self.a[:depth],
            directions=self.directions[:depth],
            indices=self.indices[:depth],
            eps=self.eps[:depth],
            rho=self.rho[:depth],
            delta=self.delta[:depth],
        )

    def with_eps(self, l: int, value: float) -> "ConstructionSchedule":
        """Copy with eps_l replaced; used for scaling experiments and corruption controls."""
        eps = list(self.eps)
        eps[l - 1] = float(value)
        return dataclasses.replace(self, eps=tuple(eps))

    def with_delta(self, l: int, value: float) -> "ConstructionSchedule":
        delta = list(self.delta)
        delta[l - 1] = float(value)
        return dataclasses.replace(self, delta=tuple(delta))

    def scaled(self, t: float) -> "ConstructionSchedule":
        return dataclasses.replace(self, eps=tuple(t * e for e in self.eps))


def rho_sequence(depth: int, scheme: str = "geometric-4") -> tuple[float, ...]:
    if scheme != "geometric-4":
        raise ValueError(f"unknown rho_scheme {scheme!r}")
    return tuple(4.0**-nu for nu in range(1, depth + 1))


def _ball_sup_sqrt(radius: float, a: complex) -> float:
    """sup of sqrt|zeta - a| over |zeta| <= radius."""
    return math.sqrt(radius + abs(a))


def epsilon_bound(
    l: int, prefix: ConstructionSchedule | None, n: int | None = None, a_l: complex | None = None
) -> float:
    """Largest admissible eps_l given eps_1..eps_{l-1} and delta_1..delta_{l-1}.

    Minimum of three caps:
      * on-ball: eps_l sqrt|zeta - a_l| < 2^-l for |zeta| <= l + |a_l|;
      * growth: (1/9)(eps_{l-1}/eps_l)^2 > l-1;
      * coupling: eps_l sqrt|z - a_l| < 2^-l min(delta_1..delta_{l-1}) on |z| <= l+1.

    ``a_l`` overrides the scheduled center, for probing how the bound moves with it.
    """
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    if n is None:
        if prefix is None:
            raise ValueError("need a prefix schedule or an explicit n")
        n = prefix.params.n
    if a_l is None:
        _, a_l = center_for(l, n)
    bound = 2.0**-l / _ball_sup_sqrt(l + abs(a_l), a_l)
    if l == 1 or prefix is None or prefix.depth == 0:
        return bound
    if prefix.depth < l - 1:
        raise ValueError(f"prefix holds {prefix.depth} levels, need {l - 1}")
    growth = prefix.eps[l - 2] / (3.0 * math.sqrt(l - 1))
    coupling = 2.0**-l * min(prefix.delta[: l - 1]) / _ball_sup_sqrt(l + 1, a_l)
    return min(bound, growth, coupling)


# -- sampled containment checks used while building -----------------------


@dataclass
class _LevelSamples:
    """Random (z, w) points near E_l plus ring probes around each."""

    z: np.ndarray  # (B, n-1)
    w: np.ndarray  # (B, W)
    radius: float


def _sample_level(rng: np.random.Generator, l: int, s: ConstructionSchedule, count: int) -> _LevelSamples:
    n = s.params.n
    radius = float(l + 1)
    B = count
    g = rng.standard_normal((B, n - 1)) + 1j * rng.standard_normal((B, n - 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(B) ** (1.0 / (2 * (n - 1)))
    z = g * r[:, None]
    terms = s.eps_array[:l] * principal_sqrt(z[:, s.dir_index[:l]] - s.a_array[:l])
    fib = gray_fiber_from_terms(terms)
    W = 24
    pick = rng.integers(0, fib.shape[1], size=(B, W))
    base = np.take_along_axis(fib, pick, axis=1)
    mag = 10.0 ** rng.uniform(-5.0, 0.5, size=(B, W))
    w = base + mag * np.exp(2j * np.pi * rng.random((B, W)))
    w[:, -4:] = radius * np.sqrt(rng.random((B, 4))) * np.exp(2j * np.pi * rng.random((B, 4)))
    return _LevelSamples(z, w, radius)


_RING = np.exp(2j * np.pi * np.arange(8) / 8)


def _phi_with_probes(s: ConstructionSchedule, nu: int, smp: _LevelSamples, probe_r: float) -> tuple[np.ndarray, np.ndarray]:
    """phi_nu at sample points (B, W) and at two rings of w-probes (B, W, 16)."""
    terms = s.eps_array[:nu] * principal_sqrt(smp.z[:, s.dir_index[:nu]] - s.a_array[:nu])
    fib = gray_fiber_from_terms(terms)
    offsets = np.concatenate([0.95 * probe_r * _RING, 0.5 * probe_r * _RING])
    probes = smp.w[:, :, None] + offsets[None, None, :]
    B, W = smp.w.shape
    flat = np.concatenate([smp.w, probes.reshape(B, -1)], axis=1)
    vals = log_abs_on_fiber(fib, flat) / float(1 << nu)
    return vals[:, :W], vals[:, W:].reshape(B, W, -1)


def _in_ball(smp: _LevelSamples, radius: float) -> np.ndarray:
    zn = np.sum(np.abs(smp.z) ** 2, axis=1)[:, None]
    return zn + np.abs(smp.w) ** 2 <= radius * radius


def _check_outer(s: ConstructionSchedule, l: int, smp: _LevelSamples) -> bool:
    """Sampled form of {phi_l < -log lam}_(l) inside the delta_{l-1}/2^{l-1} neighborhood of {phi_{l-1} < -log lam}."""
    r = s.delta[l - 2] / 2.0 ** (l - 1)
    deep, _ = _phi_with_probes(s, l, smp, r)
    shallow, shallow_probes = _phi_with_probes(s, l - 1, smp, r)
    near_min = np.minimum(shallow, shallow_probes.min(axis=2))
    mask = _in_ball(smp, float(l))
    for lam in range(1, l + 1):
        thr = -math.log(lam)
        bad = mask & (deep < thr) & ~(near_min < thr)
        if bad.any():
            return False
    return True


def _check_inner(s: ConstructionSchedule, l: int, smp: _LevelSamples) -> bool:
    """Sampled form of the shrunken {phi_{l-1} < -log lam}_(l) lying inside {phi_l < -log lam}."""
    if l < 3:
        return True
    r = s.delta[l - 2] / 2.0 ** (l - 1)
    deep, _ = _phi_with_probes(s, l, smp, r)
    shallow, shallow_probes = _phi_with_probes(s, l - 1, smp, r)
    near_max = np.maximum(shallow, shallow_probes.max(axis=2))
    mask = _in_ball(smp, float(l))
    for lam in range(1, l - 1):
        thr = -math.log(lam)
        bad = mask & (near_max < thr) & ~(deep < thr)
        if bad.any():
            return False
    return True


def _check_separation(s: ConstructionSchedule, l: int, smp: _LevelSamples, delta: float) -> bool:
    """Sampled form: points strictly below -log(l+1) or above -log(l-1) stay delta away from {phi_l = -log l}."""
    vals, probes = _phi_with_probes(s, l, smp, delta)
    lo = -math.log(l + 1)
    hi = math.inf if l == 1 else -math.log(l - 1)
    level = -math.log(l)
    mask = _in_ball(smp, float(l + 1))
    below = mask & (vals < lo) & ~(probes.max(axis=2) < level)
    above = mask & (vals > hi) & ~(probes.min(axis=2) > level)
    return not (below.any() or above.any())


def build_schedule(params: ConstructionParams) -> ConstructionSchedule:
    """Choose eps_l, delta_l level by level.

    eps_l starts at epsilon_safety times :func:`epsilon_bound` and is halved
    until the sampled outer/inner containment checks against level l-1 pass;
    delta_l starts at delta_{l-1}/4 and is halved until the sampled
    separation check passes. Levels above ``params.check_depth`` use the
    starting values unchecked, which the check log records.
    """
    n, depth = params.n, params.nu_max
    rng = np.random.default_rng(params.seed)
    pairs = [direction_and_index(l, n) for l in range(1, depth + 1)]
    dense = dense_prefix(max(k for _, k in pairs))
    a = tuple(dense[k - 1] for _, k in pairs)
    directions = tuple(p for p, _ in pairs)
    indices = tuple(k for _, k in pairs)
    rho = rho_sequence(depth, params.rho_scheme)
    factor = min(params.epsilon_safety, _STRICT)
    notes: list[str] = []
    log: list[dict] = []

    eps: list[float] = []
    delta: list[float] = []

    def level(l: int, e: float, d: float) -> ConstructionSchedule:
        return ConstructionSchedule(
            params=dataclasses.replace(params, nu_max=l),
            a=a[:l],
            directions=directions[:l],
            indices=indices[:l],
            eps=(*eps, e),
            rho=rho[:l],
            delta=(*delta, d),
        )

    for l in range(1, depth + 1):
        prefix = level(l, 0.0, 0.0).truncated(l - 1) if l > 1 else None
        bound = epsilon_bound(l, prefix, n)
        e = factor * bound
        halvings = 0
        sampled = l <= params.check_depth
        smp = None
        if sampled:
            smp = _sample_level(rng, l, level(l, e, 1.0), params.check_samples)
        if sampled and l >= 2:
            while halvings < 60:
                trial = level(l, e, 1.0)
                if _check_outer(trial, l, smp) and _check_inner(trial, l, smp):
                    break
                e *= 0.5
                halvings += 1
        eps.append(e)

        d = 0.25 if l == 1 else delta[-1] / 4.0
        d_halvings = 0
        if sampled:
            trial = level(l, e, d)
            while d_halvings < 60 and not _check_separation(trial, l, smp, d):
                d *= 0.5
                d_halvings += 1
        delta.append(d)
        log.append(
            {
                "level": l,
                "eps_bound": bound,
                "eps_halvings": halvings,
                "delta_halvings": d_halvings,
                "sampled": sampled,
                "samples": int(smp.w.size) if smp is not None else 0,
            }
        )

    if params.paper_normalization:
        trial = ConstructionSchedule(params, a, directions, indices, (1.0, *eps[1:]), rho, tuple(delta))
        report = validate_schedule(trial, 1)
        growth_ok = depth < 2 or (1.0 / 9.0) * (1.0 / eps[1]) ** 2 > 1
        if report.passed and growth_ok:
            eps[0] = 1.0
            notes.append("eps_1 normalized to 1")
        else:
            notes.append("eps_1 = 1 rejected by depth-1 validation; kept safety * bound")
    unchecked = [entry["level"] for entry in log if not entry["sampled"]]
    if unchecked:
        notes.append(f"levels {unchecked[0]}..{unchecked[-1]} use unsampled eps/delta starting values")

    return ConstructionSchedule(
        params=params,
        a=a,
        directions=directions,
        indices=indices,
        eps=tuple(eps),
        rho=rho,
        delta=tuple(delta),
        notes=tuple(notes),
        check_log=tuple(log),
    )


def from_values(
    eps,
    a,
    n: int = 2,
    directions=None,
    delta=None,
    rho=None,
    seed: int = 0,
) -> ConstructionSchedule:
    """Hand-specified schedule, e.g. eps = (1,), a = (0,) for closed-form examples.

    No admissibility is enforced; run :func:`validate_schedule` if that matters.
    """
    eps = tuple(float(e) for e in eps)
    a = tuple(complex(c) for c in a)
    depth = len(eps)
    if len(a) != depth:
        raise ValueError("eps and a must have the same length")
    if directions is None:
        pairs = [direction_and_index(l, n) for l in range(1, depth + 1)]
        directions = tuple(p for p, _ in pairs)
        indices = tuple(k for _, k in pairs)
    else:
        directions = tuple(int(p) for p in directions)
        counts: dict[int, int] = {}
        idx = []
        for p in directions:
            if not 1 <= p <= n - 1:
                raise ValueError(f"direction {p} out of range for n={n}")
            counts[p] = counts.get(p, 0) + 1
            idx.append(counts[p])
        indices = tuple(idx)
    if delta is None:
        delta = tuple(0.25 * 4.0 ** -(l - 1) for l in range(1, depth + 1))
    if rho is None:
        rho = rho_sequence(depth)
    params = ConstructionParams(n=n, nu_max=depth, seed=seed, epsilon_safety=1.0, check_depth=0)
    return ConstructionSchedule(
        params, a, directions, indices, eps, tuple(map(float, rho)), tuple(map(float, delta)), notes=("explicit values",)
    )


def unit_preset(depth: int = 1) -> ConstructionSchedule:
    """eps_1 = 1, a_1 = 0, deeper levels shrinking by a factor 10 each."""
    eps = [10.0 ** -(l - 1) for l in range(1, depth + 1)]
    a = [center_for(l, 2)[1] for l in range(1, depth + 1)]
    return from_values(eps, a)


# -- validation -----------------------------------------------------------


@dataclass(frozen=True)
class ConditionCheck:
    condition: str
    checked_range: str
    passed: bool
    margin: float


@dataclass(frozen=True)
class ValidationReport:
    depth: int
    checked_conditions: tuple[ConditionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checked_conditions)

    def by_id(self, condition: str) -> ConditionCheck:
        for c in self.checked_conditions:
            if c.condition == condition:
                return c
        raise KeyError(condition)


def _finite(m: float) -> float:
    # an empty range is vacuously satisfied
    return 1.0 if m == math.inf else m


def _relative_decrease(seq) -> float:
    """Smallest relative step of a sequence that must be positive and strictly decreasing."""
    if min(seq) <= 0:
        return min(seq)
    m = math.inf
    for prev, cur in zip(seq, seq[1:]):
        m = min(m, (prev - cur) / prev)
    return _finite(m)


def _check(cid: str, rng: str, margin: float) -> ConditionCheck:
    return ConditionCheck(cid, rng, bool(margin > 0), float(margin))


def validate_schedule(s: ConstructionSchedule, depth: int) -> ValidationReport:
    """Evaluate each schedule invariant through ``depth`` as a numeric margin.

    Margins are relative slacks; a condition fails exactly when its margin
    is <= 0. Vacuous ranges report a margin of 1.
    """
    if not 1 <= depth <= s.depth:
        raise ValueError(f"depth {depth} outside 1..{s.depth}")
    eps = s.eps[:depth]
    checks: list[ConditionCheck] = []

    dist = math.inf
    for p in set(s.directions[:depth]):
        pts = [s.a[i] for i in range(depth) if s.directions[i] == p]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                dist = min(dist, abs(pts[i] - pts[j]))
    checks.append(_check("distinct-centers", f"l=1..{depth}", 1.0 if dist == math.inf else dist))

    m = _relative_decrease(eps)
    checks.append(_check("eps-decreasing", f"l=1..{depth}", m))

    m = math.inf
    for l in range(1, depth + 1):
        a_l = s.a[l - 1]
        m = min(m, 1.0 - eps[l - 1] * _ball_sup_sqrt(l + abs(a_l), a_l) * 2.0**l)
    checks.append(_check("on-ball", f"l=1..{depth}", m))

    m = math.inf
    for l in range(1, depth):
        m = min(m, ((eps[l - 1] / eps[l]) ** 2 / 9.0 - l) / l if eps[l] > 0 else -1.0)
    checks.append(_check("growth", f"l=1..{depth - 1}", _finite(m)))

    rho = s.rho[:depth]
    m = _relative_decrease(rho)
    for nu in range(1, depth):
        # nu bounds the size of every per-direction index set
        vol_prev = nu * math.pi * rho[nu - 1] ** 2
        vol = (nu + 1) * math.pi * rho[nu] ** 2
        m = min(m, (vol_prev - vol) / vol_prev)
    checks.append(_check("rho", f"nu=1..{depth}", m))

    delta = s.delta[:depth]
    m = 1.0 - 2.0 * delta[0] if min(delta) > 0 else min(delta)
    for l in range(1, depth):
        m = min(m, (delta[l - 1] / 2.0 - delta[l]) / delta[l - 1])
    checks.append(_check("delta", f"nu=1..{depth}", m))

    m = math.inf
    for l in range(2, depth + 1):
        a_l = s.a[l - 1]
        cap = 2.0**-l * min(delta[: l - 1])
        m = min(m, 1.0 - eps[l - 1] * _ball_sup_sqrt(l + 1, a_l) / cap)
    checks.append(_check("eps-delta-coupling", f"l=2..{depth}", _finite(m)))

    return ValidationReport(depth, tuple(checks))


@lru_cache(maxsize=None)
def demo_schedule() -> ConstructionSchedule:
    """The shipped reference schedule: n=2, depth 16, seed 7, safety 1/2."""
    return build_schedule(ConstructionParams(n=2, nu_max=16, seed=7, epsilon_safety=0.5))

"""Complex numbers stored as (log-magnitude, argument).

Products of 2^nu linear factors overflow or underflow double precision long
before nu reaches the depths used here, so every polynomial value is carried
in this form.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    t = math.remainder(theta, 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    return t


@dataclass(frozen=True)
class LogPolarValue:
    log_mag: float
    arg: float  # nan when log_mag is -inf

    @classmethod
    def from_complex(cls, c: complex) -> "LogPolarValue":
        c = complex(c)
        if c == 0:
            return cls.zero()
        return cls(math.log(abs(c)), wrap_angle(math.atan2(c.imag, c.real)))  # cmath.phase raises on subnormal underflow

    @classmethod
    def zero(cls) -> "LogPolarValue":
        return cls(-math.inf, math.nan)

    @property
    def is_zero(self) -> bool:
        return self.log_mag == -math.inf

    def __mul__(self, other: "LogPolarValue") -> "LogPolarValue":
        if self.is_zero or other.is_zero:
            return LogPolarValue.zero()
        return LogPolarValue(self.log_mag + other.log_mag, wrap_angle(self.arg + other.arg))

    def __pow__(self, k: int) -> "LogPolarValue":
        if self.is_zero:
            return LogPolarValue.zero() if k > 0 else LogPolarValue(0.0, 0.0)
        return LogPolarValue(k * self.log_mag, wrap_angle(k * self.arg))

    def to_complex(self) -> complex:
        """Plain complex value; overflows to inf for large log_mag."""
        if self.is_zero:
            return 0j
        return cmath.rect(math.exp(self.log_mag), self.arg)

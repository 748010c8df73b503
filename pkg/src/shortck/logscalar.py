"""Complex scalars stored as (log modulus, phase).

Tower parameters such as a**(2**40) underflow a double long before the
dynamics stop caring about them, so every schedule value lives here.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def _wrap(phase: float) -> float:
    p = math.fmod(phase, TWO_PI)
    if p < 0.0:
        p += TWO_PI
    # fmod can hand back exactly 2*pi after the correction above
    return 0.0 if p >= TWO_PI else p


@dataclass(frozen=True)
class LogScalar:
    """A complex number r*exp(i*theta) kept as (log r, theta).

    log_modulus may be -inf, which encodes zero.
    """

    log_modulus: float
    phase: float = 0.0

    def __post_init__(self):
        if math.isnan(self.log_modulus) or self.log_modulus == math.inf:
            raise ValueError("log_modulus must be finite or -inf")
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")
        object.__setattr__(self, "phase", _wrap(float(self.phase)))
        object.__setattr__(self, "log_modulus", float(self.log_modulus))

    @classmethod
    def from_complex(cls, c) -> "LogScalar":
        c = complex(c)
        if not cmath.isfinite(c):
            raise ValueError("non-finite input")
        if c == 0:
            return cls(-math.inf, 0.0)
        return cls(math.log(abs(c)), cmath.phase(c))

    @classmethod
    def coerce(cls, value) -> "LogScalar":
        if isinstance(value, LogScalar):
            return value
        return cls.from_complex(value)

    @property
    def is_zero(self) -> bool:
        return self.log_modulus == -math.inf

    @property
    def modulus(self) -> float:
        """exp(log_modulus); may underflow to 0.0 or overflow to inf."""
        return math.exp(self.log_modulus) if self.log_modulus < 709.78 else math.inf

    @property
    def unit(self) -> complex:
        return cmath.exp(1j * self.phase)

    def to_complex(self) -> complex:
        if self.is_zero:
            return 0j
        return self.modulus * self.unit

    def __complex__(self):
        return self.to_complex()

    def __mul__(self, other):
        other = LogScalar.coerce(other)
        return LogScalar(self.log_modulus + other.log_modulus, self.phase + other.phase)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = LogScalar.coerce(other)
        if other.is_zero:
            raise ZeroDivisionError("division by a zero LogScalar")
        return LogScalar(self.log_modulus - other.log_modulus, self.phase - other.phase)

    def __pow__(self, e):
        # integer powers keep the phase exact-ish; real powers take the
        # principal branch
        if self.is_zero:
            if e > 0:
                return self
            raise ZeroDivisionError("non-positive power of zero")
        return LogScalar(e * self.log_modulus, e * self.phase)

    def inverse(self) -> "LogScalar":
        return LogScalar(0.0) / self

    # ordering is by modulus only
    def __lt__(self, other):
        return self.log_modulus < LogScalar.coerce(other).log_modulus

    def __le__(self, other):
        return self.log_modulus <= LogScalar.coerce(other).log_modulus

    def __gt__(self, other):
        return self.log_modulus > LogScalar.coerce(other).log_modulus

    def __ge__(self, other):
        return self.log_modulus >= LogScalar.coerce(other).log_modulus

    def __repr__(self):
        return f"LogScalar(log_modulus={self.log_modulus!r}, phase={self.phase!r})"

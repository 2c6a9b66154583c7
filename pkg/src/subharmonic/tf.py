"""Rational transfer functions in time-constant form.

A transfer function is stored as

    T(s) = scale * prod(1 + s/wz) * prod(1 + b1*s + b2*s^2)
           ------------------------------------------------
           s**integrators * prod(1 + s/wp) * prod(1 + a1*s + a2*s^2)

with all corner frequencies strictly positive.  This is the natural shape
for loop gains of converter control schemes, where each factor carries an
explicit corner frequency, and it keeps the DC gain (``scale``) separate
from the pole/zero structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = ["RationalTF"]


def _as_tuple(values):
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class RationalTF:
    """Immutable rational transfer function.

    Parameters
    ----------
    scale : float
        Multiplicative gain of the factored form.
    zeros, poles : sequence of float
        First-order corner frequencies (rad/s), each factor ``1 + s/w``.
        All must be strictly positive; a pole at the origin is expressed
        through ``integrators`` instead.
    integrators : int
        Number of poles at s = 0.
    quad_zeros, quad_poles : sequence of (b1, b2) pairs
        Second-order factors ``1 + b1*s + b2*s^2`` with ``b2 > 0``.
    """

    scale: float
    zeros: tuple = ()
    poles: tuple = ()
    integrators: int = 0
    quad_zeros: tuple = ()
    quad_poles: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "zeros", _as_tuple(self.zeros))
        object.__setattr__(self, "poles", _as_tuple(self.poles))
        object.__setattr__(
            self, "quad_zeros", tuple((float(a), float(b)) for a, b in self.quad_zeros)
        )
        object.__setattr__(
            self, "quad_poles", tuple((float(a), float(b)) for a, b in self.quad_poles)
        )
        object.__setattr__(self, "integrators", int(self.integrators))
        object.__setattr__(self, "scale", float(self.scale))
        if self.integrators < 0:
            raise DomainError("integrator count must be nonnegative")
        for w in self.zeros + self.poles:
            if not w > 0.0:
                raise DomainError("corner frequencies must be strictly positive")
        for b1, b2 in self.quad_zeros + self.quad_poles:
            if not b2 > 0.0:
                raise DomainError("quadratic factors need a positive s^2 coefficient")
        if self.num_order > self.den_order:
            raise DomainError("numerator order must not exceed denominator order")

    # ---- structural queries -------------------------------------------

    @property
    def num_order(self) -> int:
        return len(self.zeros) + 2 * len(self.quad_zeros)

    @property
    def den_order(self) -> int:
        return self.integrators + len(self.poles) + 2 * len(self.quad_poles)

    @property
    def relative_degree(self) -> int:
        return self.den_order - self.num_order

    def at_infinity(self) -> float:
        """Limit of T(s) as |s| -> inf (0 when strictly proper)."""
        if self.relative_degree > 0:
            return 0.0
        num = self.scale
        for w in self.zeros:
            num /= w
        for _, b2 in self.quad_zeros:
            num *= b2
        den = 1.0
        for w in self.poles:
            den /= w
        for _, b2 in self.quad_poles:
            den *= b2
        return num / den

    # ---- polynomial form ----------------------------------------------

    def num_coeffs(self) -> np.ndarray:
        """Numerator coefficients, ascending powers of s."""
        c = np.array([self.scale])
        for w in self.zeros:
            c = np.polynomial.polynomial.polymul(c, [1.0, 1.0 / w])
        for b1, b2 in self.quad_zeros:
            c = np.polynomial.polynomial.polymul(c, [1.0, b1, b2])
        return np.asarray(c, dtype=float)

    def den_coeffs(self) -> np.ndarray:
        """Denominator coefficients, ascending powers of s (integrators included)."""
        c = np.array([1.0])
        for w in self.poles:
            c = np.polynomial.polynomial.polymul(c, [1.0, 1.0 / w])
        for b1, b2 in self.quad_poles:
            c = np.polynomial.polynomial.polymul(c, [1.0, b1, b2])
        if self.integrators:
            c = np.concatenate([np.zeros(self.integrators), c])
        return np.asarray(c, dtype=float)

    # ---- evaluation ----------------------------------------------------

    def __call__(self, s):
        """Evaluate T at complex frequency ``s`` (scalar or array)."""
        s = np.asarray(s, dtype=complex)
        num = np.full(s.shape, self.scale, dtype=complex)
        for w in self.zeros:
            num = num * (1.0 + s / w)
        for b1, b2 in self.quad_zeros:
            num = num * (1.0 + b1 * s + b2 * s * s)
        den = np.ones(s.shape, dtype=complex)
        for w in self.poles:
            den = den * (1.0 + s / w)
        for b1, b2 in self.quad_poles:
            den = den * (1.0 + b1 * s + b2 * s * s)
        if self.integrators:
            den = den * s**self.integrators
        return num / den

    # ---- composition ---------------------------------------------------

    def scaled(self, factor: float) -> "RationalTF":
        return RationalTF(
            self.scale * factor,
            self.zeros,
            self.poles,
            self.integrators,
            self.quad_zeros,
            self.quad_poles,
        )

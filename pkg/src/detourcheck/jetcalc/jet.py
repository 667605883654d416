"""Scalar jets: truncated Taylor expansions at a base point.

Arithmetic is closed over jets sharing a dimension and base point; binary
operations between jets of different orders truncate to the lower order
(the retained coefficients are exactly those both operands determine).
Division requires an invertible (nonzero constant term) denominator and
raises :class:`JetDomainError` otherwise, as do ``log``/``sqrt`` outside
their domain.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial

import numpy as np

from .space import JetSpace, get_space


class JetDomainError(ZeroDivisionError):
    """Raised for jet operations outside their domain of definition
    (division by a jet with zero value, log/sqrt of a nonpositive value)."""


class Jet:
    __slots__ = ("space", "point", "coeffs")

    def __init__(self, space: JetSpace, point, coeffs):
        self.space = space
        self.point = np.asarray(point, dtype=np.float64)
        coeffs = np.asarray(coeffs)
        if coeffs.dtype.kind == "c":
            coeffs = coeffs.astype(np.complex128)
        else:
            coeffs = coeffs.astype(np.float64)
        if coeffs.shape != (space.size,):
            raise ValueError(f"expected {space.size} coefficients, got {coeffs.shape}")
        if self.point.shape != (space.n,):
            raise ValueError(f"base point must have {space.n} components")
        self.coeffs = coeffs

    # -- constructors ---------------------------------------------------
    @staticmethod
    def constant(value, space: JetSpace, point) -> "Jet":
        c = np.zeros(space.size, dtype=np.complex128 if isinstance(value, complex) else np.float64)
        c[0] = value
        return Jet(space, point, c)

    @staticmethod
    def variable(k: int, space: JetSpace, point) -> "Jet":
        """The coordinate function x_k expanded at the base point."""
        point = np.asarray(point, dtype=np.float64)
        c = np.zeros(space.size)
        c[0] = point[k]
        if space.order >= 1:
            c[space.index[tuple(int(i == k) for i in range(space.n))]] = 1.0
        return Jet(space, point, c)

    # -- accessors ------------------------------------------------------
    @property
    def n(self):
        return self.space.n

    @property
    def order(self):
        return self.space.order

    @property
    def value(self):
        return self.coeffs[0]

    def coeff(self, alpha) -> complex:
        return self.coeffs[self.space.index[tuple(alpha)]]

    def derivative(self, alpha) -> complex:
        """The partial derivative d^alpha at the base point (coefficient
        times alpha factorial)."""
        fac = 1
        for a in alpha:
            fac *= factorial(a)
        return self.coeff(alpha) * fac

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"cannot extend order {self.order} jet to order {order}")
        if order == self.order:
            return self
        sub = get_space(self.n, order)
        return Jet(sub, self.point, self.coeffs[: sub.size])

    def partial(self, k: int) -> "Jet":
        """d/dx_k, one order lower."""
        sub = get_space(self.n, self.order - 1)
        return Jet(sub, self.point, self.space.partial_coeffs(self.coeffs, k))

    # -- arithmetic -----------------------------------------------------
    def _align(self, other):
        if not isinstance(other, Jet):
            return NotImplemented
        if other.n != self.n or not np.array_equal(other.point, self.point):
            raise ValueError("jets must share dimension and base point")
        r = min(self.order, other.order)
        return self.truncate(r), other.truncate(r)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.space, a.point, a.coeffs + b.coeffs)
        if isinstance(other, (int, float, complex, Fraction)):
            c = self.coeffs.copy()
            if isinstance(other, complex) and c.dtype.kind != "c":
                c = c.astype(np.complex128)
            c[0] += other
            return Jet(self.space, self.point, c)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, self.point, -self.coeffs)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -1 * other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.space, a.point, a.space.jmul_flat(a.coeffs, b.coeffs))
        if isinstance(other, (int, float, complex, Fraction)):
            if isinstance(other, Fraction):
                other = float(other)
            return Jet(self.space, self.point, self.coeffs * other)
        return NotImplemented

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        c0 = self.coeffs[0]
        if abs(c0) == 0.0:
            raise JetDomainError("division by a jet with zero value")
        # 1/(c0 + h) = (1/c0) sum_m (-h/c0)^m, h has no constant term so the
        # series terminates at the jet order
        h = self.coeffs.copy()
        h[0] = 0.0
        h = h * (-1.0 / c0)
        out = np.zeros_like(self.coeffs)
        out[0] = 1.0
        power = out.copy()
        for _ in range(self.order):
            power = self.space.jmul_flat(power, h)
            out = out + power
        return Jet(self.space, self.point, out / c0)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return a * b.reciprocal()
        if isinstance(other, (int, float, complex, Fraction)):
            if isinstance(other, Fraction):
                other = float(other)
            return self * (1.0 / other)
        return NotImplemented

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, expo):
        if isinstance(expo, Fraction):
            if expo.denominator == 1:
                expo = int(expo)
        if isinstance(expo, int):
            if expo < 0:
                return self.reciprocal() ** (-expo)
            out = Jet.constant(1.0, self.space, self.point)
            base = self
            e = expo
            while e:
                if e & 1:
                    out = out * base
                base = base * base
                e >>= 1
            return out
        if isinstance(expo, (float, Fraction)):
            s = float(expo)
            c0 = self.coeffs[0].real if self.coeffs.dtype.kind != "c" else self.coeffs[0]
            if self.coeffs.dtype.kind == "c" or c0 <= 0.0:
                raise JetDomainError("fractional power needs a positive real value")
            derivs = []
            acc = 1.0
            for m in range(self.order + 1):
                derivs.append(acc * c0 ** (s - m))
                acc *= s - m
            return self.compose_series(derivs)
        return NotImplemented

    def compose_series(self, derivs) -> "Jet":
        """Apply an analytic function given its derivatives at the jet value.

        ``derivs[m]`` must be f^(m) evaluated at ``self.value``; the result is
        ``sum_m derivs[m]/m! * (self - value)^m`` truncated to the jet order.
        """
        h = self.coeffs.copy()
        h[0] = 0.0
        out = np.zeros_like(self.coeffs, dtype=np.complex128 if any(isinstance(d, complex) for d in derivs) or self.coeffs.dtype.kind == "c" else np.float64)
        out[0] = derivs[0]
        power = np.zeros_like(out)
        power[0] = 1.0
        fac = 1.0
        for m in range(1, min(len(derivs), self.order + 1)):
            fac *= m
            power = self.space.jmul_flat(power, h)
            out = out + power * (derivs[m] / fac)
        return Jet(self.space, self.point, out)

    def __repr__(self):
        return f"Jet(n={self.n}, order={self.order}, value={self.value!r})"


# -- analytic functions ------------------------------------------------


def _real_value(j: Jet, what: str) -> float:
    v = j.coeffs[0]
    if j.coeffs.dtype.kind == "c":
        if abs(v.imag) > 0:
            raise JetDomainError(f"{what} of a complex-valued jet")
        return v.real
    return float(v)


def jexp(j: Jet) -> Jet:
    e = np.exp(j.coeffs[0])
    return j.compose_series([e] * (j.order + 1))


def jlog(j: Jet) -> Jet:
    v = _real_value(j, "log")
    if v <= 0.0:
        raise JetDomainError("log of a nonpositive value")
    derivs = [np.log(v)]
    acc = 1.0
    for m in range(1, j.order + 1):
        derivs.append(acc * v ** (-m))
        acc *= -m
    return j.compose_series(derivs)


def jsqrt(j: Jet) -> Jet:
    return j ** 0.5


def jsin(j: Jet) -> Jet:
    v = j.coeffs[0]
    s, c = np.sin(v), np.cos(v)
    cycle = [s, c, -s, -c]
    return j.compose_series([cycle[m % 4] for m in range(j.order + 1)])


def jcos(j: Jet) -> Jet:
    v = j.coeffs[0]
    s, c = np.sin(v), np.cos(v)
    cycle = [c, -s, -c, s]
    return j.compose_series([cycle[m % 4] for m in range(j.order + 1)])


def jsinh(j: Jet) -> Jet:
    v = j.coeffs[0]
    s, c = np.sinh(v), np.cosh(v)
    return j.compose_series([(s if m % 2 == 0 else c) for m in range(j.order + 1)])


def jcosh(j: Jet) -> Jet:
    v = j.coeffs[0]
    s, c = np.sinh(v), np.cosh(v)
    return j.compose_series([(c if m % 2 == 0 else s) for m in range(j.order + 1)])


def jet_partial(j: Jet, k: int) -> Jet:
    return j.partial(k)

"""Truncated generalized power series arithmetic.

A series lives on an exponent lattice generated by a tuple of positive real
generators (g_0, ..., g_{m-1}): terms are c_h * t^(h . g) for multi-indices
h in Z_{>=0}^m.  Coefficients are floats; all operations truncate beyond a
fixed order.  Division and square roots are done by Newton iteration on the
series, so any right-hand side built from +, *, /, sqrt can be composed
automatically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import NonAnalyticError

_EXP_TOL = 1e-9


@dataclass(frozen=True)
class ExponentLattice:
    generators: tuple[float, ...]

    def __post_init__(self):
        if not self.generators or any(g <= 0 for g in self.generators):
            raise ValueError("lattice generators must be positive")

    @property
    def dim(self) -> int:
        return len(self.generators)

    def exponent(self, h: tuple[int, ...]) -> float:
        return sum(hi * gi for hi, gi in zip(h, self.generators))

    def indices_upto(self, order: float) -> list[tuple[int, ...]]:
        """All multi-indices with exponent <= order, sorted by exponent."""
        return _enumerate_indices(self.generators, order)

    def min_generator(self) -> float:
        return min(self.generators)


@lru_cache(maxsize=None)
def _enumerate_indices(generators: tuple[float, ...], order: float) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], remaining: float, gens: tuple[float, ...]):
        if not gens:
            out.append(prefix)
            return
        g = gens[0]
        k = 0
        while k * g <= remaining + _EXP_TOL:
            rec(prefix + (k,), remaining - k * g, gens[1:])
            k += 1

    rec((), order, generators)
    out.sort(key=lambda h: sum(hi * gi for hi, gi in zip(h, generators)))
    return out


class Series:
    __slots__ = ("lattice", "order", "coeffs")

    def __init__(self, lattice: ExponentLattice, order: float, coeffs: dict | None = None):
        self.lattice = lattice
        self.order = order
        self.coeffs: dict[tuple[int, ...], float] = coeffs or {}

    # -- constructors --

    @classmethod
    def constant(cls, lattice: ExponentLattice, order: float, value: float) -> Series:
        zero = (0,) * lattice.dim
        return cls(lattice, order, {zero: float(value)} if value != 0 else {})

    @classmethod
    def monomial(cls, lattice: ExponentLattice, order: float, h: tuple[int, ...], value: float = 1.0) -> Series:
        if lattice.exponent(h) > order + _EXP_TOL:
            return cls(lattice, order, {})
        return cls(lattice, order, {tuple(h): float(value)})

    # -- basic queries --

    def coeff(self, h: tuple[int, ...]) -> float:
        return self.coeffs.get(tuple(h), 0.0)

    @property
    def const(self) -> float:
        return self.coeffs.get((0,) * self.lattice.dim, 0.0)

    def magnitude(self) -> float:
        return sum(abs(c) for c in self.coeffs.values())

    def _like(self, coeffs: dict) -> Series:
        return Series(self.lattice, self.order, coeffs)

    def _check(self, other: Series):
        if other.lattice.generators != self.lattice.generators:
            raise ValueError("series live on different lattices")

    # -- ring operations --

    def __add__(self, other):
        if not isinstance(other, Series):
            out = dict(self.coeffs)
            zero = (0,) * self.lattice.dim
            out[zero] = out.get(zero, 0.0) + float(other)
            if out[zero] == 0.0:
                del out[zero]
            return self._like(out)
        self._check(other)
        out = dict(self.coeffs)
        for h, c in other.coeffs.items():
            v = out.get(h, 0.0) + c
            if v == 0.0:
                out.pop(h, None)
            else:
                out[h] = v
        return self._like(out)

    __radd__ = __add__

    def __neg__(self):
        return self._like({h: -c for h, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, Series) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Series):
            f = float(other)
            if f == 0.0:
                return self._like({})
            return self._like({h: c * f for h, c in self.coeffs.items()})
        self._check(other)
        lat, order = self.lattice, self.order
        gens = lat.generators
        out: dict[tuple[int, ...], float] = {}
        for h1, c1 in self.coeffs.items():
            e1 = lat.exponent(h1)
            for h2, c2 in other.coeffs.items():
                if e1 + lat.exponent(h2) > order + _EXP_TOL:
                    continue
                h = tuple(a + b for a, b in zip(h1, h2))
                out[h] = out.get(h, 0.0) + c1 * c2
        return self._like({h: c for h, c in out.items() if c != 0.0})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return (self ** (-k)).reciprocal()
        result = Series.constant(self.lattice, self.order, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __truediv__(self, other):
        if isinstance(other, Series):
            return self * other.reciprocal()
        return self * (1.0 / float(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    # -- Newton-iterated inverses --

    def _newton_steps(self) -> int:
        span = max(self.order / self.lattice.min_generator(), 1.0)
        return max(3, int(math.ceil(math.log2(span))) + 2)

    def reciprocal(self) -> Series:
        a0 = self.const
        if a0 == 0:
            raise NonAnalyticError("series reciprocal at a zero constant term")
        r = Series.constant(self.lattice, self.order, 1.0 / a0)
        for _ in range(self._newton_steps()):
            r = r * (2.0 - self * r)
        return r

    def sqrt(self) -> Series:
        a0 = self.const
        if a0 <= 0:
            raise NonAnalyticError(f"series sqrt needs a positive constant term, got {a0}")
        z = Series.constant(self.lattice, self.order, 1.0 / math.sqrt(a0))
        for _ in range(self._newton_steps()):
            z = z * (3.0 - self * z * z) * 0.5
        return self * z  # A * A^(-1/2)

    # -- lattice moves --

    def shift_up(self, h: tuple[int, ...]) -> Series:
        """Multiply by t^(h . g)."""
        lat = self.lattice
        if len(h) != lat.dim:
            raise ValueError(f"shift index {h} has wrong dimension for lattice {lat.generators}")
        out = {}
        for h0, c in self.coeffs.items():
            hn = tuple(a + b for a, b in zip(h0, h))
            if lat.exponent(hn) <= self.order + _EXP_TOL:
                out[hn] = c
        return self._like(out)

    def shift_down(self, h: tuple[int, ...], tol: float) -> Series:
        """Divide by t^(h . g); coefficients that would go negative must be
        below tol (they are exact-cancellation residues) or the series is not
        analytic after the shift."""
        if len(h) != self.lattice.dim:
            raise ValueError(f"shift index {h} has wrong dimension for lattice {self.lattice.generators}")
        out = {}
        bad = 0.0
        for h0, c in self.coeffs.items():
            hn = tuple(a - b for a, b in zip(h0, h))
            if any(x < 0 for x in hn):
                bad = max(bad, abs(c))
            else:
                out[hn] = c
        if bad > tol:
            raise NonAnalyticError(
                f"shift_down by {h}: residual coefficient {bad} exceeds tolerance {tol}"
            )
        return self._like(out)

    def drop_small(self, tol: float) -> Series:
        return self._like({h: c for h, c in self.coeffs.items() if abs(c) > tol})

    # -- calculus / evaluation --

    def tderivative(self) -> Series:
        """t * d/dt: multiplies each coefficient by its exponent."""
        lat = self.lattice
        return self._like({h: c * lat.exponent(h) for h, c in self.coeffs.items() if lat.exponent(h) != 0})

    def evaluate(self, t: float) -> float:
        lat = self.lattice
        return sum(c * t ** lat.exponent(h) for h, c in self.coeffs.items())

    def evaluate_derivative(self, t: float) -> float:
        lat = self.lattice
        return sum(c * lat.exponent(h) * t ** (lat.exponent(h) - 1.0) for h, c in self.coeffs.items())

    def __repr__(self):
        terms = sorted(self.coeffs.items(), key=lambda kv: self.lattice.exponent(kv[0]))
        body = " + ".join(f"{c:.6g}*t^{self.lattice.exponent(h):.4g}" for h, c in terms[:8])
        suffix = " + ..." if len(terms) > 8 else ""
        return f"<Series {body or '0'}{suffix}>"

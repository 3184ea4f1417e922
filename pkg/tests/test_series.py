import math

import numpy as np
import pytest

from g2flow.errors import NonAnalyticError, ResonanceError
from g2flow.seeds import NU0, SeriesSolution, solve_singular_ivp
from g2flow.series import ExponentLattice, Series


def make(expr, order=8.0, gens=(1.0,)):
    lat = ExponentLattice(gens)
    s = Series.constant(lat, order, 0.0)
    for h, c in expr.items():
        s = s + Series.monomial(lat, order, h, c)
    return s


class TestArithmetic:
    def test_mul_truncates(self):
        s = make({(0,): 1.0, (1,): 1.0}, order=3.0)
        cube = s * s * s
        assert cube.coeff((3,)) == 1.0
        assert cube.coeff((2,)) == 3.0
        assert (s * s * s * s).coeff((4,)) == 0.0  # beyond order

    def test_reciprocal_geometric(self):
        s = make({(0,): 1.0, (1,): -1.0}, order=10.0)
        r = s.reciprocal()
        for h in range(11):
            assert r.coeff((h,)) == pytest.approx(1.0, abs=1e-14)

    def test_sqrt_binomial(self):
        s = make({(0,): 1.0, (1,): 1.0}, order=8.0)
        root = s.sqrt()
        # sqrt(1+t) = sum binom(1/2, k) t^k
        for k in range(8):
            expect = math.prod((0.5 - i) / (i + 1) for i in range(k)) if k else 1.0
            assert root.coeff((k,)) == pytest.approx(expect, abs=1e-13)

    def test_sqrt_needs_positive_constant(self):
        with pytest.raises(NonAnalyticError):
            make({(1,): 1.0}).sqrt()

    def test_reciprocal_needs_nonzero_constant(self):
        with pytest.raises(NonAnalyticError):
            make({(1,): 1.0}).reciprocal()

    def test_shift_down_tolerates_roundoff_only(self):
        s = make({(0,): 1e-14, (2,): 3.0})
        shifted = s.shift_down((2,), tol=1e-12)
        assert shifted.coeff((0,)) == 3.0
        with pytest.raises(NonAnalyticError):
            make({(0,): 1.0, (2,): 3.0}).shift_down((2,), tol=1e-12)

    def test_two_generator_lattice(self):
        lat = ExponentLattice((3.0, NU0))
        idx = lat.indices_upto(10.0)
        exps = sorted(lat.exponent(h) for h in idx)
        assert exps[0] == 0.0
        assert all(e <= 10.0 + 1e-9 for e in exps)
        assert (1, 1) in idx  # 3 + nu0 ~ 5.52

    def test_evaluate_and_tderivative(self):
        s = make({(2,): 5.0, (3,): -1.0})
        assert s.evaluate(0.5) == pytest.approx(5 * 0.25 - 0.125)
        td = s.tderivative()
        assert td.coeff((2,)) == 10.0
        assert td.coeff((3,)) == -3.0


class TestEngine:
    def test_scalar_model_against_independent_recursion(self):
        """t y' = y - y^2 + t on the analytic branch at y0 = 1, 12 terms."""

        def phi(ys):
            y = ys[0]
            lat, order = y.lattice, y.order
            t = Series.monomial(lat, order, (1,) + (0,) * (lat.dim - 1), 1.0)
            return [y - y * y + t]

        sol = solve_singular_ivp(phi, np.array([1.0]), (1.0,), 12.0)
        # independent oracle in shifted variables y = 1 + d: t d' = -d - d^2 + t
        d = {0: 0.0}
        for h in range(1, 13):
            conv = sum(d[i] * d[h - i] for i in range(1, h))
            d[h] = ((1.0 if h == 1 else 0.0) - conv) / (h + 1)
        for h in range(1, 13):
            got = sol.coefficients.get((h,), np.zeros(1))[0]
            assert got == pytest.approx(d[h], abs=1e-15), h

    def test_fixed_point_required(self):
        def phi(ys):
            return [ys[0] + 1.0]

        from g2flow.errors import ConstraintError

        with pytest.raises(ConstraintError):
            solve_singular_ivp(phi, np.array([5.0]), (1.0,), 4.0)

    def test_resonance_error_without_repair(self):
        # t y' = 2y + t^2: exponent 2 hits the eigenvalue 2 with forcing
        def phi(ys):
            y = ys[0]
            lat, order = y.lattice, y.order
            t2 = Series.monomial(lat, order, (2,) + (0,) * (lat.dim - 1), 1.0)
            return [2 * y + t2]

        with pytest.raises(ResonanceError) as err:
            solve_singular_ivp(phi, np.array([0.0]), (1.0,), 4.0)
        assert err.value.index == (2,)

    def test_free_mode_coefficient(self):
        # t y' = y: solution u * t along the eigenvector
        def phi(ys):
            return [ys[0] * 1.0]

        sol = solve_singular_ivp(
            phi, np.array([0.0]), (1.0,), 4.0, free_modes={0: (2.5, np.array([1.0]))}
        )
        assert sol.coefficients[(1,)][0] == pytest.approx(2.5)

    def test_json_roundtrip(self):
        def phi(ys):
            y = ys[0]
            lat, order = y.lattice, y.order
            t = Series.monomial(lat, order, (1,) + (0,) * (lat.dim - 1), 1.0)
            return [y - y * y + t]

        sol = solve_singular_ivp(phi, np.array([1.0]), (1.0,), 6.0)
        back = SeriesSolution.from_json(sol.to_json())
        assert back.lattice.generators == sol.lattice.generators
        for h, c in sol.coefficients.items():
            assert np.allclose(back.coefficients[h], c)
        t = 0.07
        assert np.allclose(back.evaluate(t), sol.evaluate(t))

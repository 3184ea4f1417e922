"""Acceptance suite: every criterion runs at its stated tolerance and prints
one pass/fail line.  The heavy criteria share a module-scoped context so the
ALC verdicts of the trichotomy and shooting checks feed the asymptotics check.
"""
import pytest

from g2flow import verification as V


@pytest.fixture(scope="module")
def ctx():
    return V.VerificationContext(seed=V.RNG_SEED, quick=False)


def _run(ctx, func):
    res = ctx.run(func)
    status = "PASS" if res.passed else "FAIL"
    print(f"\n[{status}] {res.name} ({res.runtime:.2f}s): {res.measured} | expected {res.expected}")
    assert res.passed, f"{res.name}: {res.measured}"


def test_criterion_01_exponents(ctx):
    _run(ctx, V.check_exponents)


def test_criterion_02_eigenstructure(ctx):
    _run(ctx, V.check_eigenstructure)


def test_criterion_03_hamiltonian_conservation(ctx):
    _run(ctx, V.check_hamiltonian_conservation)


def test_criterion_04_cone_exactness(ctx):
    _run(ctx, V.check_cone_exactness)


def test_criterion_05_bryant_salamon_curve(ctx):
    _run(ctx, V.check_bryant_salamon_curve)


def test_criterion_06_trichotomy(ctx):
    _run(ctx, V.check_trichotomy)


def test_criterion_07_chamber_persistence(ctx):
    _run(ctx, V.check_chamber_persistence)


def test_criterion_08_critical_cross_validation(ctx):
    _run(ctx, V.check_critical_cross_validation)


def test_criterion_09_figure1(ctx):
    _run(ctx, V.check_figure1)


def test_criterion_10_alc_asymptotics(ctx):
    _run(ctx, V.check_alc_asymptotics)


def test_criterion_11_series_residual_orders(ctx):
    _run(ctx, V.check_series_residual_orders)


def test_criterion_12_scaling_equivariance(ctx):
    _run(ctx, V.check_scaling_equivariance)

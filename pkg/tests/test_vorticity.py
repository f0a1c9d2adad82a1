import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from steadywaves import vorticity as vort
from steadywaves.errors import FluxRangeError
from steadywaves.vorticity import (
    VorticitySpec,
    check_decreasing_vorticity_admissible,
    evaluate_gamma,
    gamma_integral,
)


def test_evaluate_gamma_zero():
    assert evaluate_gamma(vort.zero(), 0.3) == 0.0


def test_evaluate_gamma_constant():
    spec = vort.constant(0.5)
    for psi in (0.0, 0.1, 2.4):
        assert evaluate_gamma(spec, psi) == 0.5


def test_evaluate_gamma_affine_exact():
    spec = vort.affine(2.0, 0.1)
    assert evaluate_gamma(spec, 0.2) == pytest.approx(0.5, abs=0.0)


def test_evaluate_gamma_out_of_range_names_interval():
    spec = vort.constant(1.0).bound_to_flux(-2.0)
    with pytest.raises(FluxRangeError, match=r"\[0, 2\]"):
        evaluate_gamma(spec, 2.5)
    with pytest.raises(FluxRangeError):
        evaluate_gamma(spec, -0.1)
    assert evaluate_gamma(spec, 1.99) == 1.0


def test_monotonicity_classes():
    assert vort.zero().monotonicity_class == "irrotational"
    assert vort.constant(-0.4).monotonicity_class == "constant"
    assert vort.affine(0.5, 0.0).monotonicity_class == "increasing"
    assert vort.affine(-0.5, 0.1).monotonicity_class == "decreasing-bounded"


def test_kind_validation():
    with pytest.raises(ValueError):
        VorticitySpec("spline")
    with pytest.raises(ValueError):
        VorticitySpec("zero", gamma0=1.0)
    with pytest.raises(ValueError):
        VorticitySpec("constant", gamma0=1.0, beta=2.0)
    with pytest.raises(ValueError):
        VorticitySpec("affine", beta=0.0)


def test_gamma_integral_zero():
    gi = gamma_integral(vort.zero(), p0=-1.0)
    assert gi.value(-0.7) == 0.0
    assert gi.gamma_max == 0.0


def test_gamma_integral_constant():
    gi = gamma_integral(vort.constant(1.0), p0=-1.0)
    assert gi.value(-0.5) == pytest.approx(-0.5, abs=1e-15)
    assert gi.gamma_max == pytest.approx(0.0, abs=1e-15)


def composite_simpson(f, a, b, n=4096):
    x = np.linspace(a, b, n + 1)
    fx = f(x)
    return (b - a) / (3 * n) * (fx[0] + fx[-1] + 4 * fx[1:-1:2].sum() + 2 * fx[2:-1:2].sum())


def test_gamma_integral_affine_against_simpson():
    spec = vort.affine(1.0, 0.0)
    gi = gamma_integral(spec, p0=-1.0)
    # independent quadrature of gamma(-s) from 0 to -0.4
    expected = composite_simpson(lambda s: spec.gamma(-s), 0.0, -0.4)
    assert expected == pytest.approx(-0.08, abs=1e-12)
    assert gi.value(-0.4) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize(
    "spec",
    [vort.constant(0.7), vort.affine(1.3, -0.2), vort.affine(-0.6, 0.4)],
)
def test_gamma_integral_matches_adaptive_quadrature(spec):
    p0 = -2.0
    gi = gamma_integral(spec, p0)
    for p in (-0.3, -1.1, -1.9):
        ref, _ = quad(lambda s: spec.gamma(-s), 0.0, p)
        assert gi.value(p) == pytest.approx(ref, rel=1e-10, abs=1e-14)


def test_gamma_integral_invariants():
    p0 = -1.5
    for spec in (vort.zero(), vort.constant(-0.8), vort.affine(0.9, 0.3)):
        gi = gamma_integral(spec, p0)
        assert gi.value(0.0) == 0.0
        samples = np.linspace(p0, 0.0, 257)
        assert gi.gamma_max >= np.max(gi.value(samples)) - 1e-15
        # flux derivative of the antiderivative recovers gamma(-p)
        step = 1e-6
        inner = samples[5:-5]
        deriv = (gi.value(inner + step) - gi.value(inner - step)) / (2 * step)
        assert np.max(np.abs(deriv - spec.gamma_at_p(inner))) < 5e-9


@settings(max_examples=25, deadline=None)
@given(
    psi=st.floats(min_value=0.0, max_value=2.0),
    beta=st.floats(min_value=-3.0, max_value=3.0),
    gamma0=st.floats(min_value=-2.0, max_value=2.0),
)
def test_gamma_prime_matches_difference_quotient(psi, beta, gamma0):
    spec = vort.affine(beta, gamma0) if beta != 0.0 else vort.constant(gamma0)
    step = 1e-5
    quotient = (spec.gamma(psi + step) - spec.gamma(psi - step)) / (2 * step)
    assert quotient == pytest.approx(float(np.asarray(spec.gamma_prime(psi))), abs=1e-8)


def test_admissibility_gate():
    lam = 1.0 + np.pi**2  # unit-height bounding rectangle
    assert check_decreasing_vorticity_admissible(vort.zero(), 10.0) == "not-applicable"
    assert check_decreasing_vorticity_admissible(vort.constant(0.4), 10.0) == "not-applicable"
    assert check_decreasing_vorticity_admissible(vort.affine(-1.0, 0.0), lam) == "pass"
    assert check_decreasing_vorticity_admissible(vort.affine(-20.0, 0.0), lam) == "fail"
    with pytest.raises(ValueError):
        check_decreasing_vorticity_admissible(vort.affine(-1.0, 0.0), 0.0)

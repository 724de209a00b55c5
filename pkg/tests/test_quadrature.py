import math

import numpy as np
import pytest

from solar_planner.quadrature import gauss_legendre, integrate


def test_polynomial_exact():
    val, err = integrate(lambda x: 3 * x**2 + 1, 0.0, 2.0)
    assert val == pytest.approx(10.0, rel=1e-14)
    assert err >= 0


def test_kink_with_breakpoint():
    f = lambda x: np.abs(x - 0.3)
    val, _ = integrate(f, 0.0, 1.0, breakpoints=[0.3])
    assert val == pytest.approx(0.5 * (0.09 + 0.49), rel=1e-13)


def test_kink_without_breakpoint_still_converges():
    val, _ = integrate(lambda x: np.abs(x - 1 / math.pi), 0.0, 1.0, abs_tol=1e-11)
    exact = 0.5 * ((1 / math.pi) ** 2 + (1 - 1 / math.pi) ** 2)
    assert val == pytest.approx(exact, abs=1e-10)


def test_endpoint_singularity():
    # integrable log singularity, as in the rank integrals near u = 0
    val, _ = integrate(lambda u: -np.log(u), 0.0, 1.0, abs_tol=1e-10)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_fixed_rule_exact_to_its_degree():
    # a 20-point rule integrates polynomials up to degree 39 exactly
    assert gauss_legendre(lambda x: x**39 + x**38, -1.0, 1.0) == pytest.approx(2 / 39, rel=1e-13)

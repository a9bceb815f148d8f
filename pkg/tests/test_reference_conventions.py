"""Diagnostics: the reference tables follow from specific conventions.

Each test reproduces a tabulated number from the convention it was
evidently computed with, so the differing production values are explained
rather than silently accepted.
"""

import math

import pytest

from sitnikov.bounds import continuation_constants, envelope_constants
from sitnikov.circular import canonical_envelope_profile, find_branch_roots, xi_star
from sitnikov.stability import mu0_root

from conftest import rel

R0_REF = 6.621636


@pytest.mark.parametrize("N", [1, 3])
def test_reference_r0_is_coarse_grid_maximum_over_first_period(N):
    # grid step 0.01 in xi, envelope over [0, pi], no refinement between nodes
    r0, _, x_max = canonical_envelope_profile(N, xi_star(N), xi_step=0.01, refine=False,
                                              horizon=math.pi)
    assert r0 == pytest.approx(R0_REF, abs=1e-6)
    assert x_max == pytest.approx(1.88, abs=1e-9)


def test_refined_r0_exceeds_reference(catalog1):
    assert catalog1.r0 - R0_REF == pytest.approx(1.9776e-3, abs=1e-6)


def test_reference_constants_from_reference_r0():
    E, R, _ = envelope_constants(R0_REF, 1)
    assert rel(E, 4.684299e-10) < 1e-6
    assert R == pytest.approx(8.277124, abs=2e-6)


def test_third_order_reference_repeats_first_order_constants():
    E3, R3, _ = envelope_constants(R0_REF, 3)
    E1, R1, _ = envelope_constants(R0_REF, 1)
    # E* scales like 1/N^2 while R is N-independent to leading order, so only
    # the repeated E* in the N = 3 row is inconsistent
    assert rel(E3, E1 / 9) < 1e-3
    assert rel(R3, R1) < 1e-5


@pytest.mark.parametrize("p,tabulated", [(1, 6.2314169e-10), (2, 1.582592e-9)])
def test_tabulated_E_hat_lacks_factor_one_half(p, tabulated):
    cat = find_branch_roots(1).with_envelope(R0_REF, ())
    led = continuation_constants(cat, p)
    assert rel(led.phi1dot_circ / led.Psi, tabulated) < 1e-4
    assert rel(led.E_hat, tabulated / 2) < 1e-4


def test_tabulated_second_derivative_is_quadratic_coefficient(hill1):
    from sitnikov.stability import second_derivative_at_zero
    d2, diag = second_derivative_at_zero(hill1[1])
    c2 = diag.coefficients[0]
    assert d2 == 2 * c2
    assert rel(c2, -10.10096) < 1e-3


@pytest.mark.parametrize("d2,tabulated", [(-10.10096, 0.88995), (-0.034051, 15.328)])
def test_tabulated_mu0_drops_cubic_term(d2, tabulated):
    assert rel(math.sqrt(8 / abs(d2)), tabulated) < 1e-4
    assert rel(mu0_root(0.0, d2), tabulated) < 1e-4

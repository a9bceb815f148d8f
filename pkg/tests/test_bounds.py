import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sitnikov.bounds import (appendix_inequality_audit, b_coefficients, continuation_constants,
                             d_bound, first_root_Q, leading_order_E_star, lemma1_certify,
                             q_function, q_tilde_min, r_m, r_star, sigma, solve_E_star)
from sitnikov.circular import find_branch_roots
from sitnikov.errors import CertificationError, DomainError, LedgerError

from conftest import rel

R0_REF = 6.621636


def test_sigma():
    assert sigma(0.0) == 16.0
    assert sigma(0.5) == pytest.approx(128.0)


def test_b_coefficients_vanish_at_zero():
    assert b_coefficients(0.0, 1) == (0.0, 0.0)
    b1, b2 = b_coefficients(0.1, 1)
    assert b1 == pytest.approx(9216 * math.pi ** 2 * 0.1 / 0.9 ** 8)
    assert b2 == pytest.approx(192 * math.pi * 0.1 / 0.9 ** 5)


def test_E_star_from_reference_r0():
    E = solve_E_star(R0_REF, 1)
    assert rel(E, 4.684299e-10) < 1e-3
    assert r_m(E, 1) == pytest.approx(8.277124, abs=1e-3)


def test_E_star_leading_order():
    for N in (1, 3):
        for r0 in (R0_REF, 31.7):
            E = solve_E_star(r0, N)
            assert rel(E, leading_order_E_star(r0, N)) < 5e-3


def test_E_star_is_root():
    E = solve_E_star(R0_REF, 1)
    assert q_tilde_min(E, 1) <= -R0_REF
    assert q_tilde_min(E * (1 + 1e-10), 1) > -R0_REF


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=1e-12, max_value=0.5), st.floats(min_value=1.01, max_value=1.8))
def test_q_tilde_min_increasing(e, f):
    assert q_tilde_min(e * f, 1) > q_tilde_min(e, 1)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=1.0, max_value=20.0), st.sampled_from([1, 3]))
def test_E_star_decreases_with_r0(r0, N):
    assert solve_E_star(r0 * 1.1, N) < solve_E_star(r0, N)


def test_first_root_brackets():
    E = solve_E_star(R0_REF, 1)
    assert first_root_Q(0.0, R0_REF, 1) == R0_REF
    R1 = first_root_Q(0.5 * E, R0_REF, 1)
    assert R0_REF < R1 < r_m(E, 1)
    assert abs(q_function(0.5 * E, R1, R0_REF, 1)) < 1e-6
    with pytest.raises(LedgerError):
        first_root_Q(2 * E, R0_REF, 1)


def test_r_star_and_domain():
    assert r_star(1e-9, 1) > 0
    with pytest.raises(DomainError):
        q_tilde_min(0.0, 1)


def test_ledger_values(ledgers1):
    # frozen from the refined envelope supremum r0 = 6.6236135660
    l1, l2 = ledgers1[1], ledgers1[2]
    assert l1.E_star == pytest.approx(4.67870617521327e-10, rel=1e-8)
    assert l1.R_cal == pytest.approx(8.279597046815159, rel=1e-9)
    assert l1.phi1dot_circ == pytest.approx(2.2022781073243243, rel=1e-8)
    assert l2.phi1dot_circ == pytest.approx(5.59307642937493, rel=1e-8)
    assert l1.Psi == pytest.approx(3539404738.8008523, rel=1e-8)
    assert l1.E_hat == pytest.approx(3.1110854364602203e-10, rel=1e-8)
    assert l2.E_hat == pytest.approx(7.901154067039336e-10, rel=1e-8)
    assert l1.gamma == pytest.approx(1958965.6039020172, rel=1e-8)
    assert l2.gamma == pytest.approx(551613.0031623786, rel=1e-8)


@pytest.mark.parametrize("p", [1, 2])
def test_ledger_invariants(ledgers1, p):
    led = ledgers1[p]
    assert 0 < led.e_star <= led.E_star2 <= led.E_star
    assert led.E_hat == pytest.approx(led.phi1dot_circ / (2 * led.Psi), rel=1e-14)
    assert led.Gamma > 0
    assert led.M == pytest.approx(led.Upsilon / led.Gamma, rel=1e-14)
    assert led.G(0.0) == led.xi_p
    symbols = [e.symbol for e in led.entries]
    assert {"E*", "R", "Psi", "E_hat", "e*", "gamma"} <= set(symbols)


def test_ledger_needs_envelope(roots1):
    with pytest.raises(LedgerError):
        continuation_constants(roots1, 1)


def test_d_bound_positive():
    assert d_bound(0.01, 5.0, 1) > 0


def test_pointwise_inequality_audit_small():
    worst = appendix_inequality_audit(1, 1.999901, n_traj=8, n_t=25, seed=3)
    assert all(v <= 1.0 for v in worst.values()), worst


def test_growth_control_rejects_large_e():
    with pytest.raises(DomainError):
        lemma1_certify(1, (0.0, 2.0), 1e-6, R0_REF)


def test_growth_control_flags_too_small_r0():
    # with r0 far below the true envelope the measured R_e exceeds R_{1,e}
    with pytest.raises(CertificationError):
        lemma1_certify(1, (0.0, 1.999901), 0.0, 3.0, n_e=1, n_xi=11)

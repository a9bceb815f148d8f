import csv
import math

import numpy as np
import pytest

from sitnikov import continuation as cont
from sitnikov.continuation import (BRANCH_COLUMNS, Termination, continuation_rhs,
                                   continue_between, half_period_monodromy, lemma3_deviation,
                                   solve_on_branch, trace_branch, trace_branch_negative,
                                   verify_theorem1)
from sitnikov.dynamics import OrbitConfig, end_state, flow
from sitnikov.errors import DomainError, NearFoldError, TheoremAuditError


@pytest.fixture(scope="module")
def branches(roots1):
    return {p: trace_branch(roots1, p, 0.3, step=1e-2) for p in (1, 2)}


def test_branches_reach_target(branches):
    for br in branches.values():
        assert br.termination_reason is Termination.reached_e_max
        assert br.points[-1].e == 0.3
        assert max(abs(pt.F_residual) for pt in br.points) <= 1e-10


def test_branch_starts_on_catalog(branches, roots1):
    for p, br in branches.items():
        assert br.points[0].e == 0.0
        assert br.points[0].xi == pytest.approx(roots1.xi(p), abs=1e-12)


def test_branches_monotone_decreasing(branches):
    # frozen: both families lose amplitude as e grows on [0, 0.3]
    for br in branches.values():
        assert np.all(np.diff(br.xi) < 0)
    assert branches[1].points[-1].xi == pytest.approx(0.7835201318313, abs=1e-9)
    assert branches[2].points[-1].xi == pytest.approx(0.3506130276136, abs=1e-9)


def test_branch_points_are_periodic(branches):
    pt = branches[1].points[10]
    tr = flow(pt.xi, pt.e, 2 * math.pi, OrbitConfig(N=1))
    assert tr.z[-1] == pytest.approx(pt.xi, abs=1e-9)
    assert abs(tr.z_dot[-1]) < 1e-9


def test_slope_matches_difference_quotient(branches):
    pts = branches[1].points
    i = 15
    fd = (pts[i + 1].xi - pts[i - 1].xi) / (pts[i + 1].e - pts[i - 1].e)
    assert pts[i].slope == pytest.approx(fd, rel=1e-3)
    assert continuation_rhs(pts[i].e, pts[i].xi, 1) == pytest.approx(pts[i].slope, rel=1e-8)


def test_half_period_monodromy_matches_full(branches):
    pt = branches[1].points[20]
    y = end_state(pt.xi, pt.e, 2 * math.pi, OrbitConfig(N=1))
    assert y[2] + y[5] == pytest.approx(pt.trace, abs=1e-9)
    # det equals the squared Wronskian of the half-period data
    M = half_period_monodromy(1.3, -0.2, 0.4, 0.7)
    assert np.linalg.det(M) == pytest.approx((1.3 * 0.7 + 0.2 * 0.4) ** 2, rel=1e-14)


def test_multipliers_consistent_with_trace(branches):
    for br in branches.values():
        for pt in br.points[1:]:
            r1, r2 = pt.multipliers
            if pt.classification == "elliptic":
                assert abs(abs(r1) - 1) < 1e-8 and abs(r1.imag) > 0
                assert r2 == pytest.approx(r1.conjugate(), abs=1e-8)
            assert (r1 + r2).real == pytest.approx(pt.trace, abs=1e-10)


def test_reversibility(branches):
    pt = branches[1].points[-1]
    pts, reason = continue_between(1, pt.xi, pt.e, 0.0, step=1e-2, with_sup=False)
    assert reason is Termination.reached_e_max
    assert pts[-1].xi == pytest.approx(branches[1].points[0].xi, abs=1e-8)


def test_negative_branch(roots1):
    br = trace_branch_negative(roots1, 1, -0.05, step=1e-2)
    assert br.points[0].e == -0.05 and br.points[-1].e == 0.0
    assert np.all(np.diff(br.e) > 0)
    with pytest.raises(DomainError):
        trace_branch_negative(roots1, 1, -0.7)


def test_negative_branch_needs_odd_n():
    from sitnikov.circular import find_branch_roots
    with pytest.raises(DomainError):
        trace_branch_negative(find_branch_roots(2, verify=False), 1, -0.05)


@pytest.mark.parametrize("p", [1, 2])
def test_reflection_relation(roots1, p):
    dev, init = lemma3_deviation(roots1, p, 0.1)
    assert dev <= 1e-8
    assert init <= 1e-8


def test_solve_on_branch_matches_trace(branches, roots1):
    pt = branches[2].points[5]
    assert solve_on_branch(roots1, 2, pt.e) == pytest.approx(pt.xi, abs=1e-11)


def test_near_fold_guard(monkeypatch):
    monkeypatch.setattr(cont, "end_state", lambda *a, **k: np.array([0, 0, 0, 1e-9, 0, 0, 0, 1.0]))
    with pytest.raises(NearFoldError):
        continuation_rhs(0.1, 1.0, 1)


def test_fold_terminates_tracing(monkeypatch, roots1):
    real = cont.end_state

    def fake(xi, e, t, cfg):
        y = real(xi, e, t, cfg)
        if e > 0.02:
            y[3] = 1e-12
        return y

    monkeypatch.setattr(cont, "end_state", fake)
    br = trace_branch(roots1, 1, 0.05, step=1e-2, with_sup=False)
    assert br.termination_reason is Termination.fold_detected
    assert br.points[-1].e <= 0.02


def test_domain_checks(roots1):
    with pytest.raises(DomainError):
        trace_branch(roots1, 1, 1.2)
    with pytest.raises(DomainError):
        continue_between(1, 1.0, 0.0, 0.1, step=0.0)


def test_branch_csv(branches, tmp_path):
    path = tmp_path / "b.csv"
    branches[1].to_csv(path)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == BRANCH_COLUMNS
    assert len(rows) == len(branches[1].points) + 1
    assert rows[-1][-1] == "elliptic"
    branches[1].to_csv(path, classify=False)
    assert list(csv.reader(open(path)))[-1][-1] == "suppressed"


@pytest.mark.parametrize("p", [1, 2])
def test_amplitude_bound_audit(roots1, ledgers1, p):
    br = trace_branch(roots1, p, ledgers1[p].e_star, step=ledgers1[p].e_star)
    audit = verify_theorem1(br, ledgers1[p])
    assert audit.min_margin >= -1e-12 * ledgers1[p].xi_p
    assert len(audit.rows) >= 5


def test_amplitude_audit_detects_violation(roots1, ledgers1):
    import dataclasses
    led = dataclasses.replace(ledgers1[1], gamma=-1e9)
    br = trace_branch(roots1, 1, ledgers1[1].e_star, step=ledgers1[1].e_star)
    with pytest.raises(TheoremAuditError):
        verify_theorem1(br, led)

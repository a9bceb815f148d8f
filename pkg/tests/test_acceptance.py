"""Acceptance criteria; each test logs one PASS/FAIL line shown in the summary."""

import math
import time

import numpy as np
import pytest

from sitnikov.bounds import (appendix_inequality_audit,
                             envelope_constants, leading_order_E_star, lemma1_certify)
from sitnikov.circular import build_catalog, canonical_envelope_profile, envelope
from sitnikov.continuation import Termination, lemma3_deviation, trace_branch, verify_theorem1
from sitnikov.dynamics import OrbitConfig, canonical_solutions
from sitnikov.kepler import eccentric_anomaly_array, radius_array
from sitnikov.stability import (HillContext, discriminant, discriminant_derivative_at_zero,
                                stability_report)

from conftest import SQRT8, rel


def check(name, value, target, tol, kind="rel"):
    err = abs(value - target) if kind == "abs" else rel(value, target)
    ok = err <= tol
    return ok, f"{name}={value:.8g} (ref {target:.8g}, {kind} err {err:.2e} <= {tol:g}: {'ok' if ok else 'NO'})"


def record(log, number, title, results):
    ok = all(r[0] for r in results)
    detail = "; ".join(r[1] for r in results)
    log.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number} {title}: {detail}")
    return ok


def test_criterion_1_first_order_quantification(acceptance_log):
    t0 = time.perf_counter()
    cat = build_catalog(1)
    E_star, R_cal, _ = envelope_constants(cat.r0, 1)
    elapsed = time.perf_counter() - t0
    results = [
        check("xi*", cat.xi_star, 1.999901, 1e-4, "abs"),
        check("r0", cat.r0, 6.621636, 1e-3, "abs"),
        check("R", R_cal, 8.277124, 1e-3, "abs"),
        check("E*", E_star, 4.684299e-10, 1e-3),
        (elapsed < 120, f"runtime {elapsed:.1f}s < 120s"),
    ]
    assert record(acceptance_log, 1, "N=1 quantification", results)


def test_criterion_2_third_order_quantification(acceptance_log):
    cat = build_catalog(3, grid=200)
    E_star, R_cal, _ = envelope_constants(cat.r0, 3)
    results = [
        check("xi*", cat.xi_star, 4.160101, 1e-3, "abs"),
        check("r0", cat.r0, 6.621636, 1e-2, "abs"),
        (True, f"reported, not compared: R={R_cal:.6g}, E*={E_star:.6g} "
               f"(reference row repeats the N=1 values 8.277124, 4.684299e-10)"),
    ]
    assert record(acceptance_log, 2, "N=3 quantification", results)


@pytest.fixture(scope="module")
def reports(catalog1, ledgers1, roots1):
    return {p: stability_report(HillContext(roots1, p), ledgers1[p].e_star) for p in (1, 2)}


def test_criterion_3_stability_quantification(acceptance_log, ledgers1, reports):
    r1, r2 = reports[1], reports[2]
    d2_unc = abs(r2.Delta2_0 - 2 * r2.diagnostics["c2_half"])
    sign_ok = r2.Delta2_0 < 0 and abs(r2.Delta2_0) > d2_unc and r2.diagnostics["fit_resolved"]
    results = [
        check("E_hat(1)", ledgers1[1].E_hat, 6.2314169e-10, 2e-2),
        check("E_hat(2)", ledgers1[2].E_hat, 1.582592e-9, 2e-2),
        check("Delta''(0)(1)", r1.Delta2_0, -10.10096, 1e-2),
        (sign_ok, f"sign Delta''(0)(2)={r2.Delta2_0:.3e} +- {d2_unc:.1e} "
                  f"({'negative' if sign_ok else 'not resolved'})"),
        check("mu0(1)", r1.mu0 if r1.mu0 is not None else math.nan, 0.88995, 2e-2),
        check("mu0(2)", r2.mu0 if r2.mu0 is not None else math.nan, 15.328, 2e-2),
        (r1.classification == "elliptic", f"class(1)={r1.classification}"),
        (r2.classification == "elliptic", f"class(2)={r2.classification}"),
    ]
    assert record(acceptance_log, 3, "N=1 stability quantification", results)


def test_criterion_4_envelope_anchor(acceptance_log):
    v = envelope(0.0, OrbitConfig(N=1))
    results = [check("R0(0)", v, SQRT8, 1e-6, "abs")]
    assert record(acceptance_log, 4, "envelope anchor", results)


def test_criterion_5_leading_order(acceptance_log, catalog1):
    E_star = envelope_constants(catalog1.r0, 1)[0]
    lead = leading_order_E_star(catalog1.r0, 1)
    results = [check("E*/leading", E_star, lead, 5e-3)]
    assert record(acceptance_log, 5, "leading-order E*", results)


def test_criterion_6_property_suite(acceptance_log, catalog1, ledgers1, roots1, roots3):
    results = []
    # Kepler residual and distance bounds
    t = np.linspace(-4 * math.pi, 4 * math.pi, 801)
    worst, bounds_ok = 0.0, True
    for e in np.linspace(0.0, 0.99, 34):
        u = eccentric_anomaly_array(t, e)
        worst = max(worst, float(np.max(np.abs(u - e * np.sin(u) - t))))
        r = radius_array(t, e)[0]
        bounds_ok &= bool(np.all(r >= (1 - e) / 2 - 1e-15) and np.all(r <= (1 + e) / 2 + 1e-15))
    results.append((worst <= 1e-13 and bounds_ok, f"kepler residual {worst:.1e}"))
    # Wronskian of canonical pairs
    cfg = OrbitConfig(N=1)
    w = 0.0
    for xi in (0.0, 0.45, 1.04, 1.9):
        for e in (0.0, 0.2, 0.5):
            pair = canonical_solutions(xi, e, math.pi, cfg)
            w = max(w, float(np.max(np.abs(pair.wronskian() - 1))))
    results.append((w <= 1e-9, f"wronskian dev {w:.1e}"))
    # pointwise inequalities at 40 x 25 = 1000 random samples
    audit = appendix_inequality_audit(1, catalog1.xi_star, n_traj=40, n_t=25)
    results.append((max(audit.values()) <= 1.0, f"inequality ratio {max(audit.values()):.3f}"))
    # growth control on [0, E*]
    _, _, x_max = canonical_envelope_profile(1, catalog1.xi_star, cfg=cfg)
    cert = lemma1_certify(1, (0.0, catalog1.xi_star), ledgers1[1].E_star, catalog1.r0, cfg,
                          extra_xi=(*roots1.xi_p, x_max), raise_on_failure=False)
    results.append((cert.passed, f"growth control {len(cert.samples)} e-samples"))
    # amplitude bound on the certified interval
    margins = []
    for p in (1, 2):
        led = ledgers1[p]
        br = trace_branch(roots1, p, led.e_star, step=led.e_star, ledger=led)
        margins.append(verify_theorem1(br, led).min_margin)
    results.append((min(margins) >= -1e-12, f"amplitude margin {min(margins):.1e}"))
    # discriminant at zero and evenness, N = 1 and N = 3
    d0 = d1 = ev = 0.0
    for cat in (roots1, roots3):
        for p in range(1, cat.nu + 1):
            ctx = HillContext(cat, p)
            d0 = max(d0, abs(discriminant(ctx, 0.0) - 2))
            d1 = max(d1, abs(discriminant_derivative_at_zero(ctx)))
            for e in (0.05, 0.1):
                ev = max(ev, abs(discriminant(ctx, e) - discriminant(ctx, -e)))
    results.append((d0 <= 1e-8 and d1 <= 1e-6 and ev <= 1e-7,
                    f"|Delta(0)-2| {d0:.1e}, |Delta'(0)| {d1:.1e}, evenness {ev:.1e}"))
    # reflection of the families at e = 0.1
    dev = max(max(lemma3_deviation(roots1, p, 0.1)) for p in (1, 2))
    results.append((dev <= 1e-8, f"reflection dev {dev:.1e}"))
    assert record(acceptance_log, 6, "property suite", results)


def test_criterion_7_branch_extension(acceptance_log, roots1):
    t0 = time.perf_counter()
    results = []
    for p in (1, 2):
        br = trace_branch(roots1, p, 0.3, step=1e-3, with_sup=False)
        ok = br.termination_reason is Termination.reached_e_max and br.points[-1].e > 0.25
        results.append((ok, f"p={p} reached e={br.points[-1].e:.3g} ({br.termination_reason.value})"))
    elapsed = time.perf_counter() - t0
    results.append((elapsed < 300, f"runtime {elapsed:.1f}s < 300s"))
    assert record(acceptance_log, 7, "branch extension", results)

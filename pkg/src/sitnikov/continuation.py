"""Natural-parameter continuation of the even periodic families in ``e``."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundsLedger
from .circular import CircularCatalog
from .dynamics import OrbitConfig, end_state, flow, refined_abs_max
from .errors import DomainError, IntegrationError, NearFoldError, TheoremAuditError
from .kepler import LAPLACE_LIMIT

FOLD_THRESHOLD = 1e-8
F_TOL = 1e-10
MAX_NEWTON = 8
PARABOLIC_BAND = 1e-9

BRANCH_COLUMNS = ("e", "xi", "z_sup", "F_residual", "Re_rho1", "Im_rho1", "classification")


class Termination(str, enum.Enum):
    reached_e_max = "reached_e_max"
    fold_detected = "fold_detected"
    residual_failure = "residual_failure"


def half_period_monodromy(y1, y1d, y2, y2d):
    """Monodromy over ``2 N pi`` from the canonical pair at ``N pi``.

    Valid for an even coefficient, which holds along even periodic orbits.
    """
    tr = y1 * y2d + y2 * y1d
    return np.array([[tr, 2.0 * y2 * y2d], [2.0 * y1 * y1d, tr]])


def classify_trace(trace, band=PARABOLIC_BAND):
    if abs(trace) < 2.0 - band:
        return "elliptic"
    if abs(trace) > 2.0 + band:
        return "hyperbolic"
    return "parabolic"


@dataclass(frozen=True)
class BranchPoint:
    e: float
    xi: float
    F_residual: float
    dF_dxi: float
    dF_de: float
    z_sup: float
    multipliers: tuple
    trace: float
    z_half: float = float("nan")

    @property
    def slope(self):
        return -self.dF_de / self.dF_dxi

    @property
    def classification(self):
        return classify_trace(self.trace)


@dataclass(frozen=True)
class Branch:
    N: int
    p: int
    points: tuple
    termination_reason: Termination
    e_star_certified: float | None = None

    @property
    def e(self):
        return np.array([pt.e for pt in self.points])

    @property
    def xi(self):
        return np.array([pt.xi for pt in self.points])

    def to_csv(self, path, classify=True):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(BRANCH_COLUMNS)
            for pt in self.points:
                rho = pt.multipliers[0]
                label = pt.classification if classify else "suppressed"
                w.writerow([f"{pt.e:.8e}", f"{pt.xi:.8e}", f"{pt.z_sup:.8e}",
                            f"{pt.F_residual:.8e}", f"{rho.real:.8e}", f"{rho.imag:.8e}",
                            label])


def _check_e(e, N):
    if e < 0 and (N % 2 == 0 or -e >= LAPLACE_LIMIT):
        raise DomainError(f"e={e!r} not available for N={N}")
    if e >= 1.0:
        raise DomainError(f"e={e!r} must be below 1")


def continuation_rhs(e: float, xi: float, N: int, cfg: OrbitConfig | None = None) -> float:
    """Slope ``h(e, xi) = -dF/de / dF/dxi`` of the continuation equation."""
    cfg = (cfg or OrbitConfig(N=N)).with_N(N)
    _check_e(e, N)
    y = end_state(xi, e, N * math.pi, cfg)
    if abs(y[3]) < FOLD_THRESHOLD:
        raise NearFoldError(e, xi, y[3])
    return -y[7] / y[3]


def correct(xi: float, e: float, cfg: OrbitConfig, tol=F_TOL, max_iter=MAX_NEWTON):
    """Newton iteration on ``xi -> F_N(xi, e)`` with the integrated ``dF/dxi``.

    Returns ``(xi, state)`` with ``state`` the augmented vector at ``N pi``.
    Iterates past ``tol`` while the update keeps shrinking, so the returned
    root is as accurate as the integration allows.
    """
    T = cfg.half_period
    y = end_state(xi, e, T, cfg)
    for it in range(max_iter + 1):
        F, dF = y[1], y[3]
        if abs(dF) < FOLD_THRESHOLD:
            raise NearFoldError(e, xi, dF)
        if abs(F) <= tol:
            # one polishing step; keep it only if it helps
            xi_p = xi - F / dF
            y_p = end_state(xi_p, e, T, cfg)
            if abs(y_p[1]) < abs(F):
                return xi_p, y_p
            return xi, y
        if it == max_iter:
            break
        xi = xi - F / dF
        y = end_state(xi, e, T, cfg)
    raise _NoConvergence(e, xi, y[1])


class _NoConvergence(Exception):
    def __init__(self, e, xi, F):
        super().__init__(f"corrector failed at e={e}, xi={xi}, |F|={abs(F):.3e}")
        self.e, self.xi, self.F = e, xi, F


def make_point(xi: float, e: float, cfg: OrbitConfig, state=None, with_sup=True) -> BranchPoint:
    """Branch point with amplitude and Floquet data at a corrected ``(xi, e)``."""
    T = cfg.half_period
    if with_sup:
        tr = flow(xi, e, T, cfg)
        y = np.array([tr.z[-1], tr.z_dot[-1], tr.dz_dxi[-1], tr.dz_dot_dxi[-1],
                      tr.phi2[-1], tr.phi2_dot[-1], tr.dz_de[-1], tr.dz_dot_de[-1]])
        z_sup = refined_abs_max(tr.times, tr.z, lambda t: tr.dense(t)[0])
    else:
        y = state if state is not None else end_state(xi, e, T, cfg)
        z_sup = float("nan")
    M = half_period_monodromy(y[2], y[3], y[4], y[5])
    rho = np.linalg.eigvals(M)
    rho = tuple(sorted((complex(r) for r in rho), key=lambda c: (-c.imag, -c.real)))
    return BranchPoint(e=e, xi=xi, F_residual=float(y[1]), dF_dxi=float(y[3]),
                       dF_de=float(y[7]), z_sup=z_sup, multipliers=rho,
                       trace=float(np.trace(M)), z_half=float(y[0]))


def continue_between(N, xi0, e0, e1, cfg: OrbitConfig | None = None, step=1e-3,
                     min_step=1e-7, with_sup=True, start_slope=None):
    """Predictor-corrector from ``(xi0, e0)`` (already on the branch) to ``e1``.

    Returns ``(points, termination)``; the first point is the start.
    """
    cfg = (cfg or OrbitConfig(N=N)).with_N(N)
    _check_e(e1, N)
    if step <= 0:
        raise DomainError(f"step must be positive, got {step!r}")
    xi, y0 = correct(xi0, e0, cfg)
    pt = make_point(xi, e0, cfg, state=y0, with_sup=with_sup)
    points = [pt]
    direction = 1.0 if e1 >= e0 else -1.0
    e, h = e0, step
    slope = pt.slope if start_slope is None else start_slope
    reason = Termination.reached_e_max
    while direction * (e1 - e) > 1e-15:
        de = direction * min(h, abs(e1 - e))
        e_new = e + de
        if abs(e1 - e_new) < 1e-12 * max(1.0, abs(e1)):
            e_new = e1
        try:
            xi_new, y_new = correct(xi + slope * de, e_new, cfg)
        except (NearFoldError, _NoConvergence, IntegrationError) as exc:
            h *= 0.5
            if h < min_step:
                reason = (Termination.fold_detected if isinstance(exc, NearFoldError)
                          else Termination.residual_failure)
                break
            continue
        pt = make_point(xi_new, e_new, cfg, state=y_new, with_sup=with_sup)
        points.append(pt)
        xi, e, slope = xi_new, e_new, pt.slope
        if h < step:
            h = min(step, 2.0 * h)
    return points, reason


def trace_branch(catalog: CircularCatalog, p: int, e_max: float, step: float = 1e-3,
                 cfg: OrbitConfig | None = None, with_sup=True, ledger: BoundsLedger | None = None) -> Branch:
    """Follow branch ``p`` from ``(xi_p, 0)`` to ``e_max``."""
    if not 0.0 <= e_max < 1.0:
        raise DomainError(f"e_max must lie in [0, 1), got {e_max!r}")
    pts, reason = continue_between(catalog.N, catalog.xi(p), 0.0, e_max, cfg, step,
                                   with_sup=with_sup)
    return Branch(N=catalog.N, p=p, points=tuple(pts), termination_reason=reason,
                  e_star_certified=None if ledger is None else ledger.e_star)


def trace_branch_negative(catalog: CircularCatalog, p: int, e_min: float, step: float = 1e-3,
                          cfg: OrbitConfig | None = None, with_sup=True) -> Branch:
    """Follow branch ``p`` into negative eccentricities (odd ``N`` only).

    Points are returned ordered by increasing ``e``, ending at ``e = 0``.
    """
    if catalog.N % 2 == 0:
        raise DomainError("negative eccentricities require odd N")
    if not -LAPLACE_LIMIT < e_min <= 0.0:
        raise DomainError(f"e_min must lie in (-{LAPLACE_LIMIT}, 0], got {e_min!r}")
    pts, reason = continue_between(catalog.N, catalog.xi(p), 0.0, e_min, cfg, step,
                                   with_sup=with_sup)
    return Branch(N=catalog.N, p=p, points=tuple(reversed(pts)), termination_reason=reason)


def solve_on_branch(catalog: CircularCatalog, p: int, e: float, cfg: OrbitConfig | None = None,
                    step: float = 5e-3) -> float:
    """``H(e)`` for branch ``p``; continues from ``xi_p`` when ``|e|`` is large."""
    N = catalog.N
    cfg = (cfg or OrbitConfig(N=N)).with_N(N)
    pts, reason = continue_between(N, catalog.xi(p), 0.0, e, cfg, step, with_sup=False)
    if reason is not Termination.reached_e_max or pts[-1].e != e:
        raise NearFoldError(e, pts[-1].xi, pts[-1].dF_dxi)
    return pts[-1].xi


def lemma3_deviation(catalog: CircularCatalog, p: int, e: float, cfg: OrbitConfig | None = None,
                     n=2001):
    """Deviations in ``Z_{-e}(t) = (-1)^p Z_e(t + N pi)`` and in the initial data.

    Returns ``(max_t |Z_{-e}(t) - (-1)^p Z_e(t + N pi)|, |H(-e) - (-1)^p Z_e(N pi)|)``.
    """
    N = catalog.N
    cfg = (cfg or OrbitConfig(N=N)).with_N(N)
    e = abs(e)
    xp, xm = solve_on_branch(catalog, p, e, cfg), solve_on_branch(catalog, p, -e, cfg)
    T = N * math.pi
    plus = flow(xp, e, 2 * T, cfg)
    minus = flow(xm, -e, T, cfg)
    t = np.linspace(0.0, T, n)
    sign = (-1) ** p
    dev = np.max(np.abs(minus.dense(t)[0] - sign * plus.dense(t + T)[0]))
    init = abs(xm - sign * float(plus.dense(T)[0]))
    return float(dev), float(init)


@dataclass(frozen=True)
class TheoremAudit:
    N: int
    p: int
    e_star: float
    gamma: float
    rows: tuple = field(default=())

    @property
    def min_margin(self):
        return min(r[3] for r in self.rows)


def verify_theorem1(branch: Branch, ledger: BoundsLedger, cfg: OrbitConfig | None = None,
                    fractions=(0.0, 0.25, 0.5, 0.75, 0.999999)) -> TheoremAudit:
    """Check ``max |Z_e| <= xi_p + gamma e`` for ``0 <= e <= e*``.

    Branch points inside the certified interval are audited together with
    fresh points at the given fractions of ``e*``.
    """
    if (branch.N, branch.p) != (ledger.N, ledger.p):
        raise DomainError("branch and ledger refer to different (N, p)")
    N = branch.N
    cfg = (cfg or OrbitConfig(N=N)).with_N(N)
    rows = []
    start = branch.points[0] if branch.points[0].e == 0.0 else None
    slope = start.slope if start is not None else 0.0
    xi_p = ledger.xi_p
    for fr in fractions:
        e = fr * ledger.e_star
        xi, y = correct(xi_p + slope * e, e, cfg)
        pt = make_point(xi, e, cfg, state=y)
        rows.append(pt)
    rows.extend(pt for pt in branch.points if 0.0 <= pt.e <= ledger.e_star)
    out = []
    for pt in sorted(rows, key=lambda q: q.e):
        bound = ledger.G(pt.e)
        margin = bound - pt.z_sup
        out.append((pt.e, pt.z_sup, bound, margin))
        # e = 0 is attained with equality; allow rounding there
        if margin < -1e-12 * xi_p:
            raise TheoremAuditError(
                f"|Z_e| = {pt.z_sup!r} exceeds bound {bound!r} at e={pt.e!r}")
    return TheoremAudit(N=N, p=branch.p, e_star=ledger.e_star, gamma=ledger.gamma,
                        rows=tuple(out))

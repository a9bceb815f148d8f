"""Linear stability of the even families through the Floquet discriminant.

The variational equation along the branch ``Z_e`` is the Hill equation
``y'' + q(t, e) y = 0`` with ``q = (r^2 - 2 Z^2) / (Z^2 + r^2)^{5/2}``; its
discriminant ``Delta(e)`` is the trace of the monodromy over ``2 N pi``.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .circular import CircularCatalog
from .continuation import Termination, continue_between, correct
from .dynamics import OrbitConfig, end_state, flow
from .errors import DomainError, StabilityError
from .kepler import LAPLACE_LIMIT, shifted_radius_array

STENCIL_POINTS = 13
DEFAULT_H = 0.02
INCONCLUSIVE_THRESHOLD = 1e-4
MU0_TOL = 1e-10
K_FLOOR = 1.0
K_SAFETY = 1.5


class HillContext:
    """Branch ``p`` of a catalog together with a cache of ``e -> H(e)``."""

    def __init__(self, catalog: CircularCatalog, p: int, cfg: OrbitConfig | None = None,
                 step: float = 5e-3):
        self.catalog = catalog
        self.N = catalog.N
        self.p = p
        self.cfg = (cfg or OrbitConfig(N=self.N)).with_N(self.N)
        self.step = step
        xi0, _ = correct(catalog.xi(p), 0.0, self.cfg)
        self._es = [0.0]
        self._xs = [xi0]
        self._traj = {}

    @property
    def xi_p(self):
        return self._xs[self._es.index(0.0)]

    def _check(self, e):
        if e < 0.0 and (self.N % 2 == 0 or -e >= LAPLACE_LIMIT):
            raise DomainError(f"e={e!r} outside the branch domain for N={self.N}")
        if e >= 1.0:
            raise DomainError(f"e={e!r} must be below 1")

    def xi_at(self, e: float) -> float:
        """``H(e)``: initial amplitude of the branch at eccentricity ``e``."""
        e = float(e)
        self._check(e)
        i = bisect.bisect_left(self._es, e)
        if i < len(self._es) and self._es[i] == e:
            return self._xs[i]
        # nearest cached point on the same side of zero
        cands = [j for j in (i - 1, i) if 0 <= j < len(self._es)
                 and self._es[j] * e >= 0.0]
        j = min(cands, key=lambda k: abs(self._es[k] - e))
        pts, reason = continue_between(self.N, self._xs[j], self._es[j], e, self.cfg,
                                       step=self.step, with_sup=False)
        if reason is not Termination.reached_e_max or pts[-1].e != e:
            raise StabilityError(f"branch p={self.p} could not be continued to e={e!r} "
                                 f"({reason.value})")
        for pt in pts[1:]:
            k = bisect.bisect_left(self._es, pt.e)
            if k < len(self._es) and self._es[k] == pt.e:
                continue
            self._es.insert(k, pt.e)
            self._xs.insert(k, pt.xi)
        return pts[-1].xi

    def trajectory(self, e: float, t_end: float | None = None):
        """Dense trajectory ``Z_e`` with sensitivities on ``[0, t_end]``."""
        T = 2 * self.N * math.pi if t_end is None else t_end
        key = (float(e), float(T))
        if key not in self._traj:
            self._traj[key] = flow(self.xi_at(e), e, T, self.cfg)
        return self._traj[key]

    def q(self, t, e: float):
        """Hill coefficient ``q(t, e)`` on the branch, for ``t`` of either sign.

        The trajectory is sampled at ``|t|`` (``Z_e`` is even); the distance is
        evaluated at ``t`` itself.
        """
        t = np.asarray(t, dtype=float)
        T = float(np.max(np.abs(t))) if t.size else 0.0
        T = max(T, 2 * self.N * math.pi)
        tr = self.trajectory(e, T)
        z = tr.dense(np.abs(t))[0]
        r = shifted_radius_array(t, e, self.N)[0]
        s = z * z + r * r
        return (r * r - 2.0 * z * z) / s ** 2.5


def monodromy(ctx: HillContext, e: float) -> np.ndarray:
    """Monodromy ``[[y1, y2], [y1', y2']]`` of the Hill equation over ``2 N pi``."""
    y = end_state(ctx.xi_at(e), e, 2 * ctx.N * math.pi, ctx.cfg)
    M = np.array([[y[2], y[4]], [y[3], y[5]]])
    det = float(np.linalg.det(M))
    if abs(det - 1.0) > 1e-8:
        raise StabilityError(f"monodromy determinant {det!r} differs from 1 at e={e!r}")
    return M


def discriminant(ctx: HillContext, e: float) -> float:
    """``Delta(e) = y1(2 N pi) + y2'(2 N pi)``."""
    return float(np.trace(monodromy(ctx, e)))


def floquet_multipliers(ctx: HillContext, e: float):
    return tuple(complex(x) for x in np.linalg.eigvals(monodromy(ctx, e)))


def clenshaw_curtis_weights(n: int, length: float) -> np.ndarray:
    """Weights for the Chebyshev-Lobatto nodes of :func:`chebyshev_times`."""
    if n < 3:
        raise DomainError("Clenshaw-Curtis needs at least 3 nodes")
    M = n - 1
    k = np.arange(n)
    w = np.ones(n)
    for j in range(1, M // 2 + 1):
        b = 1.0 if 2 * j == M else 2.0
        w -= b * np.cos(2.0 * j * math.pi * k / M) / (4.0 * j * j - 1.0)
    c = np.full(n, 2.0)
    c[0] = c[-1] = 1.0
    return 0.5 * length * c * w / M


def branch_slope_at_zero(ctx: HillContext) -> float:
    """``H'(0) = -dF/de / dF/dxi`` at ``(xi_p, 0)``."""
    y = end_state(ctx.xi_p, 0.0, ctx.N * math.pi, ctx.cfg)
    return -y[7] / y[3]


def de_q_at_zero(ctx: HillContext):
    """``(times, d_e q(s, 0), trajectory)`` along the circular solution.

    ``dZ/de = phi1 H'(0) + beta`` and ``dr/de = -cos(s)/2``.
    """
    tr = ctx.trajectory(0.0)
    slope = branch_slope_at_zero(ctx)
    z = tr.z
    dz = tr.dz_dxi * slope + tr.dz_de
    r = 0.5
    dr = -0.5 * np.cos(tr.times)
    s = z * z + r * r
    # q = (r^2 - 2 z^2) s^{-5/2}
    dq_dz = (-4.0 * z * s - 5.0 * z * (r * r - 2.0 * z * z)) / s ** 3.5
    dq_dr = (2.0 * r * s - 5.0 * r * (r * r - 2.0 * z * z)) / s ** 3.5
    return tr.times, dq_dz * dz + dq_dr * dr, tr


def discriminant_derivative_at_zero(ctx: HillContext) -> float:
    """``Delta'(0) = y1'(2 N pi, 0) * int_0^{2 N pi} y2(s, 0)^2 d_e q(s, 0) ds``.

    Computed by Clenshaw-Curtis quadrature on the Chebyshev sample grid;
    evenness of the discriminant (odd ``N``) makes the result vanish.
    """
    t, dq, tr = de_q_at_zero(ctx)
    w = clenshaw_curtis_weights(t.size, float(t[-1]))
    integral = float(np.dot(w, tr.phi2 ** 2 * dq))
    return float(tr.dz_dot_dxi[-1]) * integral


def stencil(h: float, n: int = STENCIL_POINTS, symmetric=True):
    m = (n - 1) // 2
    k = np.arange(-m, m + 1) if symmetric else np.arange(0, n)
    return k * h / m


@dataclass(frozen=True)
class FitDiagnostics:
    h: float
    coefficients: tuple
    residual: float
    odd_coefficients: tuple
    c2_half: float
    richardson_rel: float
    samples: tuple = field(repr=False)


def _even_fit(es, ys):
    A = np.stack([es ** 2, es ** 4, es ** 6], axis=1)
    c, *_ = np.linalg.lstsq(A, ys, rcond=None)
    return c, float(np.max(np.abs(A @ c - ys)))


def _full_fit(es, ys):
    A = np.stack([es ** k for k in range(1, 7)], axis=1)
    c, *_ = np.linalg.lstsq(A, ys, rcond=None)
    return c


def delta_samples(ctx: HillContext, es, executor=None):
    es = [float(x) for x in es]
    for e in sorted(es, key=abs):
        ctx.xi_at(e)
    if executor is not None:
        xs = [ctx.xi_at(e) for e in es]
        return np.asarray(list(executor.map(_TraceFn(ctx.cfg), xs, es)))
    return np.asarray([discriminant(ctx, e) for e in es])


class _TraceFn:
    def __init__(self, cfg):
        self.cfg = cfg

    def __call__(self, xi, e):
        y = end_state(xi, e, 2 * self.cfg.N * math.pi, self.cfg)
        return y[2] + y[5]


def second_derivative_at_zero(ctx: HillContext, h: float = DEFAULT_H, executor=None,
                              check_residual=True):
    """``Delta''(0) = 2 c2`` from an even least-squares fit of ``Delta - 2``.

    Odd ``N`` uses a symmetric 13-point stencil on ``[-h, h]``; even ``N``
    (no negative eccentricities) a one-sided stencil on ``[0, 2h]``.
    """
    if not 1e-3 <= h <= 5e-2:
        raise DomainError(f"stencil half-width {h!r} outside [1e-3, 5e-2]")
    sym = ctx.N % 2 == 1

    def fit(width):
        es = stencil(width, symmetric=sym)
        if not sym:
            es = es * 2.0
        ys = delta_samples(ctx, es, executor) - 2.0
        c, res = _even_fit(es, ys)
        return es, ys, c, res

    es, ys, c, res = fit(h)
    _, _, c_half, _ = fit(0.5 * h)
    odd = _full_fit(es, ys)[0::2] if sym else np.zeros(3)
    rich = abs(c[0] - c_half[0]) / abs(c[0]) if c[0] != 0 else math.inf
    diag = FitDiagnostics(h=h, coefficients=tuple(float(x) for x in c), residual=res,
                          odd_coefficients=tuple(float(x) for x in odd),
                          c2_half=float(c_half[0]), richardson_rel=float(rich),
                          samples=tuple(zip(es.tolist(), (ys + 2.0).tolist())))
    if check_residual and res > 1e-8 * abs(c[0]):
        raise StabilityError(f"fit residual {res:.3e} above 1e-8 |c2| = {1e-8 * abs(c[0]):.3e}")
    return 2.0 * float(c[0]), diag


def third_derivative_sup(diag: FitDiagnostics, e_star: float, n: int = 201) -> float:
    """Sampled ``sup |Delta'''|`` on ``[0, e_star]`` from the fitted polynomial."""
    _, c4, c6 = diag.coefficients
    e = np.linspace(0.0, e_star, n)
    d3 = 24.0 * c4 * e + 120.0 * c6 * e ** 3
    return float(np.max(np.abs(d3)))


def k_sup(diag: FitDiagnostics, e_star: float) -> float:
    """``1.5 * sup |Delta'''|`` on ``[0, e_star]`` without a floor."""
    return K_SAFETY * third_derivative_sup(diag, e_star)


def k_constant(ctx: HillContext, e_star: float, diag: FitDiagnostics | None = None) -> float:
    """``K = max(1, 1.5 sup |Delta'''|)`` on ``[0, e_star]``."""
    if not e_star > 0:
        raise DomainError(f"e_star must be positive, got {e_star!r}")
    if diag is None:
        _, diag = second_derivative_at_zero(ctx, check_residual=False)
    return max(K_FLOOR, k_sup(diag, e_star))


def cubic(lam, K, d2):
    return K * lam ** 3 - 3.0 * d2 * lam ** 2 - 24.0


def mu0_root(K: float, d2: float, tol: float = MU0_TOL) -> float | None:
    """Positive root of ``K l^3 - 3 Delta''(0) l^2 - 24`` (``Delta''(0) < 0``)."""
    if d2 >= 0.0:
        return None
    if K < 0:
        raise DomainError("K must be non-negative")
    lo, hi = 0.0, 1.0
    while cubic(hi, K, d2) < 0.0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cubic(mid, K, d2) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Classification:
    classification: str
    mu: float
    mu0: float | None
    p_at_e_star: float
    certified_interval: tuple


def classify(delta2_0: float, K: float, e_star: float,
             threshold: float = INCONCLUSIVE_THRESHOLD) -> Classification:
    """Quantified interval on which ``|Delta| < 2`` or ``|Delta| > 2`` holds."""
    mu = 3.0 * abs(delta2_0) / K if K > 0 else math.inf
    pe = cubic(e_star, K, delta2_0)
    if abs(delta2_0) < threshold:
        return Classification("inconclusive", mu, None, pe, (0.0, 0.0))
    if delta2_0 > 0.0:
        return Classification("hyperbolic", mu, None, pe, (0.0, min(mu, e_star)))
    m0 = mu0_root(K, delta2_0)
    if pe > 0.0:
        upper = min(mu, m0, e_star)
    else:
        upper = min(mu, e_star)
    return Classification("elliptic", mu, m0, pe, (0.0, upper))


@dataclass(frozen=True)
class StabilityReport:
    N: int
    p: int
    Delta0: float
    Delta1_0: float
    Delta2_0: float
    K_cal: float
    K_sup: float
    mu: float
    mu0: float | None
    mu0_floor: float | None
    e_star: float
    p_at_e_star: float
    certified_interval: tuple
    classification: str
    Delta_curve: tuple = field(repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)

    def as_dict(self):
        return {
            "N": self.N, "p": self.p, "Delta0": self.Delta0, "Delta1_0": self.Delta1_0,
            "Delta2_0": self.Delta2_0, "K_cal": self.K_cal, "K_sup": self.K_sup,
            "mu": self.mu, "mu0": self.mu0, "mu0_floor": self.mu0_floor,
            "e_star": self.e_star, "p_at_e_star": self.p_at_e_star,
            "certified_interval": list(self.certified_interval),
            "classification": self.classification, "diagnostics": self.diagnostics,
        }

    def to_json(self, path=None, extra=None):
        doc = self.as_dict()
        if extra:
            doc.update(extra)
        text = json.dumps(doc, indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    def curve_to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(("e", "Delta", "flag"))
            for e, d in self.Delta_curve:
                flag = "elliptic" if abs(d) < 2.0 else "hyperbolic" if abs(d) > 2.0 else "parabolic"
                w.writerow((f"{e:.8e}", f"{d:.8e}", flag))


def stability_report(ctx: HillContext, e_star: float, h: float = DEFAULT_H,
                     executor=None) -> StabilityReport:
    """Assemble ``Delta(0)``, ``Delta'(0)``, ``Delta''(0)``, ``K`` and the interval.

    A fit whose residual exceeds ``1e-8 |c2|`` leaves the sign of
    ``Delta''(0)`` unresolved and the branch is reported as inconclusive.
    The interval uses ``K_sup = 1.5 sup |Delta'''|`` on ``[0, e*]``; the floored
    ``K_cal = max(1, K_sup)`` is reported with its own ``mu0`` as ``mu0_floor``.
    """
    if ctx.N % 2 == 0:
        raise StabilityError("evenness of the discriminant is not established for even N")
    d0 = discriminant(ctx, 0.0)
    d1 = discriminant_derivative_at_zero(ctx)
    d2, diag = second_derivative_at_zero(ctx, h, executor, check_residual=False)
    resolved = diag.residual <= 1e-8 * abs(diag.coefficients[0])
    ks = k_sup(diag, e_star)
    kc = max(K_FLOOR, ks)
    cls = classify(d2, ks, e_star)
    if not resolved:
        # c2 is not separated from the integration noise: no sign is certified
        cls = Classification("inconclusive", cls.mu, cls.mu0, cls.p_at_e_star, (0.0, 0.0))
    m0f = mu0_root(kc, d2)
    curve = tuple(sorted(diag.samples))
    diagnostics = {
        "fit_coefficients": list(diag.coefficients), "fit_residual": diag.residual,
        "odd_coefficients": list(diag.odd_coefficients), "c2_half": diag.c2_half,
        "richardson_rel": diag.richardson_rel, "stencil_h": h,
        "max_abs_odd_coefficient": max(abs(x) for x in diag.odd_coefficients),
        "fit_resolved": bool(resolved),
    }
    return StabilityReport(
        N=ctx.N, p=ctx.p, Delta0=d0, Delta1_0=d1, Delta2_0=d2, K_cal=kc, K_sup=ks,
        mu=cls.mu, mu0=cls.mu0, mu0_floor=m0f, e_star=e_star, p_at_e_star=cls.p_at_e_star,
        certified_interval=cls.certified_interval, classification=cls.classification,
        Delta_curve=curve, diagnostics=diagnostics,
    )

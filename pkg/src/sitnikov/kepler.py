"""Kepler's equation and the distance of the primaries to the barycentre.

The primaries move on ellipses with semi-major axes summing to one, so the
distance of each primary to the centre of mass is ``r = (1 - e cos u) / 2``
with ``u - e sin u = t``.  For odd ``N`` the distance extends analytically to
negative eccentricities through ``r(t, -e) = r(t + N pi, e)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainError, KeplerSolverError

#: Radius of convergence of the Lagrange series of ``u(t, e)`` in ``e``.
LAPLACE_LIMIT = 0.6627434193491816

KEPLER_TOL = 1e-14
KEPLER_MAX_ITER = 50
#: Highest order accepted by :func:`lagrange_series_u`.
LAGRANGE_MAX_ORDER = 60

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class KeplerSolution:
    t: float
    e: float
    u: float
    r: float
    dr_dt: float
    dr_de: float

    @property
    def residual(self) -> float:
        return abs(self.u - self.e * math.sin(self.u) - self.t)


def check_eccentricity(e, extended=False):
    if not math.isfinite(e):
        raise DomainError(f"eccentricity must be finite, got {e!r}")
    if extended:
        if not -LAPLACE_LIMIT < e < 1.0:
            raise DomainError(f"eccentricity {e!r} outside (-{LAPLACE_LIMIT}, 1)")
    elif not 0.0 <= e < 1.0:
        raise DomainError(f"eccentricity {e!r} outside [0, 1)")


def eccentric_anomaly(t: float, e: float) -> float:
    """Safeguarded Newton iteration for ``u - e sin u = t``.

    Works for ``|e| < 1``.  The root lies in ``[t - |e|, t + |e|]``; any Newton
    iterate leaving the current bracket is replaced by a bisection step.
    """
    if e == 0.0:
        return t
    k = math.floor((t + math.pi) / _TWO_PI)
    m = t - k * _TWO_PI
    lo, hi = m - abs(e), m + abs(e)
    u = m + e * math.sin(m)
    res = u - e * math.sin(u) - m
    for _ in range(KEPLER_MAX_ITER):
        if res > 0.0:
            hi = u
        else:
            lo = u
        du = res / (1.0 - e * math.cos(u))
        u_new = u - du
        if not lo <= u_new <= hi:
            u_new = 0.5 * (lo + hi)
        u = u_new
        res = u - e * math.sin(u) - m
        if abs(res) <= KEPLER_TOL or abs(du) <= 1e-16 * (1.0 + abs(u)):
            return u + k * _TWO_PI
    if abs(res) <= 1e-13:
        return u + k * _TWO_PI
    raise KeplerSolverError(t, e, abs(res))


def radius_terms(t: float, e: float):
    """Return ``(r, dr/dt, dr/de, u)`` for ``|e| < 1``.

    ``dr/de`` follows from implicit differentiation of Kepler's equation,
    ``du/de = sin u / (1 - e cos u)``.
    """
    u = eccentric_anomaly(t, e)
    cu = math.cos(u)
    su = math.sin(u)
    one_m = 1.0 - e * cu
    r = 0.5 * one_m
    dr_dt = 0.5 * e * su / one_m
    dr_de = 0.5 * (e * su * su / one_m - cu)
    return r, dr_dt, dr_de, u


def solve_kepler(t: float, e: float) -> KeplerSolution:
    check_eccentricity(e, extended=True)
    if not math.isfinite(t):
        raise DomainError(f"time must be finite, got {t!r}")
    r, dr_dt, dr_de, u = radius_terms(t, e)
    return KeplerSolution(t=t, e=e, u=u, r=r, dr_dt=dr_dt, dr_de=dr_de)


def eccentric_anomaly_array(t, e: float) -> np.ndarray:
    """Vectorised counterpart of :func:`eccentric_anomaly`."""
    t = np.asarray(t, dtype=float)
    if e == 0.0:
        return t.copy()
    k = np.floor((t + math.pi) / _TWO_PI)
    m = t - k * _TWO_PI
    lo = m - abs(e)
    hi = m + abs(e)
    u = m + e * np.sin(m)
    for _ in range(KEPLER_MAX_ITER):
        res = u - e * np.sin(u) - m
        if np.all(np.abs(res) <= KEPLER_TOL):
            break
        hi = np.where(res > 0, u, hi)
        lo = np.where(res > 0, lo, u)
        u_new = u - res / (1.0 - e * np.cos(u))
        bad = (u_new < lo) | (u_new > hi)
        u = np.where(bad, 0.5 * (lo + hi), u_new)
    res = np.abs(u - e * np.sin(u) - m)
    if np.any(res > 1e-13):
        i = int(np.argmax(res))
        raise KeplerSolverError(float(t.flat[i]), e, float(res.flat[i]))
    return u + k * _TWO_PI


def radius_array(t, e: float):
    """Vectorised ``(r, dr/dt, dr/de)`` on an array of times."""
    u = eccentric_anomaly_array(t, e)
    cu, su = np.cos(u), np.sin(u)
    one_m = 1.0 - e * cu
    return 0.5 * one_m, 0.5 * e * su / one_m, 0.5 * (e * su * su / one_m - cu)


def shifted_radius_terms(t: float, e: float, n_half: int):
    """``(r, dr/dt, dr/de)`` for signed ``e`` using the odd-N reflection.

    For ``e < 0`` the distance is ``r(t + n_half*pi, |e|)`` and the derivative
    with respect to the signed eccentricity flips sign.
    """
    if e >= 0.0:
        r, dr_dt, dr_de, _ = radius_terms(t, e)
        return r, dr_dt, dr_de
    r, dr_dt, dr_de, _ = radius_terms(t + n_half * math.pi, -e)
    return r, dr_dt, -dr_de


def shifted_radius_array(t, e: float, n_half: int):
    t = np.asarray(t, dtype=float)
    if e >= 0.0:
        return radius_array(t, e)
    r, dr_dt, dr_de = radius_array(t + n_half * math.pi, -e)
    return r, dr_dt, -dr_de


def radius_extended(t: float, e_signed: float, N: int) -> float:
    """Distance of the primaries for a signed eccentricity (``N`` odd)."""
    if N < 1 or N % 2 == 0:
        raise DomainError(f"negative-eccentricity extension needs odd N, got {N}")
    if not abs(e_signed) < LAPLACE_LIMIT:
        raise DomainError(
            f"|e|={abs(e_signed)!r} is not below the Laplace limit {LAPLACE_LIMIT}"
        )
    return shifted_radius_terms(t, e_signed, N)[0]


@lru_cache(maxsize=None)
def lagrange_table(k: int) -> tuple[tuple[int, float], ...]:
    """Sine-series of ``c_k(t) = d^{k-1}/dt^{k-1} sin^k t``.

    Returns pairs ``(m, a_m)`` with ``c_k(t) = sum a_m sin(m t)``.  The
    coefficients are exact rationals ``(-1)^j C(k, j) (k-2j)^{k-1} / 2^{k-1}``
    rounded once to float.
    """
    if k < 1:
        raise DomainError(f"Lagrange coefficient index must be >= 1, got {k}")
    terms = []
    for j in range((k + 1) // 2):
        m = k - 2 * j
        coef = Fraction((-1) ** j * math.comb(k, j) * m ** (k - 1), 2 ** (k - 1))
        terms.append((m, float(coef)))
    return tuple(terms)


def lagrange_coefficient(k: int, t: float) -> float:
    return math.fsum(a * math.sin(m * t) for m, a in lagrange_table(k))


def lagrange_series_u(t: float, e: float, order: int) -> float:
    """Truncated Lagrange inversion ``t + sum_{k<=order} c_k(t) e^k / k!``."""
    if not 1 <= order <= LAGRANGE_MAX_ORDER:
        raise DomainError(f"order must lie in [1, {LAGRANGE_MAX_ORDER}], got {order}")
    if not abs(e) < LAPLACE_LIMIT:
        raise DomainError(f"|e|={abs(e)!r} outside the series convergence disc")
    terms = [t]
    power = 1.0
    for k in range(1, order + 1):
        power *= e / k
        terms.append(lagrange_coefficient(k, t) * power)
    return math.fsum(terms)


def radius_from_series(t: float, e: float, order: int) -> float:
    """``r`` evaluated through the Lagrange series; a test oracle only."""
    u = lagrange_series_u(t, e, order)
    return 0.5 * (1.0 - e * math.cos(u))

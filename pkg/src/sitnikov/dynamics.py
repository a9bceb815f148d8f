"""Integration of the Sitnikov equation together with its sensitivities.

The state vector carries eight components::

    z, z', phi1, phi1', phi2, phi2', beta, beta'

where ``phi1 = dz/dxi`` and ``phi2 = dz/deta`` are the canonical solutions of
the first variational equation ``y'' + a(t) y = 0`` and ``beta = dz/de``
solves the same equation forced by ``-df/de``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, IntegrationError
from .kepler import LAPLACE_LIMIT, check_eccentricity, shifted_radius_array, shifted_radius_terms

TRAJECTORY_COLUMNS = ("t", "z", "z_dot", "dz_dxi", "dz_dot_dxi", "dz_de", "dz_dot_de")


@dataclass(frozen=True)
class OrbitConfig:
    """Problem instance and numerical tolerances."""

    N: int = 1
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    sample_count: int = 512

    def __post_init__(self):
        if self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        for name in ("abs_tol", "rel_tol"):
            tol = getattr(self, name)
            if not 1e-14 <= tol <= 1e-8:
                raise DomainError(f"{name}={tol!r} outside [1e-14, 1e-8]")
        if self.sample_count < 512:
            raise DomainError(f"sample_count must be >= 512, got {self.sample_count}")

    @property
    def half_period(self) -> float:
        return self.N * math.pi

    def with_N(self, N):
        return OrbitConfig(N=N, abs_tol=self.abs_tol, rel_tol=self.rel_tol,
                           sample_count=self.sample_count)


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    xi: float
    e: float
    times: np.ndarray
    z: np.ndarray
    z_dot: np.ndarray
    dz_dxi: np.ndarray
    dz_dot_dxi: np.ndarray
    dz_de: np.ndarray
    dz_dot_de: np.ndarray
    phi2: np.ndarray
    phi2_dot: np.ndarray
    N: int = 1
    dense: Callable | None = field(default=None, repr=False, compare=False)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def radius(self):
        """``(r, dr/dt, dr/de)`` at the sample times."""
        return shifted_radius_array(self.times, self.e, self.N)

    def variational_coefficient(self):
        """``a(t) = (r^2 - 2 z^2) / (z^2 + r^2)^{5/2}`` at the sample times."""
        r = self.radius()[0]
        s = self.z ** 2 + r ** 2
        return (r ** 2 - 2.0 * self.z ** 2) / s ** 2.5

    def forcing(self):
        """``-df/de`` at the sample times, the source term of ``beta``."""
        r, _, dr_de = self.radius()
        s = self.z ** 2 + r ** 2
        return 3.0 * self.z * r * dr_de / s ** 2.5

    def state_at(self, t):
        return self.dense(t)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJECTORY_COLUMNS)
            cols = (self.times, self.z, self.z_dot, self.dz_dxi, self.dz_dot_dxi,
                    self.dz_de, self.dz_dot_de)
            for row in zip(*cols):
                w.writerow([f"{v:.8e}" for v in row])


@dataclass(frozen=True)
class CanonicalPair:
    times: np.ndarray
    phi1: np.ndarray
    phi1_dot: np.ndarray
    phi2: np.ndarray
    phi2_dot: np.ndarray
    sup_norm: float

    def wronskian(self):
        return self.phi1 * self.phi2_dot - self.phi1_dot * self.phi2


def _make_rhs(e: float, N: int):
    if e == 0.0:
        def rhs(t, y):
            z = y[0]
            zz = z * z
            s = zz + 0.25
            s15 = s * math.sqrt(s)
            a = (0.25 - 2.0 * zz) / (s * s15)
            # de r at e = 0 is -cos(t)/2
            forcing = -0.75 * z * math.cos(t) / (s * s15)
            return [y[1], -z / s15, y[3], -a * y[2], y[5], -a * y[4],
                    y[7], -a * y[6] + forcing]
        return rhs

    def rhs(t, y):
        z = y[0]
        r, _, dr_de = shifted_radius_terms(t, e, N)
        zz = z * z
        r2 = r * r
        s = zz + r2
        s15 = s * math.sqrt(s)
        s25 = s * s15
        a = (r2 - 2.0 * zz) / s25
        forcing = 3.0 * z * r * dr_de / s25
        return [y[1], -z / s15, y[3], -a * y[2], y[5], -a * y[4],
                y[7], -a * y[6] + forcing]

    return rhs


def _check_e(e, N):
    if e < 0.0:
        if N % 2 == 0:
            raise DomainError("negative eccentricities are only defined for odd N")
        if not -e < LAPLACE_LIMIT:
            raise DomainError(f"|e|={-e!r} beyond the Laplace limit")
    else:
        check_eccentricity(e)


def integrate(xi, e, t_end, cfg: OrbitConfig, y0=None, dense=False):
    """Raw integration of the augmented system; returns the scipy solution."""
    _check_e(e, cfg.N)
    if y0 is None:
        y0 = [xi, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]
    sol = solve_ivp(_make_rhs(e, cfg.N), (0.0, t_end), y0, method="DOP853",
                    rtol=cfg.rel_tol, atol=cfg.abs_tol, dense_output=dense)
    if sol.status != 0:
        t_last = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(f"integration failed: {sol.message}", t_last)
    return sol


def end_state(xi, e, t_end, cfg: OrbitConfig) -> np.ndarray:
    """State vector at ``t_end`` without dense output."""
    return integrate(xi, e, t_end, cfg).y[:, -1].copy()


def chebyshev_times(t_end: float, n: int) -> np.ndarray:
    """Chebyshev-Lobatto points on ``[0, t_end]``, increasing, endpoints exact."""
    k = np.arange(n)
    x = 0.5 * t_end * (1.0 - np.cos(math.pi * k / (n - 1)))
    x[0], x[-1] = 0.0, t_end
    return x


def flow(xi: float, e: float, t_end: float, cfg: OrbitConfig) -> Trajectory:
    """Integrate the Sitnikov equation and all sensitivities on ``[0, t_end]``."""
    sol = integrate(xi, e, t_end, cfg, dense=True)
    halves = max(1, round(t_end / math.pi))
    times = chebyshev_times(t_end, cfg.sample_count * halves + 1)
    Y = sol.sol(times)
    Y[:, 0] = sol.y[:, 0]
    Y[:, -1] = sol.y[:, -1]
    return Trajectory(
        xi=xi, e=e, times=_frozen(times), z=_frozen(Y[0]), z_dot=_frozen(Y[1]),
        dz_dxi=_frozen(Y[2]), dz_dot_dxi=_frozen(Y[3]), phi2=_frozen(Y[4]),
        phi2_dot=_frozen(Y[5]), dz_de=_frozen(Y[6]), dz_dot_de=_frozen(Y[7]),
        N=cfg.N, dense=sol.sol,
    )


def refined_abs_max(times, values, dense_component) -> float:
    """Max of ``|values|`` with a three-point parabolic refinement.

    ``dense_component`` evaluates the underlying smooth function; the vertex of
    the parabola through the grid maximum and its neighbours is evaluated and
    kept if larger.
    """
    v = np.abs(values)
    i = int(np.argmax(v))
    best = float(v[i])
    if 0 < i < len(v) - 1:
        t0, t1, t2 = times[i - 1], times[i], times[i + 1]
        f0, f1, f2 = v[i - 1], v[i], v[i + 1]
        den = (t0 - t1) * (t0 - t2) * (t1 - t2)
        A = (t2 * (f1 - f0) + t1 * (f0 - f2) + t0 * (f2 - f1)) / den
        B = (t2 * t2 * (f0 - f1) + t1 * t1 * (f2 - f0) + t0 * t0 * (f1 - f2)) / den
        if A < 0.0:
            tv = -B / (2.0 * A)
            if t0 < tv < t2:
                best = max(best, abs(float(dense_component(tv))))
    return best


def canonical_solutions(xi: float, e: float, t_end: float, cfg: OrbitConfig) -> CanonicalPair:
    """Canonical pair of the variational equation and its sup-norm envelope."""
    tr = flow(xi, e, t_end, cfg)
    return canonical_from_trajectory(tr)


def canonical_from_trajectory(tr: Trajectory) -> CanonicalPair:
    comps = (tr.dz_dxi, tr.dz_dot_dxi, tr.phi2, tr.phi2_dot)
    sup = 0.0
    for idx, values in zip((2, 3, 4, 5), comps):
        sup = max(sup, refined_abs_max(tr.times, values, lambda t, k=idx: tr.dense(t)[k]))
    return CanonicalPair(times=tr.times, phi1=tr.dz_dxi, phi1_dot=tr.dz_dot_dxi,
                         phi2=tr.phi2, phi2_dot=tr.phi2_dot, sup_norm=sup)


def shooting_value(xi: float, e: float, N: int, cfg: OrbitConfig):
    """``(F, dF/dxi, dF/de)`` with ``F = z'(N pi; xi, e)``."""
    if cfg.N != N:
        cfg = cfg.with_N(N)
    y = end_state(xi, e, N * math.pi, cfg)
    return float(y[1]), float(y[3]), float(y[7])


def variational_coefficient(z, r):
    s = z * z + r * r
    return (r * r - 2.0 * z * z) / s ** 2.5

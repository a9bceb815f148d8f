"""The integrable circular problem (e = 0).

With the primaries on a circle of radius ``rho`` the massless body obeys
``z'' = -z / (z^2 + rho^2)^{3/2}``.  Its period as a function of the
amplitude is monotone, which gives guaranteed brackets for the initial
conditions of all even ``2 N pi``-periodic solutions.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .dynamics import OrbitConfig, canonical_solutions, flow, shooting_value
from .errors import CatalogError, DomainError

#: Eccentricity cap used for the a-priori amplitude bound.
E_CAP = 0.99
CIRCULAR_RADIUS = 0.5
GL_NODES = 128


def branch_count(N: int) -> int:
    """``floor(2 sqrt(2) N)`` computed in integers."""
    return math.isqrt(8 * N * N)


_gl_x, _gl_w = np.polynomial.legendre.leggauss(GL_NODES)


def _panels(scale: float):
    """Breakpoints on ``[0, pi/2]`` graded geometrically towards ``theta = 0``.

    ``scale`` is the angular width over which the integrand varies near the
    origin; panels start a decade below it.
    """
    edges = [0.0]
    h = 0.1 * scale
    while h < 0.25 * math.pi:
        edges.append(h)
        h *= 4.0
    edges.append(0.5 * math.pi)
    return edges


def period_function(xi: float, radius: float = CIRCULAR_RADIUS) -> float:
    """Minimal period of the circular solution with ``z(0) = xi, z'(0) = 0``.

    Substituting ``z = xi sin(theta)`` into the quarter-period integral
    ``int dz / sqrt(2 (V(xi) - V(z)))`` removes the inverse-square-root
    singularity at the turning point and leaves the smooth integrand
    ``sqrt(s_z s_xi (s_z + s_xi) / 2)`` with ``s_w = sqrt(w^2 + radius^2)``.
    """
    if not xi > 0.0:
        raise DomainError(f"amplitude must be positive, got {xi!r}")
    s_xi = math.hypot(xi, radius)
    edges = _panels(radius / xi) if radius / xi < 0.5 else [0.0, 0.5 * math.pi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        th = 0.5 * (b - a) * _gl_x + 0.5 * (b + a)
        s_z = np.hypot(xi * np.sin(th), radius)
        g = np.sqrt(s_z * s_xi * (s_z + s_xi) / 2.0)
        total += 0.5 * (b - a) * float(np.dot(_gl_w, g))
    return 4.0 * total


def amplitude_for_period(target: float, radius: float = CIRCULAR_RADIUS) -> float:
    """Invert the monotone period function by bracketed root finding."""
    t_min = 2.0 * math.pi * radius ** 1.5
    if target <= t_min:
        raise DomainError(f"period {target!r} is not above the small-amplitude limit {t_min!r}")
    lo, hi = 1e-8, 1.0
    while period_function(hi, radius) < target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            raise DomainError(f"no amplitude with period {target!r}")
    return brentq(lambda x: period_function(x, radius) - target, lo, hi,
                  xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def xi_star(N: int, e_cap: float = E_CAP) -> float:
    """A-priori amplitude bound for even ``2 N pi``-periodic solutions.

    Comparison problem: circular motion at the smallest distance
    ``(1 - e_cap)/2`` of the primaries; the bound is its amplitude of
    period ``4 N pi``.
    """
    return amplitude_for_period(4.0 * N * math.pi, 0.5 * (1.0 - e_cap))


def count_zeros(values) -> int:
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


@dataclass(frozen=True)
class CircularCatalog:
    N: int
    nu: int
    xi_p: tuple[float, ...]
    xi_star: float
    Delta_star: float
    r0: float | None = None
    R0_profile: tuple[tuple[float, float], ...] = field(default=(), repr=False)
    shooting_residuals: tuple[float, ...] = field(default=(), repr=False)
    zero_counts: tuple[int, ...] = field(default=(), repr=False)

    def xi(self, p: int) -> float:
        if not 1 <= p <= self.nu:
            raise CatalogError(f"branch index outside 1..{self.nu}", p)
        return self.xi_p[p - 1]

    def with_envelope(self, r0, profile):
        return CircularCatalog(N=self.N, nu=self.nu, xi_p=self.xi_p, xi_star=self.xi_star,
                               Delta_star=self.Delta_star, r0=r0, R0_profile=tuple(profile),
                               shooting_residuals=self.shooting_residuals,
                               zero_counts=self.zero_counts)

    def to_json(self, path=None):
        doc = {"N": self.N, "nu": self.nu, "xi_p": list(self.xi_p), "xi_star": self.xi_star,
               "Delta_star": self.Delta_star, "r0": self.r0}
        text = json.dumps(doc, indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    def profile_to_csv(self, path):
        write_profile_csv(path, self.R0_profile)


def write_profile_csv(path, profile):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("xi", "R0"))
        for x, v in profile:
            w.writerow((f"{x:.8e}", f"{v:.8e}"))


def find_branch_roots(N: int, cfg: OrbitConfig | None = None, verify=True) -> CircularCatalog:
    """Initial conditions of all even ``2 N pi``-periodic circular solutions.

    ``xi_p`` solves ``T(xi_p) = 2 N pi / p``; the shooting function and the
    zero count of each solution are checked independently on the flow.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    cfg = (cfg or OrbitConfig(N=N)).with_N(N)
    nu = branch_count(N)
    xs = []
    for p in range(1, nu + 1):
        try:
            xs.append(amplitude_for_period(2.0 * N * math.pi / p))
        except (DomainError, ValueError) as exc:
            raise CatalogError(f"root bracket failed: {exc}", p) from exc
    x_star = xi_star(N)
    chain = [x_star, *xs, 0.0]
    delta = min(a - b for a, b in zip(chain[:-1], chain[1:]))
    residuals, zeros = [], []
    if verify:
        for p, x in enumerate(xs, start=1):
            F = shooting_value(x, 0.0, N, cfg)[0]
            if abs(F) > 1e-10:
                raise CatalogError(f"shooting residual {F:.3e} above 1e-10", p)
            n0 = count_zeros(flow(x, 0.0, N * math.pi, cfg).z)
            if n0 != p:
                raise CatalogError(f"solution has {n0} zeros on [0, N pi]", p)
            residuals.append(F)
            zeros.append(n0)
    return CircularCatalog(N=N, nu=nu, xi_p=tuple(xs), xi_star=x_star, Delta_star=delta,
                           shooting_residuals=tuple(residuals), zero_counts=tuple(zeros))


def envelope(xi: float, cfg: OrbitConfig, horizon: float | None = None) -> float:
    """``R_0(xi)``: sup-norm of the canonical pair at ``e = 0`` on ``[0, horizon]``."""
    T = cfg.half_period if horizon is None else horizon
    return canonical_solutions(xi, 0.0, T, cfg).sup_norm


def canonical_envelope_profile(N: int, x_star: float, grid: int = 400,
                               cfg: OrbitConfig | None = None, refine=True,
                               horizon: float | None = None, xi_step: float | None = None,
                               executor=None):
    """Profile ``xi -> R_0(xi)`` on ``[0, x_star]`` and its supremum ``r0``.

    With ``xi_step`` the grid is ``0, xi_step, 2 xi_step, ... <= x_star``
    instead of ``grid`` uniform points.  The refinement maximises ``R_0`` on
    the two cells adjacent to the grid maximiser (Brent's parabolic search).
    """
    cfg = (cfg or OrbitConfig(N=N)).with_N(N)
    if xi_step is not None:
        xs = np.arange(0.0, x_star + 0.5 * xi_step, xi_step)
        xs = xs[xs <= x_star + 1e-12]
    else:
        if grid < 200:
            raise DomainError(f"grid must be >= 200, got {grid}")
        xs = np.linspace(0.0, x_star, grid)
    fn = _EnvelopeFn(cfg, horizon)
    if executor is not None:
        vals = list(executor.map(fn, xs))
    else:
        vals = [fn(x) for x in xs]
    vals = np.asarray(vals)
    i = int(np.argmax(vals))
    r0, x_max = float(vals[i]), float(xs[i])
    if refine:
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        res = minimize_scalar(lambda x: -fn(x), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        if -res.fun > r0:
            r0, x_max = float(-res.fun), float(res.x)
    profile = tuple((float(x), float(v)) for x, v in zip(xs, vals))
    return r0, profile, x_max


class _EnvelopeFn:
    # picklable for process pools
    def __init__(self, cfg, horizon):
        self.cfg = cfg
        self.horizon = horizon

    def __call__(self, x):
        return envelope(float(x), self.cfg, self.horizon)


def build_catalog(N: int, cfg: OrbitConfig | None = None, grid: int = 400, refine=True,
                  horizon=None, xi_step=None, executor=None) -> CircularCatalog:
    """Roots, gap and envelope supremum in one catalog."""
    cat = find_branch_roots(N, cfg)
    r0, profile, _ = canonical_envelope_profile(N, cat.xi_star, grid=grid, cfg=cfg,
                                                refine=refine, horizon=horizon,
                                                xi_step=xi_step, executor=executor)
    return cat.with_envelope(r0, profile)

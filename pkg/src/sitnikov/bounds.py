"""Explicit a-priori bounds for the continuation of the circular families.

Every constant is evaluated in 40-digit arithmetic (``mpmath``) and rounded
once to ``float``; the critical eccentricity ``E*`` sits near ``1e-10`` where
the polynomial ``Q~`` is dominated by its ``R^5`` term.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from .circular import CircularCatalog
from .dynamics import (OrbitConfig, canonical_from_trajectory, canonical_solutions, flow,
                       shooting_value)
from .errors import CertificationError, DomainError, LedgerError

DPS = 40


def _mp(x):
    return mp.mpf(x) if not isinstance(x, mp.mpf) else x


def sigma(e):
    """Uniform bound ``16 / (1 - e)^3`` on the variational coefficient."""
    with mp.workdps(DPS):
        return float(16 / (1 - _mp(e)) ** 3)


def d_bound(e, R, N):
    """Bound on ``|d a / d e|`` given the canonical envelope ``R``."""
    with mp.workdps(DPS):
        e, R = _mp(e), _mp(R)
        s = 16 / (1 - e) ** 3
        return float(6 * s * (1 + 3 * N * mp.pi * s * R ** 2) / (1 - e) ** 2)


def _b1(e, N):
    return 9216 * (N * mp.pi) ** 2 * e / (1 - e) ** 8


def _b2(e, N):
    return 192 * N * mp.pi * e / (1 - e) ** 5


def b_coefficients(e, N):
    with mp.workdps(DPS):
        e = _mp(e)
        return float(_b1(e, N)), float(_b2(e, N))


def _q_tilde(e, R, N):
    return _b1(e, N) * R ** 5 + _b2(e, N) * R ** 3 - R


def q_tilde(e, R, N):
    """``Q~(e, R) = b1(e) R^5 + b2(e) R^3 - R``."""
    with mp.workdps(DPS):
        return float(_q_tilde(_mp(e), _mp(R), N))


def q_function(e, R, r0, N):
    """``Q(e, R) = Q~(e, R) + r0``; its first positive zero bounds the envelope."""
    with mp.workdps(DPS):
        return float(_q_tilde(_mp(e), _mp(R), N) + _mp(r0))


def _r_m(e, N):
    b1, b2 = _b1(e, N), _b2(e, N)
    return mp.sqrt((mp.sqrt(9 * b2 ** 2 + 20 * b1) - 3 * b2) / (10 * b1))


def r_m(e, N):
    """Positive critical point of ``R -> Q~(e, R)``."""
    if not 0.0 < e < 1.0:
        raise DomainError(f"R_m is defined for 0 < e < 1, got {e!r}")
    with mp.workdps(DPS):
        return float(_r_m(_mp(e), N))


def r_star(e, N):
    """Positive root of ``Q~(e, .)``."""
    if not 0.0 < e < 1.0:
        raise DomainError(f"R* is defined for 0 < e < 1, got {e!r}")
    with mp.workdps(DPS):
        e = _mp(e)
        b1, b2 = _b1(e, N), _b2(e, N)
        return float(mp.sqrt((mp.sqrt(b2 ** 2 + 4 * b1) - b2) / (2 * b1)))


def _q_tilde_min(e, N):
    rm = _r_m(e, N)
    return -2 * rm ** 3 * (2 * _b1(e, N) * rm ** 2 + _b2(e, N))


def q_tilde_min(e, N):
    """Minimum of ``Q~(e, .)`` over ``R > 0``."""
    if not 0.0 < e < 1.0:
        raise DomainError(f"Q~_m is defined for 0 < e < 1, got {e!r}")
    with mp.workdps(DPS):
        return float(_q_tilde_min(_mp(e), N))


def solve_E_star(r0, N, rel_tol=1e-12):
    """Root of ``Q~_m(e) = -r0`` by bisection in ``log e``.

    ``Q~_m`` increases from ``-inf`` at ``e = 0`` to ``0`` at ``e = 1``.
    The lower end of the final bracket is returned, so ``Q~_m(E*) <= -r0``.
    """
    if not r0 > 0:
        raise DomainError(f"r0 must be positive, got {r0!r}")
    with mp.workdps(DPS):
        r0 = _mp(r0)
        g = lambda e: _q_tilde_min(e, N) + r0
        lo, hi = mp.mpf("1e-40"), 1 - mp.mpf("1e-12")
        if not (g(lo) < 0 < g(hi)):
            raise LedgerError(f"E* not bracketed for r0={float(r0)}, N={N}")
        while hi / lo - 1 > rel_tol:
            mid = mp.sqrt(lo * hi)
            if g(mid) < 0:
                lo = mid
            else:
                hi = mid
        return float(lo)


def leading_order_E_star(r0, N):
    """Small-``e`` approximation ``256 / (3125 r0^4 9216 (N pi)^2)``.

    For ``e -> 0`` the ``b2`` term is negligible, so ``Q~ ~ b1 R^5 - R`` with
    minimiser ``R_m = (5 b1)^{-1/4}`` and minimum ``-(4/5) R_m``.  Setting the
    minimum to ``-r0`` gives ``b1 = 256 / (3125 r0^4)``, and
    ``b1 ~ 9216 (N pi)^2 e`` yields the formula.
    """
    return 256.0 / (3125.0 * r0 ** 4 * 9216.0 * (N * math.pi) ** 2)


def first_root_Q(e, r0, N):
    """``R_{1,e}``: first positive zero of ``Q(e, .)``, bracketed by ``[0, R_m(e)]``."""
    if e == 0.0:
        return float(r0)
    with mp.workdps(DPS):
        e, r0m = _mp(e), _mp(r0)
        hi = _r_m(e, N)
        lo = mp.mpf(0)
        Q = lambda R: _q_tilde(e, R, N) + r0m
        if Q(hi) > 0:
            raise LedgerError(f"Q(e, R_m) > 0 at e={float(e)}: e exceeds E*")
        for _ in range(200):
            mid = (lo + hi) / 2
            if Q(mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < mp.mpf("1e-25") * hi:
                break
        return float((lo + hi) / 2)


@dataclass(frozen=True)
class LedgerEntry:
    symbol: str
    value: float
    definition: str
    inputs: dict = field(default_factory=dict)

    def as_dict(self):
        return {"symbol": self.symbol, "value": self.value,
                "definition": self.definition, "inputs": self.inputs}


@dataclass(frozen=True)
class BoundsLedger:
    N: int
    p: int
    r0: float
    b1: dict
    b2: dict
    E_star: float
    R_cal: float
    sigma_star: float
    Upsilon: float
    Psi: float
    phi1dot_circ: float
    E_hat: float
    E_star2: float
    Gamma: float
    M: float
    Delta_star: float
    e_star: float
    gamma: float
    xi_p: float
    entries: tuple = field(default=(), repr=False)

    def G(self, e):
        """Amplitude bound ``xi_p + gamma e``."""
        return self.xi_p + self.gamma * e

    def to_json(self, path=None, extra=None):
        doc = {"N": self.N, "p": self.p, "entries": [x.as_dict() for x in self.entries]}
        if extra:
            doc.update(extra)
        text = json.dumps(doc, indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def envelope_constants(r0, N):
    """``(E*, R_cal, sigma*)``: the part of the ledger independent of the branch."""
    E_star = solve_E_star(r0, N)
    return E_star, r_m(E_star, N), sigma(E_star)


def continuation_constants(catalog: CircularCatalog, p: int,
                           cfg: OrbitConfig | None = None) -> BoundsLedger:
    """Fill the bound ledger for branch ``p`` of ``catalog``."""
    if catalog.r0 is None:
        raise LedgerError("catalog carries no envelope supremum r0")
    N = catalog.N
    cfg = (cfg or OrbitConfig(N=N)).with_N(N)
    xi_p = catalog.xi(p)
    r0 = catalog.r0
    E_star, R_cal, sig = envelope_constants(r0, N)
    phi1dot = abs(shooting_value(xi_p, 0.0, N, cfg)[1])
    with mp.workdps(DPS):
        NP = N * mp.pi
        Es, R, s = _mp(E_star), _mp(R_cal), _mp(sig)
        Ups = 12 * NP / (1 - Es) ** 4 * (1 + 2 * NP * s * R ** 2)
        Psi = 12 * NP * s * (1 + 3 * NP * s * R ** 2) * R ** 3 / (1 - Es) ** 2
        ph = _mp(phi1dot)
        E_hat = ph / (2 * Psi)
        E2 = min(Es, E_hat)
        Gam = ph - Psi * E2
        if Gam <= 0:
            raise LedgerError(f"Gamma = {float(Gam):.3e} <= 0 for p={p}")
        M = Ups / Gam
        dstar = _mp(catalog.Delta_star)
        e_st = min(E2, dstar / M)
        gam = M * R + 3 * NP * s * R ** 2 / (2 * (1 - e_st))
        b1c, b2c = 9216 * NP ** 2, 192 * NP
        vals = dict(Upsilon=float(Ups), Psi=float(Psi), E_hat=float(E_hat), E_star2=float(E2),
                    Gamma=float(Gam), M=float(M), e_star=float(e_st), gamma=float(gam),
                    E_R=float(ph / Psi))
    entries = (
        LedgerEntry("r0", r0, "sup over xi in [0, xi*] of R_0(xi)", {"xi_star": catalog.xi_star}),
        LedgerEntry("b1", float(b1c), "b1(e) = 9216 (N pi)^2 e / (1-e)^8, coefficient", {"N": N}),
        LedgerEntry("b2", float(b2c), "b2(e) = 192 N pi e / (1-e)^5, coefficient", {"N": N}),
        LedgerEntry("E*", E_star, "root of Q~_m(e) = -r0", {"r0": r0, "N": N}),
        LedgerEntry("R", R_cal, "R_m(E*)", {"E*": E_star}),
        LedgerEntry("sigma*", sig, "16 / (1-E*)^3", {"E*": E_star}),
        LedgerEntry("Upsilon", vals["Upsilon"], "12 N pi (1 + 2 N pi sigma* R^2) / (1-E*)^4",
                    {"E*": E_star, "R": R_cal}),
        LedgerEntry("Psi", vals["Psi"], "12 N pi sigma* (1 + 3 N pi sigma* R^2) R^3 / (1-E*)^2",
                    {"E*": E_star, "R": R_cal}),
        LedgerEntry("|phi1'(N pi, 0)|", phi1dot, "canonical solution at xi_p, e = 0",
                    {"xi_p": xi_p}),
        LedgerEntry("E_hat", vals["E_hat"], "|phi1'(N pi, 0)| / (2 Psi)", {}),
        LedgerEntry("E_R", vals["E_R"], "|phi1'(N pi, 0)| / Psi (restriction e Psi < |phi1'|)", {}),
        LedgerEntry("E**", vals["E_star2"], "min(E*, E_hat)", {}),
        LedgerEntry("Gamma", vals["Gamma"], "|phi1'(N pi, 0)| - Psi E**", {}),
        LedgerEntry("M", vals["M"], "Upsilon / Gamma", {}),
        LedgerEntry("Delta*", catalog.Delta_star, "min gap xi_p - xi_{p+1}, xi_0 = xi*, xi_{nu+1} = 0", {}),
        LedgerEntry("e*", vals["e_star"], "min(E**, Delta* / M)", {}),
        LedgerEntry("gamma", vals["gamma"], "M R + 3 N pi sigma* R^2 / (2 (1 - e*))", {}),
    )
    return BoundsLedger(
        N=N, p=p, r0=r0, b1={"coefficient": float(b1c), "power": 8},
        b2={"coefficient": float(b2c), "power": 5}, E_star=E_star, R_cal=R_cal,
        sigma_star=sig, Upsilon=vals["Upsilon"], Psi=vals["Psi"], phi1dot_circ=phi1dot,
        E_hat=vals["E_hat"], E_star2=vals["E_star2"], Gamma=vals["Gamma"], M=vals["M"],
        Delta_star=catalog.Delta_star, e_star=vals["e_star"], gamma=vals["gamma"],
        xi_p=xi_p, entries=entries,
    )


@dataclass(frozen=True)
class Lemma1Sample:
    e: float
    R1: float
    measured: float
    xi_at_max: float


@dataclass(frozen=True)
class Lemma1Certificate:
    N: int
    r0: float
    R_cal: float
    xi_range: tuple
    samples: tuple
    failures: tuple

    @property
    def passed(self):
        return not self.failures


def lemma1_certify(N, xi_range, e_max, r0, cfg: OrbitConfig | None = None,
                   n_e=5, n_xi=21, extra_xi=(), raise_on_failure=True) -> Lemma1Certificate:
    """Check ``r0 <= R_{1,e}`` and ``R_e <= R_{1,e} <= R_cal`` on sampled ``e``.

    ``R_e`` is measured as the running maximum, over sampled ``mu <= e`` and
    sampled ``xi``, of the canonical-pair envelope on ``[0, N pi]``.
    """
    cfg = (cfg or OrbitConfig(N=N)).with_N(N)
    E_star = solve_E_star(r0, N)
    if e_max > E_star * (1 + 1e-9):
        raise DomainError(f"e_max={e_max!r} exceeds E*={E_star!r}")
    R_cal = r_m(E_star, N)
    es = np.linspace(0.0, e_max, n_e)
    xs = np.unique(np.concatenate([np.linspace(xi_range[0], xi_range[1], n_xi),
                                   np.asarray(extra_xi, dtype=float)]))
    samples, failures = [], []
    running, running_xi = 0.0, float(xs[0])
    T = cfg.half_period
    for e in es:
        for x in xs:
            v = canonical_solutions(float(x), float(e), T, cfg).sup_norm
            if v > running:
                running, running_xi = v, float(x)
        R1 = first_root_Q(float(e), r0, N)
        s = Lemma1Sample(e=float(e), R1=R1, measured=running, xi_at_max=running_xi)
        samples.append(s)
        if not r0 <= R1 * (1 + 1e-12):
            failures.append((s, "r0 > R_{1,e}"))
        if not running <= R1:
            failures.append((s, "measured R_e > R_{1,e}"))
        if not R1 <= R_cal * (1 + 1e-12):
            failures.append((s, "R_{1,e} > R_cal"))
    cert = Lemma1Certificate(N=N, r0=r0, R_cal=R_cal, xi_range=tuple(map(float, xi_range)),
                             samples=tuple(samples), failures=tuple(failures))
    if failures and raise_on_failure:
        s, why = failures[0]
        raise CertificationError(f"{why} at e={s.e:.6g}, xi={s.xi_at_max:.12g}",
                                 e=s.e, xi=s.xi_at_max)
    return cert


def appendix_inequality_audit(N, x_star, n_traj=40, n_t=25, e_max=0.5, seed=0,
                              cfg: OrbitConfig | None = None):
    """Measure the pointwise inequalities behind ``d(e, R)`` along real flows.

    Returns the worst ratio ``measured / bound`` per inequality over
    ``n_traj * n_t`` random samples ``(t, xi, e)``; every ratio must be ``<= 1``.
    The envelope ``R_e`` is measured at the sampled ``(xi, e)`` only, which
    makes the right-hand sides no larger than with the supremum over ``mu <= e``.
    """
    cfg = (cfg or OrbitConfig(N=N)).with_N(N)
    rng = np.random.default_rng(seed)
    T = cfg.half_period
    worst = {k: 0.0 for k in ("a", "da_dz", "da_dr", "dr_de", "dz_de", "da_de", "p")}
    for _ in range(n_traj):
        xi = float(rng.uniform(0.0, x_star))
        e = float(rng.uniform(0.0, e_max))
        tr = flow(xi, e, T, cfg)
        R_e = canonical_from_trajectory(tr).sup_norm
        idx = rng.integers(0, len(tr.times), size=n_t)
        z = tr.z[idx]
        beta = tr.dz_de[idx]
        r, _, dr_de = (arr[idx] for arr in tr.radius())
        s = z ** 2 + r ** 2
        a = (r ** 2 - 2 * z ** 2) / s ** 2.5
        a_z = -3 * z * (3 * r ** 2 - 2 * z ** 2) / s ** 3.5
        a_r = -3 * r * (r ** 2 - 4 * z ** 2) / s ** 3.5
        a_e = a_z * beta + a_r * dr_de
        p = 3 * z * r * dr_de / s ** 2.5
        sig = 16 / (1 - e) ** 3
        bounds = {
            "a": sig,
            "da_dz": 12 * sig / (1 - e),
            "da_dr": 12 * sig / (1 - e),
            "dr_de": 1 / (2 * (1 - e)),
            "dz_de": 3 * N * math.pi * sig * R_e ** 2 / (2 * (1 - e)),
            "da_de": 6 * sig * (1 + 3 * N * math.pi * sig * R_e ** 2) / (1 - e) ** 2,
            "p": 12 / (1 - e) ** 4,
        }
        measured = {"a": a, "da_dz": a_z, "da_dr": a_r, "dr_de": dr_de, "dz_de": beta,
                    "da_de": a_e, "p": p}
        for k in worst:
            worst[k] = max(worst[k], float(np.max(np.abs(measured[k]))) / bounds[k])
    return worst


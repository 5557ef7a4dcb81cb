"""Shooting for the radial equation ``u'' + (D-1) u'/r = rho(r) f(u)``.

Trajectories are integrated in ``s = ln r`` with state ``(u, q)``, ``q = r u'``:

    du/ds = q,    dq/ds = (2 - D) q + r^2 rho(r) f(u),

using an embedded 8(5,3) Runge-Kutta pair with dense output.  Boundedness is
certified rather than guessed: since ``r^(D-1) u'`` is nondecreasing,
``B0 = u + q/(D-2)`` bounds the limit from below, and if a nondecreasing
majorant ``g >= f`` admits ``M`` with ``B0 + g(M) T(r)/(D-2) < M``
(``T(r) = int_r^inf t rho``) then ``u < M`` forever and the limit lies in
``[B0, B0 + g(M) T(r)/(D-2)]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Union

import numpy as np
from scipy import integrate, optimize

from .errors import (DomainError, KOViolation, NoSeparatrixError, NoSolutionError,
                     TrajectoryInvalidError)
from .nonlinearity import Nonlinearity, eval_F, increasing_majorant, ko_integral
from .potential import RadialPotential, constant, newtonian_potential, tail_rho
from .quadrature import integrate_to_infinity

log = logging.getLogger(__name__)

__all__ = [
    "ShootingConfig",
    "BoundedLimit",
    "EntireLarge",
    "FiniteRadiusBlowup",
    "Indeterminate",
    "RadialSolution",
    "integrate_ivp",
    "classify_probe",
    "find_els",
    "find_bounded",
    "limit_of",
    "blowup_radius",
    "boundary_blowup_ball",
    "fit_boundary_coefficient",
]


@dataclass(frozen=True)
class ShootingConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    r_max: float = 1e3
    blowup_threshold: float = 1e12
    max_bisect: int = 200
    r0: Optional[float] = None
    # bisection probes run far past r_max and stop on a rigorous verdict
    probe_r_max: float = 1e30
    z_blowup: float = 1e3          # r u'/u beyond this signals blow-up
    value_cap: float = 1e100
    bracket_rtol: float = 1e-12
    certify_eta: float = 1e-2
    r_start: float = 1e-4          # series start for a regular center
    n_per_decade: int = 200
    limit_tol: float = 1e-10       # enclosure width for find_bounded, relative to beta
    error_estimate: bool = False

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.blowup_threshold > 0):
            raise DomainError("tolerances and thresholds must be positive")
        if self.r0 is not None and not (self.r_max > self.r0 >= 0):
            raise DomainError("need r_max > r0 >= 0")


@dataclass(frozen=True)
class BoundedLimit:
    beta: float
    lower: float
    upper: float
    kind: str = "BoundedLimit"


@dataclass(frozen=True)
class EntireLarge:
    kind: str = "EntireLarge"


@dataclass(frozen=True)
class FiniteRadiusBlowup:
    r_star: float
    lower: float
    upper: float
    kind: str = "FiniteRadiusBlowup"


@dataclass(frozen=True)
class Indeterminate:
    reason: str
    kind: str = "Indeterminate"


Classification = Union[BoundedLimit, EntireLarge, FiniteRadiusBlowup, Indeterminate]


@dataclass
class RadialSolution:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    classification: Classification
    D: int
    u0: float
    du0: float
    r0: float
    trace: list = field(default_factory=list)
    dense: Optional[Callable[[float], np.ndarray]] = field(default=None, repr=False)
    s_span: tuple = (0.0, 0.0)
    err_estimate: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def flux(self) -> np.ndarray:
        """``r^(D-1) u'`` on the grid."""
        return self.r ** (self.D - 1) * self.du

    def state(self, r: float) -> tuple[float, float]:
        """(u, u') at radius r from the dense output."""
        if self.dense is None:
            raise ValueError("no dense output stored")
        y = self.dense(math.log(r))
        return float(y[0]), float(y[1]) / r


# ---------------------------------------------------------------------------
# integration core


def _resolve_r0(pot: RadialPotential, cfg: ShootingConfig) -> float:
    if cfg.r0 is not None:
        return cfg.r0
    return 1.0 if pot.alpha is not None else 0.0


def _rhs(nl: Nonlinearity, pot: RadialPotential, D: int):
    f = nl.f
    rho = pot.rho_scalar

    def fun(s, y):
        r = math.exp(s)
        u, q = y
        fu = float(f(u if u > 0 else 0.0))
        return [q, (2.0 - D) * q + r * r * rho(r) * fu]

    return fun


class _Certificate:
    """Event function for the boundedness certificate; positive means bounded.

    With ``A = u + max(q, 0)/(D-2)`` the trajectory satisfies
    ``u(s) <= A + g(M) T(r)/(D-2)`` for as long as ``u <= M``, so
    ``A + g(M) T/(D-2) < M`` keeps u below M forever.
    """

    def __init__(self, g, pot, D, eta, width=0.0):
        self.g, self.pot, self.D, self.eta, self.width = g, pot, D, eta, width

    def bounds(self, s, y):
        r = math.exp(s)
        u, q = y
        B0 = u + q / (self.D - 2.0)
        A = u + max(q, 0.0) / (self.D - 2.0)
        T = tail_rho(self.pot, r)
        return B0, A, T, u

    def _slack(self, A):
        return max(self.eta * A, self.width)

    def margin(self, s, y) -> float:
        B0, A, T, u = self.bounds(s, y)
        if not (B0 > 0 and u > 0) or not math.isfinite(T):
            return -1.0
        M = A + self._slack(A)
        return (M - A - float(self.g(M)) * T / (self.D - 2.0)) / A

    def __call__(self, s, y):
        # fire at half the attainable margin so the certificate holds strictly at the event
        u, q = y
        A = u + max(q, 0.0) / (self.D - 2.0)
        half = 0.5 * self._slack(A) / A if A > 0 else 0.0
        return self.margin(s, y) - half

    def enclosure(self, s, y) -> Optional[tuple[float, float, float]]:
        """(lower, upper, estimate) for the limit, or None when not certified."""
        if self.margin(s, y) <= 0:
            return None
        B0, A, T, u = self.bounds(s, y)
        M = A + self._slack(A)
        c = T / (self.D - 2.0)
        hi = A + float(self.g(M)) * c
        for _ in range(20):
            nxt = A + float(self.g(hi)) * c
            if nxt >= hi:
                break
            hi = nxt
        # the remaining flux contributes about f(u) T/(D-2) when u has settled
        est = min(max(B0 + float(self.g(u)) * c, B0), hi)
        return B0, hi, est


def _solve(fun, s0, y0, s1, events, cfg, dense=True):
    return integrate.solve_ivp(fun, (s0, s1), y0, method="DOP853", rtol=cfg.rel_tol,
                               atol=cfg.abs_tol, events=events, dense_output=dense)


def blowup_radius(nl: Nonlinearity, pot: RadialPotential, r_e: float, u_e: float,
                  du_e: float, D: int) -> tuple[float, float, float]:
    """Enclose the blow-up radius from a state ``(r_e, u_e, u'_e)`` with large u.

    With ``tau(rho) = int_(u_e)^inf du / sqrt(u_e'^2 + 2 rho (F(u) - F(u_e)))``,
    energy estimates on ``[r_e, r*]`` give
    ``tau(rho_max) <= r* - r_e <= exp((D-1) delta / r_e) tau(rho_min)``.
    Returns (lower, upper, estimate).
    """
    Fe = eval_F(nl, u_e)

    def tau(rho_val):
        def g(x):
            with np.errstate(over="ignore", invalid="ignore"):
                dF = eval_F(nl, u_e / x) - Fe
            if not math.isfinite(dF):
                return 0.0
            return u_e / (x * x * math.sqrt(du_e * du_e + 2.0 * rho_val * max(dF, 0.0)))

        val, _ = integrate.quad(g, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=400)
        return val

    t0 = tau(pot.rho_scalar(r_e))
    delta = 2.0 * t0
    for _ in range(20):
        rr = np.linspace(r_e, r_e + delta, 65)
        rv = np.array([pot.rho_scalar(x) for x in rr])
        lo_t = tau(rv.max())
        hi_base = tau(rv.min())
        up = hi_base
        for _ in range(100):
            if (D - 1) * up / r_e > 700.0:
                return r_e + lo_t, math.inf, r_e + t0
            nxt = math.exp((D - 1) * up / r_e) * hi_base
            if abs(nxt - up) <= 1e-15 * nxt:
                break
            up = nxt
        if up <= delta:
            break
        delta = 2.0 * up
    return r_e + lo_t, r_e + up, r_e + t0


def _grid_from_dense(sol, s0, s1, n_per_decade):
    n = max(int(math.ceil((s1 - s0) / math.log(10.0) * n_per_decade)), 2) + 1
    s = np.linspace(s0, s1, n)
    y = sol.sol(s)
    r = np.exp(s)
    return r, y[0], y[1] / r


def _f_bar(nl):
    return increasing_majorant(nl)


def _exceeds_w_infty(nl, pot, D, r, u) -> Optional[bool]:
    """True when ``int_u^inf ds / fbar <= U(r)``, i.e. u lies above w_infinity."""
    fb = _f_bar(nl)
    res = integrate_to_infinity(lambda x: 1.0 / float(fb.f(x)), u, rtol=1e-8)
    if not res.finite:
        return None
    return res.value <= newtonian_potential(pot, r, D)


def integrate_ivp(nl: Nonlinearity, pot: RadialPotential, u0: float, du0: float,
                  cfg: ShootingConfig = ShootingConfig(), D: int = 3) -> RadialSolution:
    """Integrate from ``r0`` to ``cfg.r_max`` and classify the trajectory."""
    if not u0 > 0:
        raise DomainError("u0 must be positive")
    if D < 3:
        raise DomainError("D must be at least 3")
    r0 = _resolve_r0(pot, cfg)
    fun = _rhs(nl, pot, D)
    if r0 > 0:
        s0, y0 = math.log(r0), [u0, r0 * du0]
    else:
        if du0 != 0:
            raise DomainError("a regular center needs du0 = 0")
        rs = cfg.r_start
        a = pot.rho_scalar(0.0) * float(nl.f(u0))
        s0, y0 = math.log(rs), [u0 + a * rs * rs / (2 * D), a * rs * rs / D]
    s1 = math.log(cfg.r_max)

    def ev_zero(s, y):
        return y[0]

    ev_zero.terminal, ev_zero.direction = True, -1

    def ev_blow(s, y):
        return y[0] - cfg.blowup_threshold

    ev_blow.terminal, ev_blow.direction = True, 1

    # integrate toward probe_r_max and stop at r_max by an event, so the step
    # sequence matches the bisection probes exactly
    s_stop = s1
    s1 = max(math.log(cfg.probe_r_max), s_stop)

    def ev_rmax(s, y):
        return s - s_stop

    ev_rmax.terminal, ev_rmax.direction = True, 1

    fin_pot = math.isfinite(tail_rho(pot, max(r0, 1.0)))
    events = [ev_zero, ev_blow, ev_rmax]
    cert = None
    if fin_pot:
        cert = _Certificate(_f_bar(nl).f, pot, D, cfg.certify_eta)
        cert.direction = 1
        cert.terminal = False
        events.append(cert)

    with np.errstate(over="ignore", invalid="ignore"):
        sol = _solve(fun, s0, y0, s1, events, cfg)
    s_end = float(sol.t[-1])
    y_end = sol.y[:, -1]
    r, u, du = _grid_from_dense(sol, s0, s_end, cfg.n_per_decade)
    if r0 == 0:
        r, u, du = np.r_[0.0, r], np.r_[u0, u], np.r_[0.0, du]
    meta = {"status": int(sol.status), "nfev": int(sol.nfev)}

    if len(sol.t_events[0]):
        raise TrajectoryInvalidError(f"u reached 0 at r = {math.exp(sol.t_events[0][0]):.6g}")

    cls: Classification
    r_end = math.exp(s_end)
    if (len(sol.t_events[1]) or sol.status == -1) and not ko_integral(nl, float(y_end[0])).finite:
        cls = Indeterminate("u passed the blow-up threshold but the Keller-Osserman integral "
                            "diverges, so there is no finite blow-up radius")
    elif len(sol.t_events[1]) or sol.status == -1:
        lo, hi, est = blowup_radius(nl, pot, r_end, float(y_end[0]), float(y_end[1]) / r_end, D)
        cls = FiniteRadiusBlowup(est, lo, hi)
    else:
        enc = cert.enclosure(s_end, y_end) if cert is not None else None
        if enc is None and cert is not None and len(sol.t_events[3]):
            se = float(sol.t_events[3][0])
            enc = cert.enclosure(se, sol.y_events[3][0])
        if enc is not None:
            cls = BoundedLimit(enc[2], enc[0], enc[1])
        else:
            tail = r > r_end / 10.0
            increasing = bool(np.all(np.diff(u[tail]) >= 0))
            above = _exceeds_w_infty(nl, pot, D, r_end, float(y_end[0])) if fin_pot else None
            if increasing and above:
                cls = EntireLarge()
            else:
                cls = Indeterminate("neither certified bounded nor above w_infinity at r_max; "
                                    "raise r_max")
    out = RadialSolution(r, u, du, cls, D, u0, du0, r0, dense=sol.sol, s_span=(s0, s_end),
                         meta=meta)
    if cfg.error_estimate:
        coarse = integrate_ivp(nl, pot, u0, du0, replace(cfg, rel_tol=cfg.rel_tol * 10,
                                                         error_estimate=False), D)
        n = min(len(coarse.u), len(out.u))
        out.err_estimate = float(abs(coarse.u[n - 1] - out.u[n - 1]))
    return out


# ---------------------------------------------------------------------------
# probes and bisection


def classify_probe(nl: Nonlinearity, pot: RadialPotential, u0: float, du0: float,
                   cfg: ShootingConfig = ShootingConfig(), D: int = 3,
                   r0: Optional[float] = None) -> str:
    """Verdict for one shot: 'bounded', 'blowup', 'invalid' or 'indeterminate'."""
    r0 = _resolve_r0(pot, cfg) if r0 is None else r0
    fun = _rhs(nl, pot, D)
    if r0 > 0:
        s0, y0 = math.log(r0), [u0, r0 * du0]
    else:
        rs = cfg.r_start
        a = pot.rho_scalar(0.0) * float(nl.f(u0))
        s0, y0 = math.log(rs), [u0 + a * rs * rs / (2 * D), a * rs * rs / D]

    def ev_zero(s, y):
        return y[0]

    ev_zero.terminal, ev_zero.direction = True, -1

    def ev_z(s, y):
        return y[1] - cfg.z_blowup * y[0]

    ev_z.terminal, ev_z.direction = True, 1

    def ev_cap(s, y):
        return y[0] - cfg.value_cap

    ev_cap.terminal, ev_cap.direction = True, 1

    cert = _Certificate(_f_bar(nl).f, pot, D, cfg.certify_eta)
    cert.terminal, cert.direction = True, 1
    with np.errstate(over="ignore", invalid="ignore"):
        sol = _solve(fun, s0, y0, math.log(cfg.probe_r_max), [ev_zero, ev_z, ev_cap, cert], cfg,
                     dense=False)
    if len(sol.t_events[0]):
        return "invalid"
    if len(sol.t_events[1]) or sol.status == -1:
        return "blowup"
    if len(sol.t_events[3]) or cert.margin(sol.t[-1], sol.y[:, -1]) > 0:
        return "bounded"
    return "indeterminate"


_LOWER = ("bounded", "invalid")


def find_els(nl: Nonlinearity, pot: RadialPotential, u1: float,
             cfg: ShootingConfig = ShootingConfig(), D: int = 3) -> RadialSolution:
    """Separatrix slope ``b* = u'(r0)`` between bounded and blow-up shots from ``u(r0) = u1``."""
    r0 = cfg.r0 if cfg.r0 is not None else 1.0
    if r0 <= 0:
        raise DomainError("find_els poses data at r0 > 0")
    trace = []

    def probe(b):
        v = classify_probe(nl, pot, u1, b, cfg, D, r0)
        trace.append({"b": b, "verdict": v})
        if v == "indeterminate":
            log.info("indeterminate probe at b=%.17g; treated as blow-up side", b)
        return v

    lo, hi = 0.0, 1.0
    v_lo = probe(lo)
    step = 1.0
    n = 0
    while v_lo not in _LOWER:
        hi = lo
        lo -= step
        step *= 2.0
        v_lo = probe(lo)
        n += 1
        if n > 60:
            raise NoSeparatrixError("no bounded shot found", lower=v_lo, upper=None)
    if hi == 1.0:
        v_hi = probe(hi)
        n = 0
        while v_hi in _LOWER:
            lo, hi = hi, hi * 2.0
            v_hi = probe(hi)
            n += 1
            if n > 60:
                raise NoSeparatrixError("no blow-up shot found", lower="bounded", upper=v_hi)
    it = 0
    while hi - lo > cfg.bracket_rtol * max(abs(lo), abs(hi)):
        if it >= cfg.max_bisect:
            raise NoSeparatrixError("bisection budget exhausted", lower=lo, upper=hi)
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if probe(mid) in _LOWER:
            lo = mid
        else:
            hi = mid
        it += 1
    b = 0.5 * (lo + hi)
    sol = integrate_ivp(nl, pot, u1, b, replace(cfg, r0=r0), D)
    sol.trace = trace
    sol.meta.update({"b_lo": lo, "b_hi": hi, "b_star": b, "iterations": it})
    return sol


def limit_of(nl: Nonlinearity, pot: RadialPotential, u0: float, cfg: ShootingConfig,
             D: int, width: float, r0: float) -> tuple[float, float, float]:
    """Certified enclosure (lower, upper, estimate) of ``lim u`` for the shot ``u(r0)=u0, u'(r0)=0``.

    Returns ``(inf, inf, inf)`` when the shot blows up.
    """
    fun = _rhs(nl, pot, D)
    if r0 > 0:
        s0, y0 = math.log(r0), [u0, 0.0]
    else:
        rs = cfg.r_start
        a = pot.rho_scalar(0.0) * float(nl.f(u0))
        s0, y0 = math.log(rs), [u0 + a * rs * rs / (2 * D), a * rs * rs / D]

    def ev_z(s, y):
        return y[1] - cfg.z_blowup * y[0]

    ev_z.terminal, ev_z.direction = True, 1
    cert = _Certificate(_f_bar(nl).f, pot, D, 0.0, width=width)
    cert.terminal, cert.direction = True, 1
    with np.errstate(over="ignore", invalid="ignore"):
        sol = _solve(fun, s0, y0, math.log(cfg.probe_r_max), [ev_z, cert], cfg, dense=False)
    if len(sol.t_events[0]) or sol.status == -1:
        return math.inf, math.inf, math.inf
    enc = cert.enclosure(sol.t[-1], sol.y[:, -1])
    if enc is None:
        raise NoSolutionError("limit could not be certified before probe_r_max")
    return enc


def find_bounded(nl: Nonlinearity, pot: RadialPotential, beta: float,
                 cfg: ShootingConfig = ShootingConfig(), D: int = 3,
                 tol: float = 1e-9) -> RadialSolution:
    """Bisection on ``u0`` (with ``u'(r0) = 0``) so that ``lim u = beta``."""
    if not beta > 0:
        raise DomainError("beta must be positive")
    r0 = cfg.r0 if cfg.r0 is not None else (0.0 if pot.regular else 1.0)
    width = cfg.limit_tol * beta
    trace = []

    def lim(u0):
        enc = limit_of(nl, pot, u0, cfg, D, width, r0)
        trace.append({"u0": u0, "limit": enc[2], "lower": enc[0], "upper": enc[1]})
        return enc

    lo, hi = beta * 1e-12, beta
    if lim(lo)[2] >= beta:
        raise NoSolutionError("beta unreachable: even tiny data overshoot")
    it = 0
    u0 = 0.5 * (lo + hi)
    while it < cfg.max_bisect:
        u0 = 0.5 * (lo + hi)
        enc = lim(u0)
        if abs(enc[2] - beta) <= tol * beta:
            break
        if enc[2] > beta:
            hi = u0
        else:
            lo = u0
        if hi - lo <= 1e-15 * hi:
            break
        it += 1
    else:
        raise NoSolutionError("bisection budget exhausted")
    if not math.isfinite(trace[-1]["limit"]):
        raise NoSolutionError("beta unreachable below blow-up")
    sol = integrate_ivp(nl, pot, u0, 0.0, replace(cfg, r0=r0), D)
    last = trace[-1]
    sol.classification = BoundedLimit(last["limit"], last["lower"], last["upper"])
    sol.trace = trace
    sol.meta.update({"iterations": it})
    return sol


# ---------------------------------------------------------------------------
# boundary blow-up on a ball


def _rstar_from_center(nl, pot, u0, cfg, D) -> tuple[float, Any]:
    c = replace(cfg, r0=0.0, r_max=cfg.probe_r_max)
    sol = integrate_ivp(nl, pot, u0, 0.0, c, D)
    if not isinstance(sol.classification, FiniteRadiusBlowup):
        raise KOViolation("no blow-up at finite radius; f may violate Keller-Osserman")
    return sol.classification.r_star, sol


def boundary_blowup_ball(nl: Nonlinearity, m: float, R: float,
                         cfg: ShootingConfig = ShootingConfig(), D: int = 3) -> RadialSolution:
    """Radial solution on ``B(0, R)`` with constant density m that blows up at ``|x| = R``."""
    if not (m > 0 and R > 0):
        raise DomainError("m and R must be positive")
    pot = constant(m)
    trace = []

    def h(x):
        rs, _ = _rstar_from_center(nl, pot, math.exp(x), cfg, D)
        trace.append({"u0": math.exp(x), "r_star": rs})
        return math.log(rs / R)

    x_lo, x_hi = 0.0, 0.0
    h0 = h(0.0)
    if h0 > 0:
        x_hi = 0.0
        while h(x_hi) > 0:
            x_lo, x_hi = x_hi, x_hi + math.log(10.0)
    else:
        x_lo = 0.0
        while h(x_lo) < 0:
            x_hi, x_lo = x_lo, x_lo - math.log(10.0)
    x = optimize.brentq(h, x_lo, x_hi, xtol=1e-14, rtol=1e-14, maxiter=cfg.max_bisect)
    u0 = math.exp(x)
    rs, sol = _rstar_from_center(nl, pot, u0, cfg, D)
    sol.trace = trace
    sol.meta.update({"R": R, "m": m, "r_star": rs})
    return sol


def fit_boundary_coefficient(sol: RadialSolution, R: float, decades: float = 1.0) -> float:
    """Least-squares ``kappa`` in ``u ~ kappa / (R - r)^2`` over the last decades before R."""
    d = R - sol.r
    ok = d > 0
    d, u = d[ok], sol.u[ok]
    dmin = d.min()
    sel = d <= dmin * 10.0**decades
    x = d[sel] ** -2.0
    return float(np.sum(u[sel] * x) / np.sum(x * x))

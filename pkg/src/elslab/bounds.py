"""Explicit bounds and functionals along radial solutions.

* ``w_beta``: the subsolution defined by ``int_w^beta ds/fbar = U(r)``.
* the implicit growth lower bound ``int_u^inf ds/f <= U``.
* the ceiling ``Gamma(r) = Phi^{-1}(c r^(1-alpha/2))``.
* the hypothesis ``f(u)/u <= C / Phi(u)^2``.
* the energy ``P = u'^2/rho - 2F(u)`` against ``C_R / (r^(2D-2) rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, interpolate

from .errors import DomainError, InapplicableError, OutOfRangeError
from .nonlinearity import (Nonlinearity, TailInverter, eval_F, monotone_envelope, phi,
                           phi_inverse)
from .potential import RadialPotential, newtonian_potential
from .quadrature import integrate_to_infinity
from .shooting import RadialSolution

__all__ = [
    "BoundReport",
    "subsolution_w_beta",
    "implicit_lower_bound",
    "gamma_bound",
    "largest_gamma_c",
    "fiddgr_check",
    "energy_P_radial",
    "radial_laplacian",
]


@dataclass
class BoundReport:
    grid: np.ndarray
    primal: np.ndarray
    bound: np.ndarray
    margin: np.ndarray
    verdict: bool
    meta: dict = field(default_factory=dict)

    def rows(self):
        return np.column_stack([self.grid, self.primal, self.bound, self.margin])


def radial_laplacian(r: np.ndarray, w: np.ndarray, D: int) -> np.ndarray:
    """Three-point ``w'' + (D-1) w'/r`` at interior points of a nonuniform grid."""
    h0 = r[1:-1] - r[:-2]
    h1 = r[2:] - r[1:-1]
    wm, wc, wp = w[:-2], w[1:-1], w[2:]
    d2 = 2.0 * (wm * h1 - wc * (h0 + h1) + wp * h0) / (h0 * h1 * (h0 + h1))
    d1 = (wp * h0 * h0 - wm * h1 * h1 + wc * (h1 * h1 - h0 * h0)) / (h0 * h1 * (h0 + h1))
    return d2 + (D - 1) * d1 / r[1:-1]


# ---------------------------------------------------------------------------
# subsolution


def _w_values(inv: TailInverter, U: np.ndarray) -> np.ndarray:
    out = np.empty_like(U)
    for i, target in enumerate(U):
        try:
            out[i] = inv.solve(float(target), atol=1e-13)
        except OutOfRangeError:
            out[i] = np.nan
    return out


def subsolution_w_beta(nl: Nonlinearity, pot: RadialPotential, beta: float, r_grid,
                       D: int = 3, nl_bar: Optional[Nonlinearity] = None,
                       rtol_scale: float = 1e-6) -> BoundReport:
    """Evaluate ``w_beta`` on ``r_grid`` and check ``Lap w - rho f(w) >= -tol`` by finite differences.

    ``tol = rtol_scale * max(rho f(w))`` plus a Richardson estimate of the
    local truncation error (difference between the h and 2h stencils).
    ``margin`` holds the residual at interior points.
    """
    r = np.asarray(r_grid, dtype=float)
    if np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise DomainError("r_grid must be positive and increasing")
    # past t_cut the envelope hands over to the catalog majorant, keeping the
    # improper integral for beta = inf finite in cost
    fb = nl_bar if nl_bar is not None else monotone_envelope(nl, t_cut=1e3)
    U = newtonian_potential(pot, r, D)
    inv = TailInverter(fb, beta)
    w = _w_values(inv, U)
    defined = np.isfinite(w)
    rho = pot.rho(r)
    fw = np.where(defined, np.asarray(nl.f(np.where(defined, w, 0.0)), float), np.nan)
    lap = np.full_like(r, np.nan)
    lap[1:-1] = radial_laplacian(r, w, D)
    res = lap - rho * fw
    # same stencil on every other point gives a Richardson truncation estimate
    res2 = np.full_like(r, np.nan)
    ev = np.arange(0, len(r), 2)
    if len(ev) >= 3:
        mid = ev[1:-1]
        res2[mid] = radial_laplacian(r[ev], w[ev], D) - rho[mid] * fw[mid]
    trunc = np.abs(res - res2) / 3.0
    # odd nodes borrow the larger estimate of their neighbours
    odd = np.arange(1, len(r) - 1, 2)
    trunc[odd] = np.fmax(trunc[odd - 1], trunc[np.minimum(odd + 1, len(r) - 1)])
    trunc = np.where(np.isfinite(trunc), trunc, 0.0)
    scale = float(np.nanmax(rho * fw))
    tol = rtol_scale * scale + trunc
    interior = np.zeros_like(r, dtype=bool)
    interior[1:-1] = True
    ok = interior & defined
    ok[1:-1] &= defined[:-2] & defined[2:]
    resid_ok = bool(np.all(res[ok] >= -tol[ok]))
    below = bool(np.all(w[defined] < beta))
    verdict = resid_ok and below
    meta = {"beta": beta, "scale": scale, "undefined_points": int((~defined).sum()),
            "min_residual": float(np.nanmin(res[ok])) if ok.any() else float("nan"),
            "max_trunc": float(trunc[ok].max()) if ok.any() else 0.0,
            "below_beta": below, "tail_gap": float(beta - w[defined][-1]) if defined.any() else None}
    return BoundReport(grid=r, primal=w, bound=np.full_like(r, beta), margin=res,
                       verdict=verdict, meta=meta)


# ---------------------------------------------------------------------------
# implicit lower bound


def _tail_of_reciprocal(nl: Nonlinearity, u: np.ndarray) -> np.ndarray:
    """``int_u^inf ds/f(s)`` for every entry of u (one improper integral, then segments)."""
    order = np.argsort(u)
    us = u[order]
    top = integrate_to_infinity(lambda s: 1.0 / float(nl.f(s)), float(us[-1]), rtol=1e-12)
    if not top.finite:
        raise InapplicableError("int^inf ds/f diverges")
    vals = np.empty_like(us)
    vals[-1] = top.value
    g = nl.f
    for k in range(len(us) - 2, -1, -1):
        a, b = us[k], us[k + 1]
        if b > a:
            seg, _ = integrate.quad(lambda y: math.exp(y) / float(g(math.exp(y))),
                                    math.log(a), math.log(b), epsabs=0.0, epsrel=1e-13)
        else:
            seg = 0.0
        vals[k] = vals[k + 1] + seg
    out = np.empty_like(vals)
    out[order] = vals
    return out


def implicit_lower_bound(sol: RadialSolution, nl: Nonlinearity, pot: RadialPotential,
                         slack: float = 1e-9) -> BoundReport:
    """Check ``int_{u(r)}^inf ds/f(s) <= U(r)``; margin is ``U - int``."""
    if not nl.nondecreasing:
        raise InapplicableError("the implicit bound needs a nondecreasing f")
    sel = sol.r > 0
    r, u = sol.r[sel], sol.u[sel]
    lhs = _tail_of_reciprocal(nl, u)
    U = newtonian_potential(pot, r, sol.D)
    margin = U - lhs
    return BoundReport(grid=r, primal=lhs, bound=U, margin=margin,
                       verdict=bool(margin.min() >= -slack),
                       meta={"min_margin": float(margin.min())})


# ---------------------------------------------------------------------------
# Gamma ceiling


class _PhiTable:
    """Log-log monotone interpolant of Phi, used to seed inversions."""

    def __init__(self, nl: Nonlinearity, u_lo: float, u_hi: float, n: int = 160):
        self.nl = nl
        self.u = np.geomspace(u_lo, u_hi, n)
        self.p = np.array([phi(nl, x) for x in self.u])
        lx, ly = np.log(self.u), np.log(self.p)
        # Phi is decreasing: interpolate log u as a function of -log Phi
        self._inv = interpolate.PchipInterpolator(-ly, lx)
        self._lo, self._hi = -ly[0], -ly[-1]

    def inverse(self, y: float) -> float:
        x = -math.log(y)
        if not (self._lo <= x <= self._hi):
            return phi_inverse(self.nl, y)
        lu = float(self._inv(x))
        # Newton on log Phi against log u, slope taken from the interpolant
        slope = -1.0 / float(self._inv.derivative()(x))
        for _ in range(8):
            pu = phi(self.nl, math.exp(lu))
            if abs(pu - y) <= 1e-12 * y:
                break
            lu += (math.log(y) - math.log(pu)) / slope
        return math.exp(lu)


def gamma_bound(sol: RadialSolution, nl: Nonlinearity, alpha: float, c: float,
                rtol: float = 1e-9, r_min: Optional[float] = None) -> BoundReport:
    """``Gamma(r) = Phi^{-1}(c r^(1-alpha/2))`` and ``margin = Gamma - u`` on the solution grid."""
    if not (0 < c < 1):
        raise DomainError("c must lie in (0, 1)")
    if not alpha > 2:
        raise DomainError("alpha must exceed 2")
    sel = sol.r > 0
    r, u = sol.r[sel], sol.u[sel]
    arg = c * r ** (1.0 - 0.5 * alpha)
    phi_M = phi(nl, nl.M) if nl.M > 0 else math.inf
    valid = arg < phi_M
    if r_min is None:
        r_min = float(r[valid][0]) if valid.any() else math.inf
    valid &= r >= r_min
    # invert on a table spanning the needed range, then polish
    ys = arg[valid]
    G = np.full_like(r, np.nan)
    if ys.size:
        u_lo = phi_inverse(nl, float(ys.max())) * 0.5
        u_hi = phi_inverse(nl, float(ys.min())) * 2.0
        tab = _PhiTable(nl, u_lo, u_hi)
        G[valid] = [tab.inverse(float(y)) for y in ys]
    margin = G - u
    ok = bool(np.all(margin[valid] >= -rtol * G[valid])) if valid.any() else False
    return BoundReport(grid=r, primal=u, bound=G, margin=margin, verdict=ok,
                       meta={"r_min": r_min, "c": c,
                             "ratio_tail": float(G[valid][-1] / u[valid][-1]) if valid.any() else None})


def largest_gamma_c(sol: RadialSolution, nl: Nonlinearity, alpha: float,
                    r_min: float = 1.0) -> float:
    """Largest c with ``u <= Gamma`` on the grid: ``min_r Phi(u(r)) r^(alpha/2-1)``."""
    sel = (sol.r >= r_min) & (sol.u >= max(nl.M, 0.0))
    r, u = sol.r[sel], sol.u[sel]
    idx = np.unique(np.linspace(0, len(r) - 1, min(len(r), 400)).astype(int))
    return float(min(phi(nl, float(u[i])) * r[i] ** (0.5 * alpha - 1.0) for i in idx))


# ---------------------------------------------------------------------------
# f(u)/u <= C / Phi^2


def fiddgr_check(nl: Nonlinearity, M: Optional[float] = None, u_hi: float = 1e6,
                 n: int = 121, u_lo: Optional[float] = None, stab: float = 0.05) -> dict:
    """Sup of ``(f(u)/u) Phi(u)^2`` on a log grid; holds when the running sup stabilizes.

    Stabilization means the running sup over the whole grid exceeds the one
    that stops a decade short of the top by at most ``stab`` (relative).
    """
    M = nl.M if M is None else M
    if not math.isfinite(M):
        raise InapplicableError("f(u)/u is not eventually nondecreasing")
    lo = u_lo if u_lo is not None else max(M, 1.0)
    while not (math.isfinite(eval_F(nl, u_hi)) and math.isfinite(float(nl.f(u_hi)))
               and eval_F(nl, u_hi) < 1e250):
        u_hi = 0.5 * u_hi
    u = np.geomspace(lo, u_hi, n)
    prod = np.array([float(nl.f(x)) / x * phi(nl, float(x)) ** 2 for x in u])
    run = np.maximum.accumulate(prod)
    cut = u <= u_hi / 10.0
    prev = run[cut][-1] if cut.any() else run[0]
    holds = bool(run[-1] <= (1.0 + stab) * prev)
    return {"holds": holds, "best_C": float(run[-1]), "u": u, "product": prod}


# ---------------------------------------------------------------------------
# energy functional


def energy_P_radial(sol: RadialSolution, pot: RadialPotential, nl: Nonlinearity, R: float,
                    err_rel: float = 1e-9) -> BoundReport:
    """``P = u'^2/rho - 2F(u)`` on ``[R, r_end]`` against ``2 C_R / (r^(2D-2) rho)``.

    ``C_R = R^(2D-2) u'(R)^2 / 2``.  Requires ``r^(2D-2) rho`` nondecreasing
    on the range; slack is ``10 * err_rel * (u'^2/rho + 2F)``.
    """
    D = sol.D
    sel = sol.r >= R
    r, u, du = sol.r[sel], sol.u[sel], sol.du[sel]
    if len(r) < 2:
        raise DomainError("R lies beyond the solution grid")
    rho = pot.rho(r)
    h = r ** (2 * D - 2) * rho
    if np.any(np.diff(h) < -1e-12 * h[1:]):
        raise InapplicableError("r^(2D-2) rho is not nondecreasing beyond R")
    if sol.dense is not None:
        uR, duR = sol.state(R)
    else:
        uR, duR = u[0], du[0]
    C_R = R ** (2 * D - 2) * duR**2 / 2.0
    F = np.array([eval_F(nl, x) for x in u])
    kin = du**2 / rho
    P = kin - 2.0 * F
    bound = 2.0 * C_R / h
    slack = 10.0 * err_rel * (kin + 2.0 * F)
    margin = bound - P
    return BoundReport(grid=r, primal=P, bound=bound, margin=margin,
                       verdict=bool(np.all(margin >= -slack)),
                       meta={"C_R": C_R, "sup_P": float(P.max()),
                             "max_rel_P": float(np.max(np.abs(P) / np.maximum(F, 1e-300)))})

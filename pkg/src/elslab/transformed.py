"""Transformed variables ``t = r^(1 - alpha/2)``, ``v(t) = u(r)``, ``V = -dv/dt``.

For ``rho = r^-alpha`` the radial equation becomes
``v_tt + (K/t) v_t = 4 f(v) / (alpha - 2)^2`` with
``K = (alpha - 2D + 2)/(alpha - 2) < 1``.  This module maps solutions to the
``(v, t, V)`` profile and evaluates the diagnostics used for uniqueness:
monotonicity of ``t^K V`` in v, the tail limit of ``V^2/F`` when K = 0, and
the decay of the gap between two entire large solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, interpolate, optimize

from .errors import DomainError, OrderingViolationError
from .nonlinearity import Nonlinearity, eval_F
from .potential import RadialPotential
from .shooting import RadialSolution

__all__ = [
    "TransformConfig",
    "ProfileVT",
    "to_transformed",
    "from_transformed",
    "check_tKV_monotone",
    "vequation_residual",
    "hopital_limit",
    "GapReport",
    "uniqueness_gap",
    "gap_envelope",
]


@dataclass(frozen=True)
class TransformConfig:
    alpha: float
    D: int
    gap_points_per_decade: int = 200
    # relative size of |u2 - u1| below which the direct difference is noise
    noise_rtol: float = 1e-6
    hopital_decades: float = 2.0
    hopital_power: float = 1.0

    def __post_init__(self):
        if not self.alpha > 2:
            raise DomainError("alpha must exceed 2")
        if self.D < 3:
            raise DomainError("D must be at least 3")

    @property
    def K(self) -> float:
        return (self.alpha - 2 * self.D + 2) / (self.alpha - 2)


@dataclass
class ProfileVT:
    v: np.ndarray
    t: np.ndarray
    V: np.ndarray
    r: np.ndarray
    alpha: float
    D: int

    @property
    def K(self) -> float:
        return (self.alpha - 2 * self.D + 2) / (self.alpha - 2)


def _arrays(sol):
    if isinstance(sol, RadialSolution):
        return sol.r, sol.u, sol.du
    r, u, du = sol
    return np.asarray(r, float), np.asarray(u, float), np.asarray(du, float)


def to_transformed(sol, cfg: TransformConfig) -> ProfileVT:
    """Chain rule: ``t = r^(1-alpha/2)``, ``v = u``, ``V = (2/(alpha-2)) r^(alpha/2) u'``.

    ``sol`` is a :class:`RadialSolution` or a tuple ``(r, u, du)``.
    """
    r, u, du = _arrays(sol)
    keep = r > 0
    r, u, du = r[keep], u[keep], du[keep]
    if len(r) < 2:
        raise DomainError("profile needs at least two points")
    if not np.all(np.diff(u) > 0):
        raise DomainError("u is not strictly increasing; cannot invert v(t)")
    a = cfg.alpha
    t = r ** (1.0 - 0.5 * a)
    V = (2.0 / (a - 2.0)) * r ** (0.5 * a) * du
    return ProfileVT(v=u.copy(), t=t, V=V, r=r.copy(), alpha=a, D=cfg.D)


def from_transformed(profile: ProfileVT) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse map back to ``(r, u, u')``."""
    a = profile.alpha
    r = profile.t ** (1.0 / (1.0 - 0.5 * a))
    du = profile.V * (a - 2.0) / 2.0 * r ** (-0.5 * a)
    return r, profile.v.copy(), du


def check_tKV_monotone(profile: ProfileVT, cfg: Optional[TransformConfig] = None) -> float:
    """Minimum of ``Delta(t^K V) / Delta v`` over consecutive grid points."""
    if len(profile.v) < 2:
        raise DomainError("need at least two profile points")
    K = cfg.K if cfg is not None else profile.K
    w = profile.t**K * profile.V
    return float(np.min(np.diff(w) / np.diff(profile.v)))


def vequation_residual(sol: RadialSolution, nl: Nonlinearity, cfg: TransformConfig,
                       r_lo: float = 1.0, r_hi: Optional[float] = None,
                       step: float = 0.004) -> np.ndarray:
    """Relative residual ``|v_tt + (K/t) v_t - 4 f(v)/(alpha-2)^2| / f(v)``.

    ``v_t = -V`` comes from the chain rule and ``v_tt = -dV/dt`` from a
    five-point central difference in ``ln t`` (spacing ``step``), sampled
    from the dense output.  Valid where ``rho = r^-alpha``.
    """
    if sol.dense is None:
        raise DomainError("solution has no dense output")
    r_hi = sol.r[-1] if r_hi is None else r_hi
    a, K = cfg.alpha, cfg.K
    c = 1.0 - 0.5 * a  # ln t = c ln r
    n = int(abs(c) * math.log(r_hi / r_lo) / step) + 1
    r = np.exp(np.linspace(math.log(r_lo), math.log(r_hi), n))
    H = abs(c) * (math.log(r_hi / r_lo)) / (n - 1)
    y = sol.dense(np.log(r))
    v, du = y[0], y[1] / r
    t = r**c
    V = (2.0 / (a - 2.0)) * r ** (0.5 * a) * du
    # ln t decreases along the grid, hence the sign flip
    dV_dlnt = -(-V[4:] + 8.0 * V[3:-1] - 8.0 * V[1:-3] + V[:-4]) / (12.0 * H)
    tc, Vc = t[2:-2], V[2:-2]
    fv = np.asarray(nl.f(v[2:-2]), dtype=float)
    res = -dV_dlnt / tc - (K / tc) * Vc - 4.0 * fv / (a - 2.0) ** 2
    return np.abs(res) / fv


def hopital_limit(profile: ProfileVT, nl: Nonlinearity, D: int,
                  cfg: Optional[TransformConfig] = None) -> float:
    """Tail limit of ``V^2/F(v)``, extrapolated as ``L + c v^-gamma`` over the last decades."""
    if abs(profile.alpha - (2 * D - 2)) > 1e-12:
        raise DomainError("tail limit needs alpha = 2D - 2 (K = 0)")
    v = profile.v
    if v[-1] < 1e3 * v[0]:
        raise DomainError("profile tail too short: need v_max >= 1e3 v_min")
    decades = cfg.hopital_decades if cfg is not None else 2.0
    gamma = cfg.hopital_power if cfg is not None else 1.0
    sel = v >= v[-1] / 10.0**decades
    vv = v[sel]
    Fv = np.array([eval_F(nl, x) for x in vv])
    ratio = profile.V[sel] ** 2 / Fv
    A = np.vstack([np.ones_like(vv), vv**-gamma]).T
    coef, *_ = np.linalg.lstsq(A, ratio, rcond=None)
    return float(coef[0])


# ---------------------------------------------------------------------------
# gap between two entire large solutions


@dataclass
class GapReport:
    r: np.ndarray
    gap: np.ndarray
    envelope: np.ndarray
    ratio: np.ndarray
    gap_direct: np.ndarray
    noise: np.ndarray
    method: str
    swapped: bool = False
    meta: dict = field(default_factory=dict)

    def rows(self):
        return np.column_stack([self.r, self.gap, self.envelope, self.ratio])


def gap_envelope(r, cfg: TransformConfig):
    """``t^(1-K)`` for K in [0, 1) and ``t`` for K < 0, with ``t = r^(1-alpha/2)``."""
    t = np.asarray(r, float) ** (1.0 - 0.5 * cfg.alpha)
    K = cfg.K
    return t ** (1.0 - K) if K >= 0 else t


def _eval_u(sol, r):
    if isinstance(sol, RadialSolution) and sol.dense is not None:
        return sol.dense(np.log(r))[0]
    rr, u, _ = _arrays(sol)
    return interpolate.PchipInterpolator(np.log(rr), u)(np.log(r))


def _span(sol):
    rr, _, _ = _arrays(sol)
    return float(rr[rr > 0][0]), float(rr[-1])


_GL_X, _GL_W = leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _gap_by_difference_equation(sol1: RadialSolution, nl: Nonlinearity, pot: RadialPotential,
                                D: int, r0: float, R: float, target: float):
    """Solve ``g'' + (D-1) g'/r = rho [f(u1+g) - f(u1)]`` backward from R.

    At R the gap starts on the decaying mode ``g ~ r^lam`` of the frozen
    linearization, ``lam^2 + (D-2) lam = R^2 rho(R) f'(u1(R))``; its amplitude
    is chosen so that ``g(r0) = target``.  The forcing difference is formed as
    ``g * int_0^1 f'(u1 + th g) dth`` (Gauss-Legendre), free of cancellation.
    """
    dense = sol1.dense
    fp = nl.fprime
    rho = pot.rho_scalar
    uR = float(dense(math.log(R))[0])
    k = R * R * rho(R) * float(fp(uR))
    lam = 0.5 * (-(D - 2) - math.sqrt((D - 2) ** 2 + 4.0 * k))

    def fun(s, y):
        r = math.exp(s)
        g, p = y
        u1 = float(dense(s)[0])
        slope = float(np.dot(_GL_W, fp(u1 + _GL_X * g)))
        return [p, (2.0 - D) * p + r * r * rho(r) * g * slope]

    big = 1e6 * abs(target)

    def ev_big(s, y):
        return abs(y[0]) - big

    ev_big.terminal = True

    def shoot(log_eps, dense_out=False):
        eps = math.exp(log_eps)
        return integrate.solve_ivp(fun, (math.log(R), math.log(r0)), [eps, lam * eps],
                                   method="DOP853", rtol=1e-11, atol=1e-300,
                                   events=ev_big, dense_output=dense_out)

    def h(log_eps):
        sol = shoot(log_eps)
        if sol.status == 1:
            return math.log(big / target)
        return math.log(sol.y[0, -1] / target)

    guess = math.log(target) + lam * math.log(R / r0)
    lo, hi = guess - 2.0, guess + 2.0
    while h(lo) > 0:
        lo -= 4.0
    while h(hi) < 0:
        hi += 4.0
    x = optimize.brentq(h, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=200)
    sol = shoot(x, dense_out=True)
    return sol, lam


def uniqueness_gap(p1, p2, cfg: TransformConfig, nl: Optional[Nonlinearity] = None,
                   pot: Optional[RadialPotential] = None,
                   r_grid: Optional[np.ndarray] = None) -> GapReport:
    """Gap ``u2 - u1`` between two ordered solutions, its envelope and their ratio.

    The direct difference of the two trajectories loses all significant
    digits once ``u2 - u1`` falls below the integration error of u itself.
    When nl and pot are given (and the solutions carry dense output), the gap
    is instead computed from the difference equation launched on its decaying
    mode, and the direct difference is kept for cross-checking and for the
    sign test above the noise floor.
    """
    lo1, hi1 = _span(p1)
    lo2, hi2 = _span(p2)
    r0, R = max(lo1, lo2), min(hi1, hi2)
    if r_grid is None:
        n = int(math.ceil(math.log10(R / r0) * cfg.gap_points_per_decade)) + 1
        r_grid = np.geomspace(r0, R, n)
    r_grid = np.asarray(r_grid, float)
    ua, ub = _eval_u(p1, r_grid), _eval_u(p2, r_grid)
    swapped = bool(ua[0] > ub[0])
    if swapped:
        p1, p2, ua, ub = p2, p1, ub, ua
    direct = ub - ua
    noise = cfg.noise_rtol * np.maximum(np.abs(ua), np.abs(ub))
    if np.any(direct < -noise):
        i = int(np.argmax(direct < -noise))
        raise OrderingViolationError(f"solutions cross near r = {r_grid[i]:.6g}")
    env = gap_envelope(r_grid, cfg)
    meta: dict = {}
    if (nl is not None and pot is not None and isinstance(p1, RadialSolution)
            and p1.dense is not None and direct[0] > 0):
        gsol, lam = _gap_by_difference_equation(p1, nl, pot, cfg.D, r0, R, float(direct[0]))
        gap = gsol.sol(np.log(r_grid))[0]
        trusted = np.abs(direct) > 1e3 * noise
        if np.any(trusted):
            meta["cross_check_rel"] = float(np.max(np.abs(gap[trusted] - direct[trusted])
                                                   / direct[trusted]))
        meta["lambda_R"] = lam
        if np.any(gap < 0):
            raise OrderingViolationError("difference-equation gap changes sign")
        method = "difference-equation"
    else:
        gap = direct
        method = "direct"
    return GapReport(r=r_grid, gap=gap, envelope=env, ratio=gap / env, gap_direct=direct,
                     noise=noise, method=method, swapped=swapped, meta=meta)

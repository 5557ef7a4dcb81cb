"""Radial densities rho, the H_rho test, the Newtonian potential, ellipsoid curvature.

The Newtonian potential of a radial density is evaluated by parts,

    U(r) = int_r^inf s^(1-D) m(s) ds = [r^(2-D) m(r) + T(r)] / (D - 2),

with ``m(r) = int_0^r t^(D-1) rho`` and ``T(r) = int_r^inf t rho``.  Both
pieces are single integrals (closed form for the catalog families), which
avoids nested quadrature.
"""

from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import DomainError, PreconditionError
from .quadrature import TailIntegral, integrate_to_infinity

__all__ = [
    "RadialPotential",
    "EllipsoidPotential",
    "model",
    "perturbed",
    "smooth",
    "constant",
    "parse_potential",
    "check_Hrho",
    "newtonian_potential",
    "tail_rho",
    "mass",
    "tilde_rho",
    "ellipsoid_criterion",
    "mean_curvature_margin",
    "sweep_rows",
]


@dataclass(frozen=True)
class RadialPotential:
    rho_scalar: Callable[[float], float]
    alpha: Optional[float] = None
    sigma: Optional[Callable[[float], float]] = None
    sigma_C: Optional[float] = None
    # closed forms, when known: m(r, D) and T(r)
    mass_closed: Optional[Callable[[float, int], float]] = None
    tail_closed: Optional[Callable[[float], float]] = None
    regular: bool = True
    nonincreasing: bool = True
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False, hash=False)

    def rho(self, r):
        if np.ndim(r):
            return np.array([self.rho_scalar(float(x)) for x in np.ravel(r)]).reshape(np.shape(r))
        return self.rho_scalar(float(r))

    __call__ = rho

    @property
    def rho0(self) -> float:
        return self.rho_scalar(0.0)


def _inner(alpha_val: float, blend: bool):
    """Inner profile on [0, 1]: constant 1, or a C^1 cubic blend on [0.9, 1]."""
    if not blend:
        return None
    c = 1.0 + 0.05 * alpha_val
    h = 0.1

    def prof(r):
        if r <= 0.9:
            return c
        s = (r - 0.9) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * c + h01 * 1.0 + h11 * h * (-alpha_val)

    return prof


def model(alpha: float, blend: bool = False) -> RadialPotential:
    """``rho = r**-alpha`` for r >= 1, constant 1 inside (or a C^1 blend)."""
    inner = _inner(alpha, blend)

    def rho(r):
        if r >= 1.0:
            return r ** (-alpha)
        return 1.0 if inner is None else inner(r)

    mass_c = tail_c = None
    if inner is None:
        def mass_c(r, D):
            if r <= 1.0:
                return r**D / D
            if abs(D - alpha) < 1e-14:
                return 1.0 / D + math.log(r)
            return 1.0 / D + (r ** (D - alpha) - 1.0) / (D - alpha)

        if alpha > 2:
            def tail_c(r):
                if r >= 1.0:
                    return r ** (2.0 - alpha) / (alpha - 2.0)
                return 0.5 * (1.0 - r * r) + 1.0 / (alpha - 2.0)

    return RadialPotential(rho, alpha=alpha, mass_closed=mass_c, tail_closed=tail_c,
                           name=f"model:alpha={alpha:g}" + (",blend=1" if blend else ""),
                           params={"alpha": alpha, "blend": blend})


def perturbed(D: int, amp: float = 1.0) -> RadialPotential:
    """``rho = r**(2-2D) (1 + sigma)``, ``sigma = amp r**(1-D)`` for r >= 1, constant inside.

    ``|sigma'| = amp (D-1) r**-D <= C r**(1-D)`` with ``C = amp (D-1)``.
    """
    a0 = 1.0 + amp

    def sigma(r):
        return amp * r ** (1.0 - D)

    def rho(r):
        if r >= 1.0:
            return r ** (2.0 - 2.0 * D) * (1.0 + amp * r ** (1.0 - D))
        return a0

    def tail_c(r):
        if r >= 1.0:
            return r ** (4.0 - 2 * D) / (2 * D - 4.0) + amp * r ** (5.0 - 3 * D) / (3 * D - 5.0)
        return a0 * 0.5 * (1.0 - r * r) + tail_c(1.0)

    def mass_c(r, DD):
        if DD != D:
            return None
        if r <= 1.0:
            return a0 * r**D / D
        return a0 / D + (r ** (2.0 - D) - 1.0) / (2.0 - D) + amp * (r ** (3.0 - 2 * D) - 1.0) / (3.0 - 2 * D)

    return RadialPotential(rho, alpha=2.0 * D - 2.0, sigma=sigma, sigma_C=amp * (D - 1),
                           mass_closed=mass_c, tail_closed=tail_c,
                           name=f"perturbed:D={D},amp={amp:g}", params={"D": D, "amp": amp})


def smooth() -> RadialPotential:
    """``rho = (1 + r**2)**-2``."""

    def rho(r):
        return (1.0 + r * r) ** -2

    def tail_c(r):
        return 0.5 / (1.0 + r * r)

    return RadialPotential(rho, alpha=4.0, tail_closed=tail_c, name="smooth")


def constant(m: float = 1.0) -> RadialPotential:
    """``rho = m`` everywhere (no decay; used on balls)."""
    if not m > 0:
        raise DomainError("density must be positive")

    def mass_c(r, D):
        return m * r**D / D

    def tail_c(r):
        return math.inf

    return RadialPotential(lambda r: m, alpha=None, mass_closed=mass_c, tail_closed=tail_c,
                           name=f"constant:m={m:g}", params={"m": m})


def _params(text: str) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise DomainError(f"malformed parameter {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_potential(key: str):
    """Resolve ``model:alpha=4``, ``capped:alpha=4``, ``perturbed:D=3,amp=1``,
    ``smooth``, ``constant:m=1`` or ``ellipsoid:a=0.9,alpha=2.5,D=4``."""
    name, _, rest = key.partition(":")
    p = _params(rest)
    name = name.strip()
    if name in ("model", "capped"):
        return model(float(p.get("alpha", 4)), blend=p.get("blend", "0") not in ("0", "false"))
    if name == "perturbed":
        return perturbed(int(p.get("D", 3)), float(p.get("amp", p.get("C", 1.0))))
    if name == "smooth":
        return smooth()
    if name == "constant":
        return constant(float(p.get("m", 1.0)))
    if name == "ellipsoid":
        return EllipsoidPotential(float(p["a"]), float(p["alpha"]), int(p["D"]))
    raise DomainError(f"unknown potential {key!r}")


# ---------------------------------------------------------------------------
# H_rho and the Newtonian potential


def check_Hrho(pot: RadialPotential, rtol: float = 1e-10) -> TailIntegral:
    """``int_0^inf r rho(r) dr`` by quadrature; ``.finite`` False on a slow tail."""
    g = pot.rho_scalar
    head, _ = integrate.quad(lambda r: r * g(r), 0.0, 1.0, epsabs=0.0, epsrel=1e-13,
                             points=[0.9], limit=200)
    tail = integrate_to_infinity(lambda r: r * g(r), 1.0, rtol=rtol)
    if not tail.finite:
        return tail
    return TailIntegral(head + tail.value, True, tail.exponent, tail.tail, tail.radius,
                        tail.converged)


_lock = threading.Lock()


@functools.lru_cache(maxsize=256)
def _numeric_tail_anchor(pot: RadialPotential) -> tuple[float, float]:
    res = integrate_to_infinity(lambda t: t * pot.rho_scalar(t), 1.0, rtol=1e-12)
    if not res.finite:
        raise PreconditionError(f"H_rho diverges for {pot.name}")
    return 1.0, res.value


def tail_rho(pot: RadialPotential, r: float) -> float:
    """``T(r) = int_r^inf t rho(t) dt``."""
    if pot.tail_closed is not None:
        return float(pot.tail_closed(r))
    with _lock:
        r_ref, t_ref = _numeric_tail_anchor(pot)
    g = pot.rho_scalar
    if r <= r_ref:
        seg, _ = integrate.quad(lambda t: t * g(t), r, r_ref, epsabs=0.0, epsrel=1e-13,
                                limit=200)
        return t_ref + seg
    seg, _ = integrate.quad(lambda y: math.exp(2 * y) * g(math.exp(y)), math.log(r_ref),
                            math.log(r), epsabs=0.0, epsrel=1e-13, limit=400)
    return t_ref - seg


def mass(pot: RadialPotential, r: float, D: int) -> float:
    """``m(r) = int_0^r t^(D-1) rho(t) dt``."""
    if pot.mass_closed is not None:
        val = pot.mass_closed(r, D)
        if val is not None:
            return float(val)
    g = pot.rho_scalar
    if r <= 1.0:
        val, _ = integrate.quad(lambda t: t ** (D - 1) * g(t), 0.0, r, epsabs=0.0, epsrel=1e-13,
                                limit=200)
        return val
    head = mass(pot, 1.0, D)
    seg, _ = integrate.quad(lambda y: math.exp(D * y) * g(math.exp(y)), 0.0, math.log(r),
                            epsabs=0.0, epsrel=1e-13, limit=400)
    return head + seg


def newtonian_potential(pot: RadialPotential, r, D: int):
    """Decaying solution of ``-(U'' + (D-1) U'/r) = rho``; accepts scalars or arrays."""
    if D < 3:
        raise DomainError("D must be at least 3")
    if np.ndim(r):
        return np.array([newtonian_potential(pot, float(x), D) for x in np.ravel(r)]).reshape(np.shape(r))
    r = float(r)
    if r < 0:
        raise DomainError("r must be nonnegative")
    T = tail_rho(pot, r)
    if not math.isfinite(T):
        raise PreconditionError(f"H_rho diverges for {pot.name}")
    if r == 0.0:
        return T / (D - 2.0)
    return (r ** (2.0 - D) * mass(pot, r, D) + T) / (D - 2.0)


def tilde_rho(pot: RadialPotential, D: int, t):
    """``r^(2D-2) rho(r) / (D-2)^2`` as a function of ``t = r^(2-D)``."""
    t = np.asarray(t, dtype=float)
    r = t ** (1.0 / (2.0 - D))
    return r ** (2 * D - 2) * pot.rho(r) / (D - 2.0) ** 2


# ---------------------------------------------------------------------------
# ellipsoidal densities


@dataclass(frozen=True)
class EllipsoidPotential:
    """``rho = v**(-alpha/2)`` with ``v = (x1/a)**2 + |x'|**2``, x' in R^(D-1)."""

    a: float
    alpha: float
    D: int

    def __post_init__(self):
        if not (0 < self.a <= 1):
            raise DomainError("a must lie in (0, 1]")
        if not self.alpha > 2:
            raise DomainError("alpha must exceed 2")
        if self.D < 3:
            raise DomainError("D must be at least 3")

    def v(self, x1, xr):
        return (x1 / self.a) ** 2 + xr**2

    def rho(self, x1, xr):
        return self.v(x1, xr) ** (-self.alpha / 2)


def ellipsoid_criterion(a: float, alpha: float, D: int) -> dict:
    """Closed-form tests ``alpha <= a^2 (2D-2)`` and ``alpha + 2 <= a^2 (2D-2)``."""
    lim = a * a * (2 * D - 2)
    return {"meanc_holds": bool(alpha <= lim), "monotone_holds": bool(alpha + 2 <= lim)}


def mean_curvature_margin(pot: EllipsoidPotential, level: float, samples: int = 1000,
                          return_profile: bool = False):
    """Minimum of ``2(D-1)H - |grad rho|/rho`` over the level set ``rho = level``.

    The level set is the ellipsoid ``v = c``, ``c = level**(-2/alpha)``.  By
    symmetry in x' it is sampled along ``x1 = a sqrt(c) cos(th)``,
    ``|x'| = sqrt(c) sin(th)`` for ``th`` in [0, pi], poles included.  With
    ``n = grad v / |grad v|`` (outward, toward decreasing rho),
    ``(D-1) H = (lap v - n.Hess(v).n) / |grad v|`` so convex superlevel sets
    have H >= 0.
    """
    if not level > 0 or not math.isfinite(level):
        raise DomainError("level must be a positive finite density value")
    if samples < 16:
        raise DomainError("need at least 16 samples")
    a, al, D = pot.a, pot.alpha, pot.D
    c = level ** (-2.0 / al)
    th = np.linspace(0.0, math.pi, samples)
    x1 = a * math.sqrt(c) * np.cos(th)
    xr = math.sqrt(c) * np.sin(th)
    g1 = 2.0 * x1 / a**2
    gr = 2.0 * xr
    gn = np.hypot(g1, gr)
    n1, nr = g1 / gn, gr / gn
    lap = 2.0 / a**2 + 2.0 * (D - 1)
    nHn = (2.0 / a**2) * n1**2 + 2.0 * nr**2
    H2 = 2.0 * (lap - nHn) / gn  # 2 (D-1) H
    grad_log_rho = 0.5 * al * gn / c
    margin = H2 - grad_log_rho
    if return_profile:
        return float(margin.min()), th, margin
    return float(margin.min())


def sweep_rows(triples, levels=(0.01, 0.1, 1.0, 10.0), samples: int = 1000):
    """Rows ``(a, alpha, D, margin_min, meanc_holds)`` for a parameter sweep."""
    rows = []
    for a, al, D in triples:
        pot = EllipsoidPotential(a, al, D)
        mm = min(mean_curvature_margin(pot, lv, samples) for lv in levels)
        rows.append((a, al, D, mm, ellipsoid_criterion(a, al, D)["meanc_holds"]))
    return rows

"""Nonlinearities f, their antiderivatives, and the integrals built from them.

A :class:`Nonlinearity` bundles ``f``, ``f'`` and the base point ``a`` of the
antiderivative ``F(u) = int_a^u f``.  The operations here evaluate ``F`` and
its inverse, the Keller-Osserman integral ``int^inf ds / sqrt(F(s))``, the
function ``Phi(u) = int_u^inf dt / sqrt(F(t) - F(u))`` and its inverse, and
build the increasing envelope ``fbar >= f`` used to construct subsolutions.
"""

from __future__ import annotations

import bisect
import functools
import math
import threading
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, KOViolation, OutOfRangeError, PreconditionError
from .quadrature import TailIntegral, integrate_to_infinity

__all__ = [
    "Nonlinearity",
    "power",
    "oscillating",
    "logquartic",
    "exponential",
    "shifted",
    "parse_nonlinearity",
    "eval_F",
    "F_inverse",
    "ko_integral",
    "phi",
    "phi_inverse",
    "monotone_envelope",
    "envelope_tail_inverse",
    "TailInverter",
    "sup_f",
    "increasing_majorant",
]

Func = Callable[[float], float]


@dataclass(frozen=True)
class Nonlinearity:
    f: Func
    fprime: Func
    a: float = 0.0
    positive_on_positive: bool = True
    nondecreasing: bool = False
    f_of_zero_is_zero: bool = True
    F_closed: Optional[Func] = None
    F_inv_closed: Optional[Func] = None
    # nondecreasing g >= f; used for sup bounds and as an admissible fbar
    majorant: Optional[Func] = None
    # f(u)/u is nondecreasing on [M, inf); inf when no such M is known
    M: float = 0.0
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False, hash=False)

    def __call__(self, u):
        return self.f(u)

    def F(self, u: float) -> float:
        return eval_F(self, u)

    def check_invariants(self, grid=None) -> bool:
        """Spot-check the flags on a sample grid."""
        grid = np.linspace(1e-3, 50.0, 500) if grid is None else np.asarray(grid)
        vals = np.array([self.f(x) for x in grid])
        ok = True
        if self.f_of_zero_is_zero:
            ok &= abs(self.f(0.0)) == 0.0
        if self.positive_on_positive:
            ok &= bool(np.all(vals[grid > 0] > 0))
        Fv = np.array([eval_F(self, x) for x in grid if x >= self.a])
        ok &= bool(np.all(np.diff(Fv) >= -1e-12 * np.maximum(1.0, np.abs(Fv[1:]))))
        return bool(ok)


# ---------------------------------------------------------------------------
# catalog


def power(p: float, scale: float = 1.0) -> Nonlinearity:
    """``f(u) = scale * u**p``."""
    if p <= 0:
        raise DomainError("power exponent must be positive")

    def f(u):
        return scale * np.power(u, p)

    def fp(u):
        return scale * p * np.power(u, p - 1.0)

    def F(u):
        return scale * np.power(u, p + 1.0) / (p + 1.0)

    def Finv(s):
        return np.power((p + 1.0) * s / scale, 1.0 / (p + 1.0))

    return Nonlinearity(
        f, fp, nondecreasing=True, F_closed=F, F_inv_closed=Finv, majorant=f,
        M=0.0, name=f"power:p={p:g}" + (f",scale={scale:g}" if scale != 1.0 else ""),
        params={"p": p, "scale": scale},
    )


def oscillating() -> Nonlinearity:
    """``f(u) = u**2 (1 + cos u)``, vanishing at odd multiples of pi."""

    def f(u):
        return u * u * (1.0 + np.cos(u))

    def fp(u):
        return 2.0 * u * (1.0 + np.cos(u)) - u * u * np.sin(u)

    def F(u):
        return u**3 / 3.0 + u * u * np.sin(u) + 2.0 * u * np.cos(u) - 2.0 * np.sin(u)

    def maj(u):
        return 2.0 * u * u

    return Nonlinearity(f, fp, F_closed=F, majorant=maj, M=math.inf, name="oscillating")


_E = math.e


def logquartic() -> Nonlinearity:
    """``f(u) = u (ln u)**4`` for ``u >= e``, ``e (u/e)**5`` below.

    The extension matches value and slope at ``u = e`` and vanishes to first
    order at 0, so f stays C^1 and positive on (0, inf).
    """

    def f(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            hi = u * np.log(np.maximum(u, _E)) ** 4
        lo = _E * (u / _E) ** 5
        out = np.where(u >= _E, hi, lo)
        return float(out) if out.ndim == 0 else out

    def fp(u):
        u = np.asarray(u, dtype=float)
        L = np.log(np.maximum(u, _E))
        hi = L**4 + 4.0 * L**3
        lo = 5.0 * (u / _E) ** 4
        out = np.where(u >= _E, hi, lo)
        return float(out) if out.ndim == 0 else out

    FE = _E**2 / 6.0

    def F(u):
        u = np.asarray(u, dtype=float)
        L = np.log(np.maximum(u, _E))
        G = 0.5 * u * u * (L**4 - 2 * L**3 + 3 * L**2 - 3 * L + 1.5)
        hi = FE + G - _E**2 / 4.0
        lo = _E**2 / 6.0 * (u / _E) ** 6
        out = np.where(u >= _E, hi, lo)
        return float(out) if out.ndim == 0 else out

    return Nonlinearity(f, fp, nondecreasing=True, F_closed=F, majorant=f, M=0.0,
                        name="logquartic")


def exponential() -> Nonlinearity:
    """``f(u) = exp(u) - 1``."""

    def f(u):
        with np.errstate(over="ignore"):
            return np.expm1(u)

    def fp(u):
        with np.errstate(over="ignore"):
            return np.exp(u)

    def F(u):
        with np.errstate(over="ignore"):
            return np.expm1(u) - u

    return Nonlinearity(f, fp, nondecreasing=True, F_closed=F, majorant=f, M=0.0,
                        name="exponential")


def shifted(base: Nonlinearity, tk: float) -> Nonlinearity:
    """``f_k(t) = f(t + tk)`` with antiderivative based at 0."""
    Fb = functools.partial(eval_F, base)
    F_tk = Fb(tk) if tk >= base.a else None

    def f(t):
        return base.f(t + tk)

    def fp(t):
        return base.fprime(t + tk)

    F = None
    if base.F_closed is not None and F_tk is not None:
        def F(t):
            return base.F_closed(t + tk) - F_tk

    maj = None
    if base.majorant is not None:
        def maj(t):
            return base.majorant(t + tk)

    return Nonlinearity(
        f, fp, a=0.0, positive_on_positive=False, nondecreasing=base.nondecreasing,
        f_of_zero_is_zero=abs(base.f(tk)) < 1e-12 * max(1.0, tk * tk),
        F_closed=F, majorant=maj, M=max(base.M - tk, 0.0),
        name=f"shifted:base={base.name},tk={tk:g}", params={"base": base.name, "tk": tk},
    )


def _parse_params(text: str) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise DomainError(f"malformed parameter {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_nonlinearity(key: str) -> Nonlinearity:
    """Resolve a catalog key such as ``"power:p=2"`` or ``"oscillating"``."""
    name, _, rest = key.partition(":")
    params = _parse_params(rest)
    name = name.strip()
    if name == "power":
        return power(float(params.get("p", 2)), float(params.get("scale", 1.0)))
    if name == "oscillating":
        return oscillating()
    if name == "logquartic":
        return logquartic()
    if name == "exponential":
        return exponential()
    if name == "shifted":
        tk = float(params.pop("tk"))
        base_name = params.pop("base", "oscillating")
        base_key = base_name + (":" + ",".join(f"{k}={v}" for k, v in params.items()) if params else "")
        return shifted(parse_nonlinearity(base_key), tk)
    raise DomainError(f"unknown nonlinearity {key!r}")


# ---------------------------------------------------------------------------
# antiderivative and its inverse


def eval_F(nl: Nonlinearity, u: float, rtol: float = 1e-10) -> float:
    """``F(u) = int_a^u f``; closed form when available, else adaptive quadrature."""
    if u < nl.a:
        raise DomainError(f"F is defined for u >= a = {nl.a}, got {u}")
    if u == nl.a:
        return 0.0
    if nl.F_closed is not None:
        return float(nl.F_closed(u))
    val, _ = integrate.quad(nl.f, nl.a, u, epsabs=0.0, epsrel=rtol, limit=2000)
    return float(val)


def F_inverse(nl: Nonlinearity, s: float, rtol: float = 1e-10) -> float:
    """Return ``u >= a`` with ``F(u) = s`` (monotone bracketing plus safeguarded Newton)."""
    if s < 0:
        raise DomainError("F_inverse needs s >= 0")
    if s == 0:
        return nl.a
    if nl.F_inv_closed is not None:
        return float(nl.F_inv_closed(s))
    tol = rtol * s
    lo, hi = nl.a, nl.a + 1.0
    while eval_F(nl, hi) < s:
        lo, hi = hi, nl.a + 2.0 * (hi - nl.a)
        if hi > 1e300:
            raise OutOfRangeError("F does not reach the requested value")
    x = 0.5 * (lo + hi)
    for _ in range(200):
        r = eval_F(nl, x) - s
        if abs(r) <= tol:
            return x
        if r > 0:
            hi = x
        else:
            lo = x
        d = float(nl.f(x))
        step_ok = d > 0
        if step_ok:
            xn = x - r / d
            step_ok = lo < xn < hi
        x = xn if step_ok else 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * hi:
            return x
    return x


# ---------------------------------------------------------------------------
# Keller-Osserman integral and Phi


def ko_integral(nl: Nonlinearity, lower: float, rtol: float = 1e-10) -> TailIntegral:
    """``int_lower^inf ds / sqrt(F(s))`` with fitted tail; ``.finite`` is False on divergence."""
    F0 = eval_F(nl, lower)
    if not F0 > 0:
        raise DomainError(f"F(lower) must be positive, got {F0}")

    def g(s):
        with np.errstate(over="ignore"):
            return 1.0 / math.sqrt(eval_F(nl, s))

    return integrate_to_infinity(g, lower, rtol=rtol)


@functools.lru_cache(maxsize=4096)
def _phi_cached(nl: Nonlinearity, u: float, rtol: float) -> float:
    Fu = eval_F(nl, u)
    if not math.isfinite(Fu):
        raise OutOfRangeError(f"F({u}) overflows for {nl.name}")

    def g(sig):
        t = F_inverse(nl, sig * sig + Fu)
        return 1.0 / float(nl.f(t))

    sig1 = math.sqrt(max(Fu, 1e-300))
    head, _ = integrate.quad(g, 0.0, sig1, epsabs=0.0, epsrel=rtol * 1e-2, limit=200)
    tail = integrate_to_infinity(g, sig1, rtol=rtol)
    if not tail.finite:
        raise KOViolation(f"Phi({u}) diverges for {nl.name}")
    if not tail.converged:
        warnings.warn(f"Phi({u}) tail for {nl.name} is not power-like; value is approximate",
                      RuntimeWarning, stacklevel=3)
    return 2.0 * (head + tail.value)


def phi(nl: Nonlinearity, u: float, rtol: float = 1e-10) -> float:
    """``Phi(u) = int_u^inf dt / sqrt(F(t) - F(u))``.

    Evaluated after ``s = F(t) - F(u)`` and ``s = sigma**2`` as
    ``2 int_0^inf dsigma / f(F^{-1}(sigma**2 + F(u)))``, which has no
    endpoint singularity.
    """
    if not u > 0 or u < nl.M:
        raise DomainError(f"Phi needs u >= M = {nl.M} and u > 0, got {u}")
    return _phi_cached(nl, float(u), rtol)


def _phi_sup(nl: Nonlinearity) -> float:
    return phi(nl, nl.M) if nl.M > 0 else math.inf


def phi_inverse(nl: Nonlinearity, y: float, rtol: float = 1e-8) -> float:
    """Return ``u >= M`` with ``Phi(u) = y``; Phi is strictly decreasing there."""
    if not y > 0:
        raise OutOfRangeError("phi_inverse needs y > 0")
    if y >= _phi_sup(nl):
        raise OutOfRangeError(f"y = {y} is not below Phi(M)")
    lo = hi = max(nl.M, 1.0)
    while phi(nl, hi) > y:
        lo, hi = hi, hi * 10.0
    while phi(nl, lo) < y:
        nxt = lo / 10.0
        if nl.M > 0 and nxt < nl.M:
            nxt = nl.M
        if nxt == lo:
            raise OutOfRangeError("could not bracket phi_inverse")
        hi, lo = lo, nxt
    if lo == hi:
        return lo

    def h(x):
        return math.log(phi(nl, math.exp(x))) - math.log(y)

    x = optimize.brentq(h, math.log(lo), math.log(hi), xtol=1e-15, rtol=1e-15, maxiter=200)
    u = math.exp(x)
    if abs(phi(nl, u) - y) > rtol * y:
        # polish with a secant step in u
        u = optimize.brentq(lambda v: phi(nl, v) - y, lo, hi, xtol=1e-14 * u, maxiter=200)
    return u


# ---------------------------------------------------------------------------
# increasing envelope


class _RunningSup:
    """Running supremum ``S(t) = sup_[0,t] f`` with its flat intervals.

    Critical points are located from sign changes of ``f'`` on a grid of
    spacing ``step`` and refined with Brent's method, so peak values are
    exact up to the root-finder tolerance rather than grid-limited.
    """

    def __init__(self, f: Func, fprime: Func, step: float = 0.05, chunk: float = 50.0):
        self.f = f
        self.fprime = fprime
        self.step = step
        self.chunk = chunk
        self.pos = 0.0
        self.level = float(f(0.0))
        self.flats: list[tuple[float, float, float]] = []  # (start, end, level)
        self.open: Optional[tuple[float, float]] = None    # (start, level)
        self.last_min: Optional[float] = None
        self._cum: list[float] = [0.0]
        self._starts: list[float] = []
        self._lock = threading.Lock()

    def _root(self, g, a, b):
        ga, gb = g(a), g(b)
        if ga == 0:
            return a
        if gb == 0:
            return b
        return optimize.brentq(g, a, b, xtol=1e-14, rtol=1e-15, maxiter=200)

    def _extend(self, upto: float):
        with self._lock:
            while self.pos < upto:
                x0, x1 = self.pos, self.pos + self.chunk
                x = np.arange(x0, x1 + 0.5 * self.step, self.step)
                fp = np.array([float(self.fprime(v)) for v in x])
                events = []
                for j in range(len(x) - 1):
                    if fp[j] > 0 and fp[j + 1] <= 0:
                        events.append(("max", self._root(self.fprime, x[j], x[j + 1])))
                    elif fp[j] < 0 and fp[j + 1] >= 0:
                        events.append(("min", self._root(self.fprime, x[j], x[j + 1])))
                for kind, c in events:
                    if kind == "min":
                        self.last_min = c
                        continue
                    fc = float(self.f(c))
                    if self.open is None:
                        if fc >= self.level:
                            self.open = (c, fc)
                            self.level = fc
                        continue
                    start, L = self.open
                    if fc > L:
                        m = self.last_min if self.last_min is not None and self.last_min > start else start
                        d = self._root(lambda v: float(self.f(v)) - L, m, c)
                        self.flats.append((start, d, L))
                        self.open = (c, fc)
                        self.level = fc
                if self.open is None:
                    self.level = max(self.level, float(self.f(x1)))
                self.pos = x1

    def _locate(self, t: float):
        self._extend(t + self.step)
        self._refresh()
        i = bisect.bisect_right(self._starts, t) - 1
        if i >= 0 and self.flats[i][0] <= t <= self.flats[i][1]:
            return self.flats[i][2]
        if self.open is not None and t >= self.open[0]:
            # past the last scanned peak f may already have climbed above the level
            return self.open[1] if float(self.f(t)) <= self.open[1] else None
        return None

    def _open_end(self, t: float) -> float:
        """End of the open flat interval, capped at t."""
        start, L = self.open
        if float(self.f(t)) <= L:
            return t
        m = self.last_min if self.last_min is not None and start < self.last_min <= t else start
        return self._root(lambda v: float(self.f(v)) - L, m, t)

    def value(self, t: float) -> float:
        L = self._locate(t)
        return float(self.f(t)) if L is None else L

    def on_flat(self, t: float) -> bool:
        return self._locate(t) is not None

    def _refresh(self):
        if len(self._cum) != len(self.flats) + 1:
            self._cum = [0.0]
            for a, b, _ in self.flats:
                self._cum.append(self._cum[-1] + (b - a))
            self._starts = [fl[0] for fl in self.flats]

    def _closed_measure(self, t: float) -> float:
        """Measure of the closed flat intervals inside [0, t]."""
        self._refresh()
        i = bisect.bisect_right(self._starts, t) - 1
        if i < 0:
            return 0.0
        a, b, _ = self.flats[i]
        return self._cum[i] + min(b, t) - a

    def flat_length(self, lo: float, hi: float) -> float:
        """Measure of the flat set inside [lo, hi]."""
        if hi <= lo:
            return 0.0
        self._extend(hi + self.step)
        total = self._closed_measure(hi) - self._closed_measure(lo)
        if self.open is not None and hi > self.open[0]:
            total += max(0.0, self._open_end(hi) - max(self.open[0], lo))
        return total


def monotone_envelope(nl: Nonlinearity, eps: Optional[float] = None,
                      scan_step: float = 0.05, t_cut: Optional[float] = None) -> Nonlinearity:
    """Strictly increasing ``fbar >= f`` with ``fbar(0) = 0``.

    ``fbar(t) = S(t) + eps * (min(t, 1) + |flat set of S in [1, t]|)`` where
    ``S`` is the running supremum of f.  For nondecreasing f the flat set is
    empty and ``fbar = f + eps * min(t, 1)``.

    With ``t_cut`` and a catalog majorant g, ``fbar(t) = max(fbar(t_cut) +
    eps (t - t_cut), g(t))`` beyond t_cut, so improper integrals of 1/fbar do
    not require scanning f out to infinity.
    """
    if nl.f_of_zero_is_zero and abs(float(nl.f(0.0))) > 0:
        raise PreconditionError("f(0) must vanish")
    probe = np.linspace(0.0, 20.0, 401)
    if np.any(np.array([float(nl.f(x)) for x in probe]) < 0):
        raise PreconditionError("monotone_envelope needs f >= 0")
    if eps is None:
        eps = 1e-6 * float(nl.f(1.0))

    if nl.nondecreasing:
        def S(t):
            return float(nl.f(t))

        def flat(lo, hi):
            return 0.0

        def on_flat(t):
            return False
    else:
        rs = _RunningSup(nl.f, nl.fprime, step=scan_step)
        S, flat, on_flat = rs.value, rs.flat_length, rs.on_flat

    def core(t):
        return S(t) + eps * (min(t, 1.0) + (flat(1.0, t) if t > 1.0 else 0.0))

    cut = t_cut if (t_cut is not None and nl.majorant is not None and not nl.nondecreasing) else None
    at_cut = core(cut) if cut is not None else None

    def fbar(t):
        if np.ndim(t):
            return np.array([fbar(float(x)) for x in np.ravel(t)]).reshape(np.shape(t))
        t = float(t)
        if t <= 0:
            return 0.0
        if cut is not None and t > cut:
            return max(at_cut + eps * (t - cut), float(nl.majorant(t)))
        return core(t)

    def fbar_prime(t):
        if np.ndim(t):
            return np.array([fbar_prime(float(x)) for x in np.ravel(t)]).reshape(np.shape(t))
        t = float(t)
        if cut is not None and t > cut:
            h = 1e-6 * t
            return (fbar(t + h) - fbar(t - h)) / (2 * h)
        if on_flat(t):
            return eps
        return float(nl.fprime(t)) + (eps if t < 1.0 else 0.0)

    return Nonlinearity(
        fbar, fbar_prime, a=nl.a, nondecreasing=True, majorant=fbar, M=nl.M,
        name=f"envelope({nl.name})", params={"eps": eps, "base": nl.name},
    )


def increasing_majorant(nl: Nonlinearity) -> Nonlinearity:
    """An admissible increasing ``fbar >= f``: f itself, the catalog majorant, or the envelope."""
    if nl.nondecreasing and nl.f_of_zero_is_zero:
        return nl
    if nl.majorant is not None:
        g = nl.majorant
        h = 1e-6

        def gp(t):
            return (float(g(t + h)) - float(g(max(t - h, 0.0)))) / (t + h - max(t - h, 0.0))

        return Nonlinearity(g, gp, a=nl.a, nondecreasing=True, majorant=g,
                            name=f"majorant({nl.name})")
    return monotone_envelope(nl)


def sup_f(nl: Nonlinearity, M: float) -> float:
    """An upper bound for ``max_[0,M] f`` (exact for nondecreasing f)."""
    if nl.nondecreasing:
        return float(nl.f(M))
    if nl.majorant is not None:
        return float(nl.majorant(M))
    return float(monotone_envelope(nl).f(M))


# ---------------------------------------------------------------------------
# inversion of int_w^beta ds / fbar


class TailInverter:
    """Solve ``int_w^beta ds / fbar(s) = target`` for w, reusing one improper integral."""

    def __init__(self, nl_bar: Nonlinearity, beta: float):
        if not beta > 0:
            raise DomainError("beta must be positive")
        self.nl = nl_bar
        self.beta = beta
        self._anchor: Optional[tuple[float, float]] = None  # (w_ref, G(w_ref))
        # visited (w, G(w)) pairs; new values integrate only from the nearest knot,
        # and the disjoint segments keep the accumulated error at quad tolerance
        self._kw: list[float] = []
        self._kg: list[float] = []

    def _seg(self, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        fb = self.nl.f
        # kinks of an envelope and overflow of fbar (where 1/fbar is 0) trip
        # quadpack's diagnostics; the finite-difference residual audits the result
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(lambda y: math.exp(y) / float(fb(math.exp(y))),
                                    math.log(lo), math.log(hi), epsabs=0.0, epsrel=1e-13,
                                    limit=400)
        return val

    def anchor(self) -> tuple[float, float]:
        if self._anchor is None:
            if math.isinf(self.beta):
                w_ref = 1.0
                tail = integrate_to_infinity(lambda s: 1.0 / float(self.nl.f(s)), w_ref, rtol=1e-13)
                if not tail.finite:
                    raise KOViolation("int^inf ds/fbar diverges")
                self._anchor = (w_ref, tail.value)
            else:
                self._anchor = (self.beta, 0.0)
        return self._anchor

    def G(self, w: float) -> float:
        """``int_w^beta ds / fbar``."""
        if not self._kw:
            w_ref, g_ref = self.anchor()
            self._kw, self._kg = [w_ref], [g_ref]
        i = bisect.bisect_left(self._kw, w)
        if i < len(self._kw) and self._kw[i] == w:
            return self._kg[i]
        cand = [j for j in (i - 1, i) if 0 <= j < len(self._kw)]
        j = min(cand, key=lambda k: abs(math.log(self._kw[k] / w)))
        wk, gk = self._kw[j], self._kg[j]
        g = gk + self._seg(w, wk) if w <= wk else gk - self._seg(wk, w)
        self._kw.insert(i, w)
        self._kg.insert(i, g)
        return g

    def solve(self, target: float, atol: float = 1e-8) -> float:
        if target < 0:
            raise OutOfRangeError("target must be nonnegative")
        if target == 0:
            return self.beta
        fb = self.nl.f
        # bracket in w: G decreasing
        if math.isinf(self.beta):
            hi = 1.0
            while self.G(hi) > target:
                hi *= 10.0
                if hi > 1e250:
                    raise OutOfRangeError("target too small to resolve")
        else:
            hi = self.beta
        lo = min(hi, 1.0) * 0.5
        while self.G(lo) < target:
            lo *= 0.1
            if lo < 1e-300:
                raise OutOfRangeError("target beyond int_0^beta ds/fbar")
        # Newton in log w, safeguarded by bisection; dG/dlogw = -w / fbar(w)
        x_lo, x_hi = math.log(lo), math.log(hi)
        x = 0.5 * (x_lo + x_hi)
        for _ in range(200):
            w = math.exp(x)
            r = self.G(w) - target
            if abs(r) <= 1e-3 * atol * max(1.0, target):
                break
            if r > 0:
                x_lo = x
            else:
                x_hi = x
            d = -w / float(fb(w))
            xn = x - r / d if d != 0 else 0.5 * (x_lo + x_hi)
            if not (x_lo < xn < x_hi):
                xn = 0.5 * (x_lo + x_hi)
            if abs(xn - x) < 1e-16 * max(1.0, abs(x)):
                x = xn
                break
            x = xn
        w = math.exp(x)
        if not math.isinf(self.beta):
            w = min(w, self.beta)
        return w


def envelope_tail_inverse(nl_bar: Nonlinearity, beta: float, target: float) -> float:
    """Return w in (0, beta) with ``int_w^beta ds / fbar = target`` (to 1e-8 absolute)."""
    return TailInverter(nl_bar, beta).solve(target)


def with_tolerance(nl: Nonlinearity, **changes) -> Nonlinearity:
    return replace(nl, **changes)

"""Command-line front end: ``elslab <experiment> [options]``.

Every experiment writes a CSV (with header) and a JSON sidecar carrying
``{experiment, theorem_ref, pass, margin, tolerance}``.  Exit codes: 0 when
every check passes, 2 for invalid input, 3 for numerical failure, 4 when a
check fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bounds as B
from . import nonlinearity as N
from . import potential as P
from . import shooting as S
from . import transformed as T
from .errors import (DomainError, InapplicableError, KOViolation, NoSeparatrixError,
                     NoSolutionError, OrderingViolationError, OutOfRangeError,
                     PreconditionError, TrajectoryInvalidError)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4

VALIDATION_ERRORS = (DomainError, OutOfRangeError, PreconditionError, KeyError, ValueError,
                     FileNotFoundError)
NUMERICAL_ERRORS = (NoSeparatrixError, NoSolutionError, InapplicableError, KOViolation,
                    TrajectoryInvalidError, OrderingViolationError)


class Run:
    """Collects artifacts and verdicts for one invocation."""

    def __init__(self, out_dir: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.verdicts: list[dict] = []

    def path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.out_dir / p

    def csv(self, name: str, header, rows) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
        return p

    def verdict(self, experiment: str, theorem_ref: str, ok: bool, margin, tolerance,
                sidecar: str, **extra) -> dict:
        rec = {"experiment": experiment, "theorem_ref": theorem_ref, "pass": bool(ok),
               "margin": _jsonable(margin), "tolerance": _jsonable(tolerance)}
        rec.update({k: _jsonable(v) for k, v in extra.items()})
        self.verdicts.append(rec)
        p = self.path(sidecar)
        existing = []
        if p.exists() and any(v.get("_sidecar") == str(p) for v in self.verdicts[:-1]):
            existing = json.loads(p.read_text())
            existing = existing if isinstance(existing, list) else [existing]
        rec_out = existing + [rec] if existing else rec
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(rec_out, indent=2, sort_keys=True) + "\n")
        rec["_sidecar"] = str(p)
        return rec

    @property
    def ok(self) -> bool:
        return all(v["pass"] for v in self.verdicts)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


# ---------------------------------------------------------------------------
# helpers


def _cfg(args) -> S.ShootingConfig:
    s = args.tol_scale
    kw = dict(rel_tol=1e-10 * s, abs_tol=1e-12 * s)
    if args.rmax is not None:
        kw["r_max"] = args.rmax
    for name in ("blowup_threshold", "value_cap", "probe_r_max", "bracket_rtol"):
        val = getattr(args, name, None)
        if val is not None:
            kw[name] = val
    return S.ShootingConfig(**kw)


def _classification_dict(c) -> dict:
    d = {"kind": c.kind}
    for k in ("beta", "lower", "upper", "r_star", "reason"):
        if hasattr(c, k):
            d[k] = getattr(c, k)
    return d


def _write_solution(run: Run, name: str, sol: S.RadialSolution) -> Path:
    return run.csv(name, ["r", "u", "du"], zip(sol.r, sol.u, sol.du))


def _read_solution(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"r", "u", "du"} <= set(rows[0]):
        raise DomainError(f"{path}: expected columns r,u,du")
    arr = np.array([[float(r["r"]), float(r["u"]), float(r["du"])] for r in rows])
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _as_solution(arrs, D: int) -> S.RadialSolution:
    r, u, du = arrs
    return S.RadialSolution(r, u, du, S.Indeterminate("loaded from file"), D, u[0], du[0], r[0])


def _stem(args, default: str) -> str:
    return args.out if args.out else default


def _sidecar(csv_name: str) -> str:
    return str(Path(csv_name).with_suffix(".json"))


def _solution_source(args, run: Run, nl, pot):
    """A solution from --in, --u1 (separatrix) or --u0/--du0 (single shot)."""
    if getattr(args, "inp", None):
        return _as_solution(_read_solution(args.inp), args.D)
    cfg = _cfg(args)
    if getattr(args, "u1", None) is not None:
        return S.find_els(nl, pot, args.u1, cfg, args.D)
    if getattr(args, "u0", None) is not None:
        return S.integrate_ivp(nl, pot, args.u0, args.du0, cfg, args.D)
    raise DomainError("give --in, --u1 or --u0")


# ---------------------------------------------------------------------------
# experiments


def cmd_shoot(args, run: Run):
    nl, pot = N.parse_nonlinearity(args.nl), P.parse_potential(args.pot)
    sol = S.integrate_ivp(nl, pot, args.u0, args.du0, _cfg(args), args.D)
    name = _stem(args, "shoot.csv")
    _write_solution(run, name, sol)
    flux_inc = float(np.min(np.diff(sol.flux))) if len(sol.r) > 1 else 0.0
    run.verdict("shoot", "flux r^(D-1) u' nondecreasing", flux_inc >= -sol.D * _cfg(args).abs_tol,
                flux_inc, _cfg(args).abs_tol, _sidecar(name),
                classification=_classification_dict(sol.classification))


def cmd_els_find(args, run: Run):
    nl, pot = N.parse_nonlinearity(args.nl), P.parse_potential(args.pot)
    cfg = _cfg(args)
    sol = S.find_els(nl, pot, args.u1, cfg, args.D)
    name = _stem(args, "els.csv")
    _write_solution(run, name, sol)
    m = sol.meta
    width = m["b_hi"] - m["b_lo"]
    run.verdict("els-find", "separatrix trajectory is entire large",
                sol.classification.kind == "EntireLarge", width,
                cfg.bracket_rtol * abs(m["b_star"]), _sidecar(name), b_star=m["b_star"],
                classification=_classification_dict(sol.classification), trace=sol.trace)


def cmd_bbup(args, run: Run):
    nl = N.parse_nonlinearity(args.nl)
    sol = S.boundary_blowup_ball(nl, args.m, args.R, _cfg(args), args.D)
    name = _stem(args, "bbup.csv")
    _write_solution(run, name, sol)
    err = abs(sol.meta["r_star"] - args.R)
    kappa = S.fit_boundary_coefficient(sol, args.R)
    run.verdict("bbup", "blow-up exactly on the sphere |x| = R", err <= 1e-8 * args.R, err,
                1e-8 * args.R, _sidecar(name), u0=sol.u0, kappa=kappa, trace=sol.trace)


def cmd_transform(args, run: Run):
    tc = T.TransformConfig(args.alpha, args.D)
    prof = T.to_transformed(_read_solution(args.inp), tc)
    name = _stem(args, "vt.csv")
    run.csv(name, ["v", "t", "V", "r"], zip(prof.v, prof.t, prof.V, prof.r))
    inc = T.check_tKV_monotone(prof, tc)
    run.verdict("transform", "t^K V increasing in v", inc > 0, inc, 0.0, _sidecar(name), K=tc.K)


def cmd_uniq_gap(args, run: Run):
    tc = T.TransformConfig(args.alpha, args.D)
    if args.a and args.b:
        rep = T.uniqueness_gap(_read_solution(args.a), _read_solution(args.b), tc)
    else:
        nl, pot = N.parse_nonlinearity(args.nl), P.parse_potential(args.pot)
        cfg = _cfg(args)
        s1 = S.find_els(nl, pot, args.u1, cfg, args.D)
        s2 = S.find_els(nl, pot, args.u2, cfg, args.D)
        rep = T.uniqueness_gap(s1, s2, tc, nl, pot)
    name = _stem(args, "gap.csv")
    run.csv(name, ["r", "gap", "envelope", "ratio"], rep.rows())
    decay = float(rep.gap[-1] / rep.gap[0]) if rep.gap[0] > 0 else float("nan")
    # the direct difference is only resolved above the noise floor of the inputs
    resolved = np.abs(rep.gap) > rep.noise if rep.method == "direct" else np.ones_like(rep.r, bool)
    floor_r = float(rep.r[np.argmin(resolved)]) if not resolved.all() else None
    run.verdict("uniq-gap", "gap between ordered entire large solutions decays",
                bool(np.all(rep.gap >= -rep.noise) and decay < 1), decay, 1.0, _sidecar(name),
                method=rep.method, K=tc.K, ratio_max=float(np.max(rep.ratio)),
                noise_floor_from_r=floor_r, meta=rep.meta)


def _bounds_report(run, name, exp, ref, rep, tol, **extra):
    run.csv(name, ["r", "primal", "bound", "margin"], rep.rows())
    fin = rep.margin[np.isfinite(rep.margin)]
    run.verdict(exp, ref, rep.verdict, float(fin.min()) if fin.size else float("nan"), tol,
                _sidecar(name), meta=rep.meta, **extra)


def cmd_bounds(args, run: Run):
    kind = args.which
    nl = N.parse_nonlinearity(args.nl)
    if kind == "fiddgr":
        out = B.fiddgr_check(nl, args.M, u_hi=args.uhi)
        name = _stem(args, "fiddgr.csv")
        run.csv(name, ["u", "product"], zip(out["u"], out["product"]))
        run.verdict("bounds:fiddgr", "f(u)/u <= C / Phi(u)^2", out["holds"], out["best_C"],
                    0.05, _sidecar(name), best_C=out["best_C"])
        return
    pot = P.parse_potential(args.pot)
    if kind == "wbeta":
        beta = math.inf if args.beta in ("inf", "infinity") else float(args.beta)
        grid = np.geomspace(args.r_lo, args.r_hi, args.n)
        rep = B.subsolution_w_beta(nl, pot, beta, grid, args.D)
        _bounds_report(run, _stem(args, "wbeta.csv"), "bounds:wbeta",
                       "Lap w_beta >= rho f(w_beta) and w_beta < beta", rep, 1e-6 * rep.meta["scale"])
        return
    sol = _solution_source(args, run, nl, pot)
    if kind == "lower":
        rep = B.implicit_lower_bound(sol, nl, pot)
        _bounds_report(run, _stem(args, "lower.csv"), "bounds:lower",
                       "int_u^inf ds/f <= U along an entire large solution", rep, 1e-9)
    elif kind == "gamma":
        alpha = pot.alpha if args.alpha is None else args.alpha
        rep = B.gamma_bound(sol, nl, alpha, args.c)
        _bounds_report(run, _stem(args, "gamma.csv"), "bounds:gamma",
                       "u <= Phi^{-1}(c r^(1-alpha/2)) beyond r_min", rep, 1e-9)
    elif kind == "energy":
        rep = B.energy_P_radial(sol, pot, nl, args.R)
        _bounds_report(run, _stem(args, "energy.csv"), "bounds:energy",
                       "u'^2/rho - 2F(u) <= 2 C_R / (r^(2D-2) rho)", rep, "10x integrator error")
    else:  # pragma: no cover - argparse restricts choices
        raise DomainError(kind)


def cmd_ko_check(args, run: Run):
    nl = N.parse_nonlinearity(args.nl)
    res = N.ko_integral(nl, args.lower)
    name = _stem(args, "ko.json")
    run.verdict("ko-check", "Keller-Osserman integral finite", res.finite,
                res.value, 1e-6, name if name.endswith(".json") else _sidecar(name),
                finite=res.finite, value=res.value, exponent=res.exponent,
                converged=res.converged)


def cmd_hrho_check(args, run: Run):
    pot = P.parse_potential(args.pot)
    res = P.check_Hrho(pot)
    name = _stem(args, "hrho.json")
    run.verdict("hrho-check", "int_0^inf r rho(r) dr finite", res.finite, res.value, 1e-8,
                name if name.endswith(".json") else _sidecar(name), finite=res.finite,
                value=res.value)


DEFAULT_TRIPLES = [(3, 0.8, 2.5), (3, 0.8, 2.6), (3, 1.0, 3.5), (3, 1.0, 4.5),
                   (4, 0.9, 4.8), (4, 0.9, 4.92), (4, 0.7, 2.9), (4, 0.7, 3.0),
                   (5, 1.0, 7.5), (5, 1.0, 8.5), (5, 0.6, 2.8), (5, 0.6, 2.9)]


def _parse_triples(text):
    if not text:
        return DEFAULT_TRIPLES
    out = []
    for item in text.split(";"):
        D, a, al = item.split(",")
        out.append((int(D), float(a), float(al)))
    return out


def cmd_ellipsoid_sweep(args, run: Run):
    triples = _parse_triples(args.triples)
    rows = P.sweep_rows([(a, al, D) for D, a, al in triples], samples=args.samples)
    name = _stem(args, "ellipsoid.csv")
    run.csv(name, ["a", "alpha", "D", "margin_min", "meanc_holds"], rows)
    agree = [(mm >= -1e-9) == holds for _, _, _, mm, holds in rows]
    run.verdict("ellipsoid-sweep", "mean-curvature sign matches alpha <= a^2 (2D-2)",
                all(agree), min(abs(r[3]) for r in rows), 1e-9, _sidecar(name),
                rows=[list(r) for r in rows])


def cmd_no_maximal(args, run: Run):
    pot = P.parse_potential(args.pot)
    cfg = replace(_cfg(args), value_cap=args.value_cap or 1e3, probe_r_max=1e8,
                  bracket_rtol=1e-9, rel_tol=1e-9 * args.tol_scale)
    rows, mins, tks = [], [], []
    for k in range(1, args.k + 1):
        tk = (2 * k - 1) * math.pi
        nl = N.shifted(N.oscillating(), tk)
        sol = S.find_els(nl, pot, args.v1, cfg, args.D)
        u = sol.u + tk
        rows += [(k, tk, r, x) for r, x in zip(sol.r, u)]
        mins.append(float(u.min()))
        tks.append(tk)
        if sol.classification.kind != "EntireLarge":
            raise NoSeparatrixError(f"k={k}: {sol.classification}")
    name = _stem(args, "no_maximal.csv")
    run.csv(name, ["k", "t_k", "r", "u"], rows)
    margins = [m - t for m, t in zip(mins, tks)]
    run.verdict("no-maximal-demo", "u_k >= t_k for an increasing unbounded sequence t_k",
                all(x >= 0 for x in margins) and tks == sorted(tks), min(margins), 0.0,
                _sidecar(name), t_k=tks, min_u=mins)


# ---------------------------------------------------------------------------
# parser


def _common(p, nl=True, pot=True):
    if nl:
        p.add_argument("--nl", "--f", dest="nl", default="power:p=2")
    if pot:
        p.add_argument("--pot", default="model:alpha=4")
    p.add_argument("--D", type=int, default=3)
    p.add_argument("--out", default=None, help="output file (relative to --out-dir)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elslab", description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default=".")
    ap.add_argument("--tol-scale", type=float, default=1.0)
    ap.add_argument("--rmax", type=float, default=None)
    ap.add_argument("--json-summary", default=None)
    # the global flags are also accepted after the subcommand
    late = argparse.ArgumentParser(add_help=False)
    late.add_argument("--out-dir", default=argparse.SUPPRESS)
    late.add_argument("--tol-scale", type=float, default=argparse.SUPPRESS)
    late.add_argument("--rmax", type=float, default=argparse.SUPPRESS)
    late.add_argument("--json-summary", default=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def _sub(name, **kw):
        return sub.add_parser(name, parents=[late], **kw)


    p = _sub("shoot")
    _common(p)
    p.add_argument("--u0", type=float, required=True)
    p.add_argument("--du0", type=float, default=0.0)
    p.add_argument("--blowup-threshold", dest="blowup_threshold", type=float)
    p.set_defaults(func=cmd_shoot)

    p = _sub("els-find")
    _common(p)
    p.add_argument("--u1", type=float, required=True)
    p.add_argument("--blowup-threshold", dest="blowup_threshold", type=float)
    p.add_argument("--bracket-rtol", dest="bracket_rtol", type=float)
    p.set_defaults(func=cmd_els_find)

    p = _sub("bbup")
    _common(p, pot=False)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--R", type=float, default=1.0)
    p.set_defaults(func=cmd_bbup)

    p = _sub("transform")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--D", type=int, default=3)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_transform)

    p = _sub("uniq-gap")
    _common(p)
    p.add_argument("--a", default=None)
    p.add_argument("--b", default=None)
    p.add_argument("--u1", type=float, default=2.0)
    p.add_argument("--u2", type=float, default=5.0)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--blowup-threshold", dest="blowup_threshold", type=float)
    p.set_defaults(func=cmd_uniq_gap)

    p = _sub("bounds")
    p.add_argument("which", choices=["wbeta", "lower", "gamma", "energy", "fiddgr"])
    _common(p)
    p.add_argument("--in", dest="inp", default=None)
    p.add_argument("--u1", type=float, default=None)
    p.add_argument("--u0", type=float, default=None)
    p.add_argument("--du0", type=float, default=0.0)
    p.add_argument("--beta", default="10")
    p.add_argument("--r-lo", dest="r_lo", type=float, default=0.05)
    p.add_argument("--r-hi", dest="r_hi", type=float, default=1e3)
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--c", type=float, default=0.9)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--M", type=float, default=None)
    p.add_argument("--uhi", type=float, default=1e6)
    p.add_argument("--blowup-threshold", dest="blowup_threshold", type=float)
    p.set_defaults(func=cmd_bounds)

    p = _sub("ko-check")
    p.add_argument("--nl", "--f", dest="nl", default="power:p=2")
    p.add_argument("--lower", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ko_check)

    p = _sub("hrho-check")
    p.add_argument("--pot", default="model:alpha=4")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_hrho_check)

    p = _sub("ellipsoid-sweep")
    p.add_argument("--triples", default=None, help="'D,a,alpha;D,a,alpha;...'")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ellipsoid_sweep)

    p = _sub("no-maximal-demo")
    p.add_argument("--pot", default="model:alpha=3")
    p.add_argument("--D", type=int, default=3)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--v1", type=float, default=1.0)
    p.add_argument("--value-cap", dest="value_cap", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_no_maximal)

    p = _sub("run", help="run a key=value config file or a directory of them")
    p.add_argument("config")
    p.set_defaults(func=None)
    return ap


# ---------------------------------------------------------------------------
# config files


def read_config(path: str) -> list[str]:
    """Translate a flat ``key = value`` file into an argument vector.

    ``kind`` names the experiment (``bounds:gamma`` selects a bounds check);
    every other key becomes ``--key value``.
    """
    items: dict[str, str] = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{ln}: expected key = value")
            k, v = (x.strip() for x in line.split("=", 1))
            items[k] = v
    if "kind" not in items:
        raise DomainError(f"{path}: missing 'kind'")
    kind = items.pop("kind")
    glob = []
    for g in ("out-dir", "tol-scale", "rmax"):
        if g in items:
            glob += [f"--{g}", items.pop(g)]
    argv = glob + kind.split(":")
    for k, v in items.items():
        argv += [f"--{k.replace('_', '-')}", v]
    return argv


def _dispatch(argv, run_dirs_default: str) -> tuple[int, list[dict]]:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.cmd == "run":
        return _run_configs(args)
    run = Run(args.out_dir)
    try:
        args.func(args, run)
    except NUMERICAL_ERRORS as exc:
        run.verdicts.append({"experiment": args.cmd, "pass": False, "error": type(exc).__name__,
                             "message": str(exc)})
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERICAL, run.verdicts
    except VALIDATION_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION, run.verdicts
    code = EXIT_OK if run.ok else EXIT_CHECK
    if args.json_summary:
        Path(args.json_summary).write_text(json.dumps(
            [{k: v for k, v in rec.items() if not k.startswith("_")} for rec in run.verdicts],
            indent=2, sort_keys=True) + "\n")
    return code, run.verdicts


def _run_configs(args) -> tuple[int, list[dict]]:
    p = Path(args.config)
    files = sorted(p.glob("*.cfg")) if p.is_dir() else [p]
    if not files:
        raise DomainError(f"no .cfg files in {p}")
    worst, allv = EXIT_OK, []
    for f in files:
        argv = read_config(str(f))
        if args.out_dir != "." and "--out-dir" not in argv:
            argv = ["--out-dir", args.out_dir] + argv
        code, verdicts = _dispatch(argv, args.out_dir)
        worst = max(worst, code)
        allv += [dict(v, config=str(f)) for v in verdicts]
    if args.json_summary:
        Path(args.json_summary).write_text(json.dumps(
            [{k: v for k, v in rec.items() if not k.startswith("_")} for rec in allv],
            indent=2, sort_keys=True) + "\n")
    return worst, allv


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        code, _ = _dispatch(argv, ".")
    except VALIDATION_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION
    except NUMERICAL_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERICAL
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Probe runners used by the experiment driver.

Each runner takes a ``Context``, the probe entry and a parameter reader,
and returns a ``ProbeOutcome`` with CSV rows, plot series and a summary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable

import numpy as np
from scipy import linalg

from .calculus import (CSV_HEADER, engine_agreement, estimate_propagation, h4_chain, in_open_bisector,
                       probe_band, probe_composed, probe_davies_gaffney, probe_resolvent, probe_two_param)
from .calderon import (CalderonPair, LogGrid, _alpha_range, log_quad, pairing_integral,
                       quadratic_functional, reproduce)
from .config import Context, build_model, build_pairs
from .errors import ConfigError, HardyscopeError, PreconditionViolation
from .hardy import (bd_bridge_check, bd_to_L_certificate, build_hardy_atom, build_sqrtL_atom,
                    cosine_evolution, molecule_l1_check, verify_molecule)
from .mspace import Ball, check_doubling, estimate_doubling, tent_mask
from .profiles import BandlimitedProfile, HoloProfile, divide_power, multiply_power
from .specop import SelfAdjointOperator, random_hermitian, range_projector, resolvent, spectral_apply
from .tent import TentAtom, TentField, atomic_decompose, duality_ratio, is_tent_atom, t2_norm


@dataclass
class ProbeOutcome:
    id: str
    type: str
    passed: bool
    summary: dict
    header: tuple = ()
    rows: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    failing: list = field(default_factory=list)
    error: str | None = None

    def report_entry(self) -> dict:
        d = {"id": self.id, "type": self.type, "passed": bool(self.passed), "summary": self.summary,
             "rowCount": len(self.rows), "failing": self.failing[:50], "series": self.series}
        if self.error is not None:
            d["error"] = self.error
        return d


class Params:
    """Typed access to ``probe.params`` with pointer-carrying errors."""

    def __init__(self, params: dict, pointer: str):
        self.p = params
        self.ptr = pointer + "/params"

    def _err(self, key, msg):
        return ConfigError(msg, f"{self.ptr}/{key}")

    def num(self, key, default=None):
        v = self.p.get(key, default)
        if v is None:
            raise self._err(key, "required number")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self._err(key, "expected a number")
        return float(v)

    def int(self, key, default=None):
        v = self.p.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise self._err(key, "expected an integer")
        return v

    def nums(self, key, default=None):
        v = self.p.get(key, default)
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            raise self._err(key, "expected a list of numbers")
        return [float(x) for x in v]

    def ints(self, key, default=None):
        v = self.p.get(key, default)
        if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
            raise self._err(key, "expected a list of integers")
        return v

    def obj(self, key, default=None):
        v = self.p.get(key, default)
        if not isinstance(v, dict):
            raise self._err(key, "expected an object")
        return v

    def str(self, key, default=None):
        v = self.p.get(key, default)
        if not isinstance(v, str):
            raise self._err(key, "expected a string")
        return v

    def profile(self, ctx: Context, key, default=None, kind=None):
        name = self.str(key, default)
        if name not in ctx.profiles:
            raise self._err(key, f"profile {name!r} is not defined")
        obj = ctx.profiles[name]
        if kind == "pair" and not isinstance(obj, CalderonPair):
            raise self._err(key, f"profile {name!r} is not a partner pair")
        if kind == "bandlimited":
            obj = obj.eta if isinstance(obj, CalderonPair) else obj
            if not isinstance(obj, BandlimitedProfile):
                raise self._err(key, f"profile {name!r} is not band-limited")
        if kind == "holo":
            obj = obj.psi if isinstance(obj, CalderonPair) else obj
            if not isinstance(obj, HoloProfile):
                raise self._err(key, f"profile {name!r} is not holomorphic")
        return obj

    def grid(self, key, default: LogGrid):
        if key not in self.p:
            return default
        g = self.obj(key)
        try:
            if g["tMax"] <= g["tMin"]:
                raise self._err(key, "tMax must exceed tMin")
            return LogGrid(float(g["tMin"]), float(g["tMax"]), int(g["count"]))
        except KeyError as exc:
            raise self._err(key, f"missing {exc.args[0]!r}") from exc


def static_check(probe: dict, pointer: str) -> None:
    """Preconditions decidable from the config alone."""
    params = probe.get("params", {})
    if probe["type"] == "resolvent":
        theta = params.get("theta", np.pi / 4)
        for j, z in enumerate(params.get("zs", [])):
            if not (isinstance(z, list) and len(z) == 2):
                raise ConfigError("z must be [re, im]", f"{pointer}/params/zs/{j}")
            if in_open_bisector(complex(z[0], z[1]), theta):
                raise ConfigError(f"z={complex(z[0], z[1])!r} lies in the open bisector of half-angle {theta}",
                                  f"{pointer}/params/zs/{j}")


def _operator(ctx: Context, probe: dict, pointer: str) -> tuple[SelfAdjointOperator, object]:
    if "model" in probe:
        key = ("model", pointer)
        if key not in ctx.cache:
            ctx.cache[key] = build_model(probe["model"], ctx.rng(pointer), pointer + "/model")
        model = ctx.cache[key]
    else:
        model = ctx.model
    return model.operator(probe.get("operator"), pointer + "/operator"), model


def _speed(ctx: Context, op: SelfAdjointOperator, P: Params, evolution=None, default_eps=1e-8):
    c = P.p.get("cD", "certify")
    if c == "certify":
        eps = P.num("epsilon", default_eps)
        times = P.nums("propagationTimes") if "propagationTimes" in P.p else None
        return float(estimate_propagation(op, eps, times, evolution=evolution).c_D)
    return P.num("cD")


def _rel(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a - b))


def _unit(rng, dim):
    return rng.standard_normal(dim) + 1j * rng.standard_normal(dim)


# ---------------------------------------------------------------------------
# runners


def run_homomorphism(ctx, probe, P, ptr):
    dims = P.ints("dims", [8, 16, 32, 64])
    cases = P.int("cases", 5)
    tol = P.num("tol", 1e-10)
    z, w = complex(1, 2), complex(-0.5, 1)
    rows = []
    for dim in dims:
        for c in range(cases):
            rng = ctx.rng(f"{probe['id']}/{dim}/{c}")
            op = random_hermitian(dim, rng)
            u = _unit(rng, dim)
            nu = np.linalg.norm(u)
            checks = {
                "identity": np.linalg.norm(spectral_apply(op, lambda x: np.ones_like(x), u) - u) / nu,
                "product": _rel(spectral_apply(op, lambda x: np.exp(1j * x), spectral_apply(op, lambda x: 1 / (1 + x ** 2), u)),
                                spectral_apply(op, lambda x: np.exp(1j * x) / (1 + x ** 2), u)),
                "resolvent": np.linalg.norm(resolvent(op, z, u) - resolvent(op, w, u)
                                            - (w - z) * resolvent(op, z, resolvent(op, w, u))) / nu,
                "expm": _rel(spectral_apply(op, lambda x: np.exp(1j * x), u), linalg.expm(1j * op.matrix) @ u),
            }
            for name, r in checks.items():
                rows.append((dim, c, name, float(r), tol, bool(r <= tol)))
    worst = max(r[3] for r in rows)
    failing = [f"dim={r[0]} case={r[1]} {r[2]} residual={r[3]:.3e}" for r in rows if not r[5]]
    return ProbeOutcome(probe["id"], probe["type"], not failing, {"worstResidual": worst, "tol": tol, "cases": len(rows)},
                        ("dim", "case", "check", "residual", "tol", "pass"), rows, {}, failing)


def run_engines(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    eta = P.profile(ctx, "etaProfile", "eta", "bandlimited")
    psi = P.profile(ctx, "psiProfile", "psi", "holo")
    cases = P.int("cases", 50)
    tol = P.num("tol", 1e-5)
    tmin, tmax = P.num("tMin", 0.1), P.num("tMax", 2.0)
    rows = []
    failing = []
    for c in range(cases):
        rng = ctx.rng(f"{probe['id']}/{c}")
        t = float(np.exp(rng.uniform(np.log(tmin), np.log(tmax))))
        u = _unit(rng, op.dim)
        try:
            e = engine_agreement(op, eta, psi, t, u)
            ok = e["wave"] <= tol and e["contour"] <= tol
            rows.append((c, t, e["wave"], e["contour"], tol, ok))
        except HardyscopeError as exc:
            rows.append((c, t, np.nan, np.nan, tol, False))
            failing.append(f"case {c}: {exc}")
            continue
        if not ok:
            failing.append(f"case {c} t={t:.4g}: wave={e['wave']:.2e} contour={e['contour']:.2e}")
    w = [r[2] for r in rows if np.isfinite(r[2])]
    k = [r[3] for r in rows if np.isfinite(r[3])]
    summ = {"model": op.meta.get("model"), "cases": cases, "worstWave": max(w, default=None),
            "worstContour": max(k, default=None), "tol": tol}
    series = {"wave": {"x": [r[1] for r in rows], "y": [r[2] for r in rows], "xlabel": "t", "ylabel": "relative difference"},
              "contour": {"x": [r[1] for r in rows], "y": [r[3] for r in rows], "xlabel": "t", "ylabel": "relative difference"}}
    return ProbeOutcome(probe["id"], probe["type"], not failing, summ,
                        ("case", "t", "wave", "contour", "tol", "pass"), rows, series, failing)


def run_propagation(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    eps = P.num("epsilon", 1e-8)
    times = P.nums("times") if "times" in P.p else None
    cert = estimate_propagation(op, eps, times)
    rows = [(t, x, R, need) for t, x, R, need in cert.rows]
    expect = P.p.get("expect")
    ok = np.isfinite(cert.c_D) and (expect is None or cert.c_D <= float(expect) + 1e-12)
    return ProbeOutcome(probe["id"], probe["type"], bool(ok), cert.to_dict(),
                        ("t", "point", "radius", "speed"), rows, {}, [] if ok else [f"cD={cert.c_D}"])


def _probe_outcome(probe, res, extra_fail=(), summary_extra=None, series=None):
    failing = [f"{r.form} t={r.t:.6g} s={r.s:.6g} rho={r.rho:.6g} lhs={r.lhs:.3e} bound={r.bound:.3e}"
               for r in res.failing()] + list(extra_fail)
    summ = res.summary()
    summ.pop("passed", None)
    if summary_extra:
        summ.update(summary_extra)
    rows = [r.as_tuple() for r in res.rows]
    return ProbeOutcome(probe["id"], probe["type"], not failing, summ, CSV_HEADER, rows, series or {}, failing)


def _rho_series(res):
    series = {}
    for t in sorted({r.t for r in res.rows}):
        rs = sorted((r for r in res.rows if r.t == t), key=lambda r: r.rho)
        series[f"lhs_t{t:g}"] = {"x": [r.rho for r in rs], "y": [r.lhs for r in rs], "xlabel": "rho", "ylabel": "lhs"}
        series[f"bound_t{t:g}"] = {"x": [r.rho for r in rs], "y": [r.bound for r in rs], "xlabel": "rho", "ylabel": "bound"}
    return series


def run_resolvent(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    pairs = build_pairs(op.space, P.obj("pairs"), ptr + "/params/pairs")
    theta = P.num("theta", np.pi / 4)
    zs = [complex(a, b) for a, b in P.p.get("zs", [])]
    if not zs:
        raise ConfigError("zs must be a nonempty list", ptr + "/params/zs")
    cD = _speed(ctx, op, P)
    try:
        res = probe_resolvent(op, pairs, zs, theta, cD, P.num("slack", 1e-8))
    except PreconditionViolation as exc:
        raise ConfigError(str(exc), ptr + "/params/zs") from exc
    return _probe_outcome(probe, res, series=_rho_series(res))


def run_band(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    eta = P.profile(ctx, "etaProfile", "eta", "bandlimited")
    pairs = build_pairs(op.space, P.obj("pairs"), ptr + "/params/pairs")
    times = P.nums("times", [1.0, 1.5, 2.0, 3.0, 4.0])
    cD = _speed(ctx, op, P)
    zero_tol = P.num("zeroTol", 1e-10)
    res = probe_band(op, eta, pairs, times, cD, P.num("slack", 1e-8))
    extra = [f"rho={r.rho:.6g} > cD delta t={cD * eta.delta * r.t:.6g} but lhs={r.lhs:.3e}"
             for r in res.rows if r.rho > cD * eta.delta * r.t and r.lhs > zero_tol]
    beyond = [r.lhs for r in res.rows if r.rho > cD * eta.delta * r.t]
    return _probe_outcome(probe, res, extra, {"zeroRows": len(beyond), "worstBeyondReach": max(beyond, default=0.0),
                                              "zeroTol": zero_tol}, _rho_series(res))


def run_calderon(ctx, probe, P, ptr):
    pair = P.profile(ctx, "partnerProfile", "psi", "pair")
    grid = P.grid("grid", LogGrid(1e-6, 1e3, 2000))
    tol = P.num("tol", 1e-8)
    res = pairing_integral(pair.eta.eval, pair.psi.eval, grid, tol)
    # oracle: fixed log-trapezoid at ten times the density of the adaptive rule's base grid
    a, b = _alpha_range(pair.delta, pair.theta)
    dense = LogGrid(a, b, 10 * P.int("oracleBase", 2049))
    ev = pair.eta.eval
    c = 2 * pair.delta / np.cos(pair.theta)
    t = dense.nodes
    oracle = []
    for sgn in (1.0, -1.0):
        I = np.sum(dense.weights * t ** pair.sigma * np.exp(-c * t) * np.abs(ev(sgn * t)) ** 2)
        oracle.append(1.0 / I)
    alpha_err = [abs(pair.alpha_plus - oracle[0]) / oracle[0], abs(pair.alpha_minus - oracle[1]) / oracle[1]]
    rows = [("plus", res.plus, abs(res.plus - 1), res.tail_plus, pair.alpha_plus, oracle[0], alpha_err[0]),
            ("minus", res.minus, abs(res.minus - 1), res.tail_minus, pair.alpha_minus, oracle[1], alpha_err[1])]
    failing = []
    for side, val, err, _, _, _, aerr in rows:
        if err > tol:
            failing.append(f"{side} pairing {val!r} differs from 1 by {err:.2e}")
        if aerr > P.num("alphaTol", 1e-8):
            failing.append(f"{side} alpha differs from the oracle by {aerr:.2e}")
    summ = {"pairing": [res.plus, res.minus], "alpha": [pair.alpha_plus, pair.alpha_minus],
            "alphaOracle": oracle, "alphaRelErr": alpha_err, "grid": grid.to_dict()}
    return ProbeOutcome(probe["id"], probe["type"], not failing, summ,
                        ("side", "pairing", "error", "tail", "alpha", "alphaOracle", "alphaRelErr"), rows, {}, failing)


def run_reproduce(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    pair = P.profile(ctx, "partnerProfile", "psi", "pair")
    grid = P.grid("grid", ctx.grid)
    count = P.int("count", 20)
    tol = P.num("tol", 1e-4)
    otol = P.num("oracleTol", 1e-12)
    rows, failing = [], []
    for i in range(count):
        u = _unit(ctx.rng(f"{probe['id']}/{i}"), op.dim)
        r = reproduce(op, pair.eta.eval, pair.psi.eval, u, grid)
        ref = op.norm(r.projected)
        od = abs(r.error - r.oracle_error) / ref if ref > 0 else abs(r.error - r.oracle_error)
        ok = r.relative_error <= tol and od <= otol
        rows.append(("sample", i, grid.count, r.relative_error, od, ok))
        if not ok:
            failing.append(f"u{i}: relative error {r.relative_error:.2e}, oracle gap {od:.2e}")
    counts = P.ints("halvingCounts", [25, 49, 97, 193])
    floor = P.num("halvingFloor", 1e-10)
    u = _unit(ctx.rng(f"{probe['id']}/halving"), op.dim)
    errs = []
    for n in counts:
        g = LogGrid(grid.t_min, grid.t_max, n)
        errs.append(reproduce(op, pair.eta.eval, pair.psi.eval, u, g, coverage_tol=np.inf).relative_error)
    for (n0, e0), (n1, e1) in zip(zip(counts, errs), zip(counts[1:], errs[1:])):
        ok = e0 <= floor or e1 <= e0 / 2
        rows.append(("halving", n1, n1, e1, e0, ok))
        if not ok:
            failing.append(f"halving {n0}->{n1}: {e0:.2e} -> {e1:.2e}")
    series = {"convergence": {"x": counts, "y": errs, "xlabel": "node count", "ylabel": "relative error"}}
    summ = {"worstRelativeError": max(r[3] for r in rows if r[0] == "sample"),
            "worstOracleGap": max(r[4] for r in rows if r[0] == "sample"),
            "halvingErrors": errs, "halvingCounts": counts, "grid": grid.to_dict()}
    return ProbeOutcome(probe["id"], probe["type"], not failing, summ,
                        ("kind", "index", "nodes", "error", "reference", "pass"), rows, series, failing)


def run_quadratic(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    psi = P.profile(ctx, "psiProfile", "psi", "holo")
    grid = P.grid("grid", ctx.grid)
    count = P.int("count", 20)
    tol = P.num("tol", 1e-4)
    P_R = range_projector(op)
    rows, failing = [], []
    for i in range(count):
        u = _unit(ctx.rng(f"{probe['id']}/{i}"), op.dim)
        q = quadratic_functional(op, psi.eval, u, grid)
        ref = op.norm(P_R(u)) ** 2
        rel = abs(q - ref) / ref
        rows.append((i, q, ref, rel, rel <= tol))
        if rel > tol:
            failing.append(f"u{i}: relative gap {rel:.2e}")
    return ProbeOutcome(probe["id"], probe["type"], not failing, {"worstRelative": max(r[3] for r in rows), "tol": tol},
                        ("index", "functional", "normSquared", "relative", "pass"), rows, {}, failing)


_FD = {
    1: ([-2, -1, 1, 2], [1 / 12, -8 / 12, 8 / 12, -1 / 12]),
    2: ([-2, -1, 0, 1, 2], [-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12]),
    3: ([-3, -2, -1, 1, 2, 3], [1 / 8, -1, 13 / 8, -13 / 8, 1, -1 / 8]),
    4: ([-3, -2, -1, 0, 1, 2, 3], [-1 / 6, 2, -13 / 2, 28 / 3, -13 / 2, 2, -1 / 6]),
}


def finite_difference(f: Callable, m: int, h: float) -> complex:
    """Fourth-order central difference for ``f^{(m)}(0)``, ``m <= 4``."""
    offs, ws = _FD[m]
    x = h * np.asarray(offs, float)
    return complex(np.dot(ws, np.asarray(f(x), complex)) / h ** m)


def run_division(ctx, probe, P, ptr):
    eta = P.profile(ctx, "etaProfile", "eta", "bandlimited")
    phi = P.profile(ctx, "phiProfile", "phi", "bandlimited")
    ms = P.ints("ms", [1, 2])
    tol = P.num("tol", 1e-8)
    vtol = P.num("valueTol", 1e-6)
    h = P.num("fdStep", 2e-2)
    ref = eta.closed_eval or eta.eval
    rows, failing = [], []
    for m in ms:
        if m not in _FD:
            raise ConfigError("m must be in 1..4", ptr + "/params/ms")
        q, rep = divide_power(eta, m, report=True)
        back = multiply_power(q, m)
        rt1 = float(np.abs(back.fhat - eta.fhat).max() / eta.fhat_sup)
        q2 = divide_power(multiply_power(phi, m), m)
        rt2 = float(np.abs(q2.fhat - phi.fhat).max() / phi.fhat_sup)
        fd = finite_difference(ref, m, h) / factorial(m)
        v0 = complex(q.eval(0.0))
        scale = max(abs(fd), eta.fhat_l1 / (2 * np.pi))
        vd = abs(v0 - fd) / scale
        ok = rep.leakage <= tol and rt1 <= tol and rt2 <= tol and vd <= vtol
        rows.append((m, rep.leakage, rt1, rt2, v0.real, fd.real, vd, ok))
        if not ok:
            failing.append(f"m={m}: leak {rep.leakage:.1e}, roundtrips {rt1:.1e}/{rt2:.1e}, value gap {vd:.1e}")
    return ProbeOutcome(probe["id"], probe["type"], not failing, {"moments": eta.moment_order(), "ms": ms},
                        ("m", "leakage", "multiplyDivide", "divideMultiply", "valueAtZero", "fdOracle", "valueGap", "pass"),
                        rows, {}, failing)


def _stability(vals: list) -> float:
    v = np.asarray(vals, float)
    return float(v.max() / v.min() - 1.0) if v.min() > 0 else np.inf


def run_two_param(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    pair = P.profile(ctx, "partnerProfile", "psi", "pair")
    pairs = build_pairs(op.space, P.obj("pairs"), ptr + "/params/pairs")
    lo, hi = P.num("sMin", 0.7), P.num("sMax", 4.0)
    res_list = P.ints("resolutions", [5, 9])
    stab = P.num("stability", 0.2)
    m, n = P.num("m", 1), P.num("n", 1)
    N = P.int("N", pair.eta.moment_order())
    delta = P.num("delta", 0.5)
    Cs, outs = [], []
    try:
        for k in res_list:
            g = np.geomspace(lo, hi, k)
            r = probe_two_param(op, pair.eta, pair.psi, pairs, g, g, m, n, N, pair.sigma, pair.tau, delta)
            Cs.append(r.fitted["C"])
            outs.append(r)
    except PreconditionViolation as exc:
        raise ConfigError(str(exc), ptr + "/params") from exc
    spread = _stability(Cs)
    extra = [] if spread <= stab and np.all(np.isfinite(Cs)) else [f"fitted C not stable: {Cs}"]
    out = _probe_outcome(probe, outs[-1], extra, {"fittedC": Cs, "resolutions": res_list, "spread": spread})
    out.rows = [r.as_tuple() for o in outs for r in o.rows]
    out.series = {"fittedC": {"x": res_list, "y": Cs, "xlabel": "grid points", "ylabel": "C"}}
    return out


def run_composed(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    eta = P.profile(ctx, "etaProfile", "eta", "bandlimited")
    pairs = build_pairs(op.space, P.obj("pairs"), ptr + "/params/pairs")
    lo, hi = P.num("sMin", 0.7), P.num("sMax", 4.0)
    res_list = P.ints("resolutions", [3, 5])
    alpha = P.num("alpha", 2.0)
    stab = P.num("stability", 0.2)
    lam = op.eigenvalues
    fam = lambda t: eta.eval(t * lam)
    Cs, outs = [], []
    for k in res_list:
        g = np.geomspace(lo, hi, k)
        r = probe_composed(op, fam, fam, pairs, g, g, alpha)
        Cs.append(r.fitted["Cfitted"])
        outs.append(r)
    spread = _stability(Cs)
    extra = [] if spread <= stab and np.all(np.isfinite(Cs)) else [f"fitted constant not stable: {Cs}"]
    out = _probe_outcome(probe, outs[-1], extra, {"fittedC": Cs, "resolutions": res_list, "spread": spread})
    out.rows = [r.as_tuple() for o in outs for r in o.rows]
    return out


def random_bump_field(space, grid, rng, bumps=5, amp_decades=2.0, width=(0.1, 1.0)) -> np.ndarray:
    """Sum of random tent-supported pieces with log-uniform amplitudes."""
    V = np.zeros((grid.count, space.n))
    for _ in range(bumps):
        c = int(rng.integers(space.n))
        r = rng.uniform(*width) * space.diameter / np.pi
        amp = 10 ** rng.uniform(-amp_decades, amp_decades)
        V += amp * rng.standard_normal(V.shape) * tent_mask(space, Ball(c, r), grid.nodes)
    return V


def run_tent_decomposition(ctx, probe, P, ptr):
    op, model = _operator(ctx, probe, ptr)
    space = op.space
    grid = P.grid("grid", LogGrid(0.05, 4.0, 64))
    seeds = P.int("seeds", 10)
    tol = P.num("tol", 1e-10)
    band = P.num("stabilityFactor", 2.0)
    rows, failing, cdec = [], [], []
    for s in range(seeds):
        rng = ctx.rng(f"{probe['id']}/{s}")
        U = TentField(space, grid, random_bump_field(space, grid, rng, P.int("bumps", 5)))
        d = atomic_decompose(U)
        bad = [i for i, a in enumerate(d.atoms) if not is_tent_atom(a.field, a.ball).passed]
        ok = d.residual_t2 <= tol and not bad
        cdec.append(d.C_dec)
        rows.append((s, len(d.atoms), d.residual_t2, d.residual_t1, d.l1, d.t1_norm, d.C_dec, len(bad), ok))
        if not ok:
            failing.append(f"seed {s}: residual {d.residual_t2:.2e}, {len(bad)} atoms fail the verifier")
    med = float(np.median(cdec))
    for s, c in enumerate(cdec):
        if not (med / band <= c <= med * band):
            failing.append(f"seed {s}: C_dec {c:.3f} outside factor {band} of the median {med:.3f}")
    summ = {"Cdec": cdec, "CdecMedian": med, "worstResidualT2": max(r[2] for r in rows), "grid": grid.to_dict()}
    series = {"Cdec": {"x": list(range(seeds)), "y": cdec, "xlabel": "seed", "ylabel": "C_dec"}}
    return ProbeOutcome(probe["id"], probe["type"], not failing, summ,
                        ("seed", "atoms", "residualT2", "residualT1", "l1", "t1Norm", "Cdec", "badAtoms", "pass"),
                        rows, series, failing)


def run_tent_duality(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    space = op.space
    grid = P.grid("grid", LogGrid(0.05, 4.0, 32))
    seeds = P.int("seeds", 10)
    band = P.num("stabilityFactor", 2.0)
    rows, ratios = [], []
    for s in range(seeds):
        rng = ctx.rng(f"{probe['id']}/{s}")
        U = TentField(space, grid, random_bump_field(space, grid, rng, 3))
        V = TentField(space, grid, U.values * (1 + 0.5 * rng.standard_normal(U.values.shape)))
        r = duality_ratio(U, V)
        ratios.append(r)
        rows.append((s, r))
    med = float(np.median(ratios))
    failing = [f"seed {s}: ratio {r:.3f} outside factor {band} of {med:.3f}"
               for s, r in rows if not (med / band <= r <= med * band)]
    return ProbeOutcome(probe["id"], probe["type"], not failing, {"Cdual": max(ratios), "median": med},
                        ("seed", "ratio"), rows, {}, failing)


def smooth_tent_atom(op: SelfAdjointOperator, grid: LogGrid, ball: Ball, coeffs: np.ndarray) -> TentAtom:
    """Tent atom ``A_t(y) = sum_k c_{k,d} cos(k pi rho(y, c) / r) (t / r)`` masked to ``T(ball)``.

    ``coeffs`` has shape ``(modes, fiber_dim)``; the field is normalized to
    ``||A||_{T^2} = mu(ball)^{-1/2}``.
    """
    space = op.space
    rho = space.dist[ball.center][op.dof_points]
    fiber = np.zeros(op.dim, int)
    for x in range(space.n):
        idx = np.flatnonzero(op.dof_points == x)
        fiber[idx] = np.arange(idx.size)
    k = np.arange(coeffs.shape[0])[:, None]
    prof = np.sum(coeffs[:, fiber] * np.cos(k * np.pi * rho[None, :] / ball.radius), axis=0)
    T = tent_mask(space, ball, grid.nodes)[:, op.dof_points]
    vals = np.where(T, (grid.nodes[:, None] / ball.radius) * prof[None, :], 0.0)
    U = TentField.for_operator(op, grid, vals)
    nrm = t2_norm(U)
    if nrm == 0:
        raise PreconditionViolation("tent atom is empty; enlarge the ball or lower the grid")
    return TentAtom(U * (ball.measure(space) ** -0.5 / nrm), ball)


def _atom_setup(ctx, probe, P, ptr, op, i, fiber):
    rng = ctx.rng(f"{probe['id']}/{i}")
    rlo, rhi = P.nums("radius", [1.0, 1.2])
    ball = Ball(int(rng.integers(op.space.n)), float(rng.uniform(rlo, rhi)))
    coeffs = rng.standard_normal((P.int("modes", 3), fiber)) + 1j * rng.standard_normal((P.int("modes", 3), fiber))
    return ball, coeffs


def _cert_row(i, cert, chk, l1):
    return (i, cert.kind, cert.N, cert.m, cert.alpha, cert.scale, chk.residual, cert.support_leak,
            l1.l1, l1.annulus_sum, bool(chk.passed and l1.passed))


_CERT_HEADER = ("index", "kind", "N", "m", "alpha", "scale", "powerResidual", "supportLeak",
                "l1", "annulusSum", "pass")


def run_hardy_atoms(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    eta = P.profile(ctx, "etaProfile", "eta", "bandlimited")
    N = P.int("N", eta.moment_order())
    grid = P.grid("tentGrid", LogGrid(0.65, 1.2, 12))
    count = P.int("count", 20)
    need_atom = bool(P.p.get("requireAtom", True))
    stab = P.num("scaleStability", 0.2)
    cD = _speed(ctx, op, P, default_eps=1e-10)
    rows, failing, drift = [], [], []
    for i in range(count):
        ball, coeffs = _atom_setup(ctx, probe, P, ptr, op, i, op.fiber_dim)
        A = smooth_tent_atom(op, grid, ball, coeffs)
        cert = build_hardy_atom(A, eta, N, op, cD)
        chk, l1 = verify_molecule(cert), molecule_l1_check(cert)
        rows.append(_cert_row(i, cert, chk, l1))
        if not chk.passed or not l1.passed or (need_atom and cert.kind != "atom"):
            failing.append(f"atom {i}: kind={cert.kind} failing annuli {chk.failing} residual {chk.residual:.1e} "
                           f"support {chk.support_violations[:5]} l1 {l1.l1:.3f}/{l1.annulus_sum:.3f}")
        if i < P.int("refineCount", 3):
            fine = build_hardy_atom(smooth_tent_atom(op, grid.refined(), ball, coeffs), eta, N, op, cD)
            d = abs(fine.scale / cert.scale - 1)
            drift.append(d)
            if d > stab:
                failing.append(f"atom {i}: scale {cert.scale:.4g} vs refined {fine.scale:.4g}")
    summ = {"cD": cD, "N": N, "worstL1": max(r[8] for r in rows), "worstResidual": max(r[6] for r in rows),
            "scaleDrift": drift, "kinds": sorted({r[1] for r in rows})}
    return ProbeOutcome(probe["id"], probe["type"], not failing, summ, _CERT_HEADER, rows, {}, failing)


def run_sqrtl_atoms(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    eta = P.profile(ctx, "etaProfile", "etaEven", "bandlimited")
    N = P.int("N", eta.moment_order() // 2)
    grid = P.grid("tentGrid", LogGrid(0.05, 0.2, 8))
    count = P.int("count", 5)
    ctol = P.num("cosineTol", 1e-8)
    cL = _speed(ctx, op, P, evolution=cosine_evolution, default_eps=1e-10)
    # alpha int t^{2N} phi_hat^2 t^2 e^{-t^2} dt/t through the profile's own samples
    norm = log_quad(lambda t: np.real(eta.eval(t)) * t ** 2 * np.exp(-t ** 2), 1e-6, 12.0, rtol=1e-12)
    rows, failing = [], []
    if abs(norm - 1) > P.num("normTol", 1e-8):
        failing.append(f"normalization integral {norm!r}")
    worst_cos = 0.0
    for i in range(count):
        ball, coeffs = _atom_setup(ctx, probe, P, ptr, op, i, op.fiber_dim)
        cert = build_sqrtL_atom(smooth_tent_atom(op, grid, ball, coeffs), eta, N, op, cL)
        chk, l1 = verify_molecule(cert), molecule_l1_check(cert)
        worst_cos = max(worst_cos, cert.diagnostics["cosineGroupAgreement"])
        rows.append(_cert_row(i, cert, chk, l1))
        if not chk.passed or not l1.passed or cert.diagnostics["cosineGroupAgreement"] > ctol:
            failing.append(f"atom {i}: failing annuli {chk.failing} residual {chk.residual:.1e} "
                           f"cosine {cert.diagnostics['cosineGroupAgreement']:.1e}")
    summ = {"cL": cL, "N": N, "normalization": norm, "worstCosineAgreement": worst_cos}
    return ProbeOutcome(probe["id"], probe["type"], not failing, summ, _CERT_HEADER, rows, {}, failing)


def run_bd_bridge(ctx, probe, P, ptr):
    _, model = _operator(ctx, probe, ptr)
    dm = model.divergence
    if dm is None:
        raise ConfigError("bd-bridge needs a divergence model", ptr + "/model")
    grid = P.grid("grid", LogGrid(1e-3, 1.0, 40))
    count = P.int("count", 5)
    p = P.num("p", 1.0)
    sq_tol, blk_tol = P.num("squareTol", 1e-13), P.num("blockTol", 1e-10)
    rows, failing = [], []
    for i in range(count):
        u = _unit(ctx.rng(f"{probe['id']}/u{i}"), dm.n)
        r = bd_bridge_check(dm, u, grid, p)
        ok = r.bd_square_residual <= sq_tol and r.block_residual <= blk_tol and abs(r.ratio - 1) <= blk_tol
        rows.append(("bridge", i, r.bd_square_residual, r.block_residual, r.ratio, ok))
        if not ok:
            failing.append(f"u{i}: square {r.bd_square_residual:.1e} block {r.block_residual:.1e} ratio {r.ratio!r}")
    eta = P.profile(ctx, "etaProfile", "eta", "bandlimited")
    N2 = P.int("N2", 2)
    atoms = P.int("atoms", 3)
    cBD = _speed(ctx, dm.BD, P, default_eps=1e-10)
    tgrid = P.grid("tentGrid", LogGrid(0.05, 0.2, 8))
    for i in range(atoms):
        ball, coeffs = _atom_setup(ctx, probe, P, ptr, dm.BD, i, 2)
        cert = build_hardy_atom(smooth_tent_atom(dm.BD, tgrid, ball, coeffs), eta, N2, dm.BD, cBD)
        cb = verify_molecule(cert)
        Lc = bd_to_L_certificate(cert, dm)
        cl = verify_molecule(Lc)
        ok = cb.passed and cl.passed
        rows.append(("atom", i, cb.residual, cl.residual, Lc.N, ok))
        if not ok:
            failing.append(f"atom {i}: BD pass={cb.passed} L pass={cl.passed} failing {cl.failing}")
    summ = {"squareResidual": dm.bd_square_residual(), "worstBlock": max(r[3] for r in rows if r[0] == "bridge"),
            "cBD": cBD, "N2": N2}
    return ProbeOutcome(probe["id"], probe["type"], not failing, summ,
                        ("kind", "index", "a", "b", "c", "pass"), rows, {}, failing)


def run_davies_gaffney(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    pairs = build_pairs(op.space, P.obj("pairs"), ptr + "/params/pairs")
    times = P.nums("times", [1e-3, 3e-3, 1e-2])
    res = probe_davies_gaffney(op, pairs, times)
    extra = [] if res.fitted["c"] > 0 else [f"fitted c={res.fitted['c']} is not positive"]
    series = {}
    for t in times:
        rs = sorted((r for r in res.rows if r.t == t), key=lambda r: r.rho)
        series[f"lhs_t{t:g}"] = {"x": [r.rho for r in rs], "y": [r.lhs for r in rs], "xlabel": "rho", "ylabel": "lhs"}
    return _probe_outcome(probe, res, extra, series=series)


def run_h4_chain(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    grid = P.grid("grid", LogGrid(1e-3, 1.0, 40))
    count = P.int("count", 20)
    rows, failing = [], []
    for i in range(count):
        rng = ctx.rng(f"{probe['id']}/{i}")
        F = np.zeros((grid.count, op.dim), complex)
        j0 = int(rng.integers(0, grid.count - 10))
        x0 = int(rng.integers(0, op.dim - 10))
        F[j0:j0 + 10, x0:x0 + 10] = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
        c = h4_chain(op, F, grid)
        rows.append((i, *c.lines, c.rhs, c.margin, c.passed))
        if not c.passed:
            failing.append(f"field {i}: lines {c.lines} rhs {c.rhs}")
    return ProbeOutcome(probe["id"], probe["type"], not failing, {"worstMargin": min(r[7] for r in rows)},
                        ("index", "line1", "line2", "line3", "line4", "line5", "rhs", "margin", "pass"),
                        rows, {}, failing)


def run_doubling(ctx, probe, P, ptr):
    op, _ = _operator(ctx, probe, ptr)
    space = op.space
    h = space.min_positive_distance
    radii = P.nums("radii", list(np.geomspace(h, space.diameter, 12)))
    alphas = P.nums("alphas", [1.0, 1.5, 2.0, 4.0, 8.0])
    cert = estimate_doubling(space, radii, alphas)
    viol = check_doubling(space, cert, radii, alphas)
    summ = cert.to_dict()
    summ["checkViolations"] = viol
    ok = viol == 0 and np.isfinite(cert.A)
    return ProbeOutcome(probe["id"], probe["type"], bool(ok), summ, ("kappa", "A"),
                        [(float(k), float(a)) for k, a in zip(cert.kappa_grid, cert.A_by_kappa)], {},
                        [] if ok else [f"{viol} violations"])


RUNNERS = {
    "homomorphism": run_homomorphism,
    "engines": run_engines,
    "propagation": run_propagation,
    "resolvent": run_resolvent,
    "band": run_band,
    "calderon": run_calderon,
    "reproduce": run_reproduce,
    "quadratic": run_quadratic,
    "division": run_division,
    "two-param": run_two_param,
    "composed": run_composed,
    "tent-decomposition": run_tent_decomposition,
    "tent-duality": run_tent_duality,
    "hardy-atoms": run_hardy_atoms,
    "sqrtl-atoms": run_sqrtl_atoms,
    "bd-bridge": run_bd_bridge,
    "davies-gaffney": run_davies_gaffney,
    "h4-chain": run_h4_chain,
    "doubling": run_doubling,
}


def run_probe(ctx: Context, probe: dict, index: int) -> ProbeOutcome:
    """Run one probe; config problems propagate, numerical failures are recorded."""
    ptr = f"/probes/{index}"
    P = Params(probe.get("params", {}), ptr)
    try:
        return RUNNERS[probe["type"]](ctx, probe, P, ptr)
    except ConfigError:
        raise
    except PreconditionViolation as exc:
        raise ConfigError(str(exc), ptr) from exc
    except HardyscopeError as exc:
        return ProbeOutcome(probe["id"], probe["type"], False, {}, (), [], {}, [str(exc)],
                            f"{type(exc).__name__}: {exc}")

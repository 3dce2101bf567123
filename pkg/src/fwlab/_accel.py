"""Compiled hot kernel for vanilla FW on quadratics over lp-balls / the simplex.

The kernel replays exactly the pure-numpy loop in fw._fw_run_python for the
quadratic case. FWLAB_PURE_NUMPY=1 (or use_accel=False) selects the numpy
path; without numba installed the package silently falls back.
"""

from __future__ import annotations

import os

import numpy as np

from .core import EARLY_EXIT_REL_TOL, ConstantStep, LineSearch, OpenLoop, RunTrace, ShortStep

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


REGION_SIMPLEX = 0
REGION_LP_BALL = 1

RULE_OPENLOOP = 0
RULE_LINESEARCH = 1
RULE_SHORTSTEP = 2
RULE_CONSTANT = 3

REF_NONE = 0
REF_IDENTITY = 1
REF_DENSE = 2


def enabled(use_accel: bool | None = None) -> bool:
    if use_accel is not None:
        return use_accel and HAS_NUMBA
    if os.environ.get("FWLAB_PURE_NUMPY", "0").lower() in ("1", "true", "yes"):
        return False
    return HAS_NUMBA


def supports(objective, region, rule) -> bool:
    from .objectives import QuadraticObjective
    from .regions import LpBall, ProbabilitySimplex

    if not isinstance(objective, QuadraticObjective):
        return False
    if not isinstance(region, (LpBall, ProbabilitySimplex)):
        return False
    if isinstance(region, LpBall) and region.center is not None:
        return False
    if objective.fstar is None:
        return False
    return isinstance(rule, (OpenLoop, LineSearch, ShortStep, ConstantStep))


@njit(cache=True)
def _lmo(kind, c, p, radius, out):
    d = c.shape[0]
    for i in range(d):
        out[i] = 0.0
    if kind == REGION_SIMPLEX:
        best = 0
        for i in range(1, d):
            if c[i] < c[best]:
                best = i
        out[best] = 1.0
        return
    cmax = 0.0
    for i in range(d):
        a = abs(c[i])
        if a > cmax:
            cmax = a
    if cmax == 0.0:
        return
    if p == 1.0:
        best = 0
        abest = abs(c[0])
        for i in range(1, d):
            a = abs(c[i])
            if a > abest:
                abest = a
                best = i
        out[best] = -radius if c[best] > 0.0 else radius
        return
    q = p / (p - 1.0)
    snorm = 0.0
    for i in range(d):
        snorm += (abs(c[i]) / cmax) ** q
    denom = (snorm ** (1.0 / q)) ** (q / p)
    for i in range(d):
        s = 1.0 if c[i] > 0.0 else (-1.0 if c[i] < 0.0 else 0.0)
        out[i] = -radius * s * (abs(c[i]) / cmax) ** (1.0 / (p - 1.0)) / denom


@njit(cache=True)
def _feasible(kind, x, p, radius, tol):
    d = x.shape[0]
    if kind == REGION_SIMPLEX:
        s = 0.0
        for i in range(d):
            if x[i] < -tol:
                return False
            s += x[i]
        return abs(s - 1.0) <= tol
    acc = 0.0
    for i in range(d):
        acc += abs(x[i]) ** p
    return acc ** (1.0 / p) <= radius + tol * max(1.0, radius)


@njit(cache=True)
def _fw_kernel(A, At, has_A, b, xstar, rstar, ref_mode, fstar, L,
               region_kind, pball, radius, rule_kind, rule_param,
               x, iters, hs, gaps, etas):
    d = x.shape[0]
    p_vec = np.empty(d)
    exit_t = -1
    min_gnorm = np.inf
    for t in range(iters + 1):
        # residual and gradient
        if has_A:
            r = A @ x - b
            g = At @ r
        else:
            r = x - b
            g = r.copy()
        f = 0.0
        gnorm = 0.0
        for i in range(d):
            f += r[i] * r[i]
            gnorm += g[i] * g[i]
        f *= 0.5
        gnorm = np.sqrt(gnorm)
        if gnorm < min_gnorm:
            min_gnorm = gnorm
        if not np.isfinite(f):
            return -2, t, min_gnorm
        # primal gap
        if ref_mode == REF_NONE:
            h = f - fstar
        else:
            u = x - xstar
            if ref_mode == REF_DENSE:
                au = A @ u
            else:
                au = u
            h = 0.0
            for i in range(d):
                h += au[i] * (r[i] + rstar[i])
            h *= 0.5
        _lmo(region_kind, g, pball, radius, p_vec)
        gap = 0.0
        for i in range(d):
            gap += g[i] * (x[i] - p_vec[i])
        hs[t] = h
        gaps[t] = gap
        etas[t] = 0.0
        if t == iters:
            break
        if gap <= EARLY_EXIT_REL_TOL * (1.0 + abs(f)):
            exit_t = t
            break
        # step length
        if rule_kind == RULE_OPENLOOP:
            eta = rule_param / (t + rule_param)
        elif rule_kind == RULE_CONSTANT:
            eta = rule_param
        else:
            num = gap
            den = 0.0
            if rule_kind == RULE_SHORTSTEP:
                for i in range(d):
                    den += (x[i] - p_vec[i]) ** 2
                den *= L
            else:
                if has_A:
                    ad = A @ (x - p_vec)
                    for i in range(d):
                        den += ad[i] * ad[i]
                else:
                    for i in range(d):
                        den += (x[i] - p_vec[i]) ** 2
            if den <= 0.0:
                eta = 0.0 if num <= 0.0 else 1.0
            else:
                eta = num / den
                if eta > 1.0:
                    eta = 1.0
                elif eta < 0.0:
                    eta = 0.0
        etas[t] = eta
        for i in range(d):
            x[i] = (1.0 - eta) * x[i] + eta * p_vec[i]
        if not _feasible(region_kind, x, pball, radius, 1e-8):
            return -3, t, min_gnorm
    return 0, exit_t, min_gnorm


def fw_run_compiled(objective, region, rule, x0, iters, meta) -> RunTrace | None:
    from .regions import LpBall

    if isinstance(region, LpBall):
        region_kind, pball, radius = REGION_LP_BALL, region.p, region.radius
    else:
        region_kind, pball, radius = REGION_SIMPLEX, 0.0, 0.0

    if isinstance(rule, OpenLoop):
        rule_kind, rule_param = RULE_OPENLOOP, float(rule.ell)
    elif isinstance(rule, LineSearch):
        rule_kind, rule_param = RULE_LINESEARCH, 0.0
    elif isinstance(rule, ShortStep):
        rule_kind, rule_param = RULE_SHORTSTEP, 0.0
    else:
        rule_kind, rule_param = RULE_CONSTANT, float(rule.eta)

    d = x0.shape[0]
    empty = np.zeros(0)
    empty2 = np.zeros((0, 0))
    if objective.A is None:
        A, At, has_A = empty2, empty2, False
    else:
        A, At, has_A = objective.A, objective.At, True
    if objective.xstar is None:
        xstar, rstar, ref_mode = empty, empty, REF_NONE
    else:
        xstar, rstar = objective.xstar, objective._rstar
        ref_mode = REF_DENSE if has_A else REF_IDENTITY

    hs = np.empty(iters + 1)
    gaps = np.empty(iters + 1)
    etas = np.empty(iters + 1)
    x = x0.copy()
    status, exit_t, min_gnorm = _fw_kernel(A, At, has_A, b=objective.b, xstar=xstar, rstar=rstar,
                                ref_mode=ref_mode, fstar=float(objective.fstar), L=float(objective.smoothness_L),
                                region_kind=region_kind, pball=pball, radius=radius,
                                rule_kind=rule_kind, rule_param=rule_param,
                                x=x, iters=iters, hs=hs, gaps=gaps, etas=etas)
    if status == -2:
        raise RuntimeError("objective value is not finite")
    if status == -3:
        raise RuntimeError("iterate left the region")

    trace = RunTrace(meta)
    last = exit_t if exit_t >= 0 else iters
    for t in range(last + 1):
        trace.append(t, hs[t], gaps[t], etas[t], "fw")
    if exit_t >= 0:
        trace.metadata["early_exit_t"] = int(exit_t)
        trace.pad_to(iters)
    trace.metadata["x_final"] = x
    trace.metadata["min_grad_norm"] = float(min_gnorm)
    trace.metadata["accel"] = True
    return trace

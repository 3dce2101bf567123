"""Vanilla Frank-Wolfe: iterate x <- (1-eta) x + eta p with p from the LMO.

The run emits a RunTrace with one record per iteration (t = 0..T), primal
gap, duality gap, step length and kind. Quadratic objectives over lp-balls
or the simplex run through a compiled kernel when numba is available (the
pure-numpy path is selected by FWLAB_PURE_NUMPY=1 or per-call override).
"""

from __future__ import annotations

import numpy as np

from . import _accel
from .core import (
    EARLY_EXIT_REL_TOL,
    ConstantStep,
    LineSearch,
    OpenLoop,
    RunTrace,
    ShortStep,
    StepRule,
    as_point,
    rule_label,
    step_length,
)
from .objectives import QuadraticObjective
from .regions import LpBall, ProbabilitySimplex

ITERATE_FEAS_TOL = 1e-8


def _base_metadata(objective, region, rule, x0, iters, seed=None) -> dict:
    return {
        "algo": "fw",
        "rule": rule_label(rule),
        "region_id": getattr(region, "id_string", lambda: repr(region))(),
        "objective_id": getattr(objective, "id_string", lambda: repr(objective))(),
        "iters": int(iters),
        "seed": seed,
        "fstar": getattr(objective, "fstar", None),
        "fstar_provenance": getattr(objective, "fstar_provenance", None),
    }


def fw_run(objective, region, rule: StepRule, x0, iters: int, *,
           metadata: dict | None = None, use_accel: bool | None = None) -> RunTrace:
    """Run Frank-Wolfe for `iters` iterations from the feasible point x0.

    Parameters
    ----------
    objective : objective oracle
        Needs value/gradient and, for primal gaps, an attached reference
        optimum (fstar, optionally xstar).
    region : feasible region
        Needs lmo and contains.
    rule : StepRule
        Open loop, line search, short step, or constant.
    x0 : array
        Feasible starting point.
    iters : int
        Iteration budget; the trace holds iters + 1 records. The run exits
        early once the duality gap falls below 1e-14 * (1 + |f|), padding
        the trace with the final record.

    Returns
    -------
    RunTrace
        Per-iteration records plus metadata (including the final iterate
        under ``metadata["x_final"]``).
    """
    if iters < 1:
        raise ValueError("iteration budget must be >= 1")
    x = as_point(x0, region.dimension)
    if not region.contains(x, ITERATE_FEAS_TOL):
        raise ValueError("x0 is infeasible")

    meta = _base_metadata(objective, region, rule, x, iters)
    if metadata:
        meta.update(metadata)

    if _accel.enabled(use_accel) and _accel.supports(objective, region, rule):
        trace = _accel.fw_run_compiled(objective, region, rule, x, iters, meta)
        if trace is not None:
            return trace
    return _fw_run_python(objective, region, rule, x, iters, meta)


def _fw_run_python(objective, region, rule, x, iters, meta) -> RunTrace:
    trace = RunTrace(meta)
    is_quadratic = isinstance(objective, QuadraticObjective)
    L = getattr(objective, "smoothness_L", None)
    exited = False
    min_grad_norm = np.inf

    for t in range(iters):
        if is_quadratic:
            r = objective.residual(x)
            f = objective.value_from_residual(r)
            g = objective.gradient_from_residual(x, r)
            h = objective.primal_gap(x, r)
        else:
            f = objective.value(x)
            g = objective.gradient(x)
            h = f - objective.fstar
        if not np.isfinite(f):
            raise RuntimeError(f"objective value is not finite at iteration {t}")
        min_grad_norm = min(min_grad_norm, float(np.linalg.norm(g)))
        p = region.lmo(g)
        fw_gap = float(g @ (x - p))
        if fw_gap <= EARLY_EXIT_REL_TOL * (1.0 + abs(f)):
            trace.append(t, h, fw_gap, 0.0, "fw")
            exited = True
            break
        eta = step_length(rule, t, x=x, p=p, gradient=g, L=L, objective=objective)
        trace.append(t, h, fw_gap, eta, "fw")
        x = (1.0 - eta) * x + eta * p
        if not region.contains(x, ITERATE_FEAS_TOL):
            raise RuntimeError(f"iterate left the region at iteration {t}")

    if exited:
        trace.metadata["early_exit_t"] = int(trace.t[-1])
        trace.pad_to(iters)
    else:
        if is_quadratic:
            r = objective.residual(x)
            g = objective.gradient_from_residual(x, r)
            h = objective.primal_gap(x, r)
        else:
            g = objective.gradient(x)
            h = objective.value(x) - objective.fstar
        min_grad_norm = min(min_grad_norm, float(np.linalg.norm(g)))
        p = region.lmo(g)
        trace.append(iters, h, float(g @ (x - p)), 0.0, "fw")
    trace.metadata["x_final"] = x
    trace.metadata["min_grad_norm"] = min_grad_norm
    return trace


def certify_gradient_lower_bound(trace_min_grad_norm: float, lam_used: float) -> bool:
    """A-posteriori check that the constant rule's lambda underestimates the gradient norms."""
    return trace_min_grad_norm >= lam_used


def constant_rule_for_instance(objective, region, safety: float = 0.9):
    """Constant step alpha*lambda/(2L) with lambda estimated from the reference optimum.

    lambda is taken as safety * ||grad f(x*)||; runs certify it a
    posteriori against min_t ||grad f(x_t)||. Requires uniformly convex
    region metadata with q = 2 (strongly convex regions).
    """
    uc = getattr(region, "uniform_convexity", None)
    if uc is None or uc[1] != 2.0:
        raise ValueError("constant rule needs a strongly convex region (q = 2)")
    if objective.xstar is None:
        raise ValueError("constant rule needs a reference optimum")
    alpha = uc[0]
    lam = safety * float(np.linalg.norm(objective.gradient(objective.xstar)))
    if lam <= 0.0:
        raise ValueError("gradient lower bound estimate is zero; optimum is interior")
    objective.gradient_lower_bound_lambda = lam
    eta = alpha * lam / (2.0 * objective.smoothness_L)
    return ConstantStep(min(eta, 1.0)), alpha, lam

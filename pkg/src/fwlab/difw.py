"""Decomposition-invariant pairwise Frank-Wolfe over simplex-like polytopes.

No active set is maintained: the away vertex is obtained from a
support-restricted oracle, and open-loop steps are rounded down to powers
of two, which keeps every coordinate on a dyadic grid and hence every
iterate exactly feasible.
"""

from __future__ import annotations

import numpy as np

from .core import (
    EARLY_EXIT_REL_TOL,
    LineSearch,
    OpenLoop,
    RunTrace,
    StepRule,
    as_point,
    rule_label,
)

PAIRWISE_GAP_TOL = 1e-12
FEAS_SUM_TOL = 1e-10
FEAS_NEG_TOL = 1e-12


def pow2_round_down(eta: float) -> float:
    """Largest power of two 2^-k (k a natural number) that is <= eta."""
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"step {eta} outside (0, 1]")
    gamma = 1.0
    while gamma > eta:
        gamma *= 0.5
    return gamma


def _check_state(region, x: np.ndarray, t: int):
    if float(x.min()) < -FEAS_NEG_TOL:
        raise RuntimeError(
            f"iterate has negative coordinate {x.min()} at t={t}; state dump: {x!r}")
    resid = region.constraint_A @ x - region.constraint_b
    if float(np.max(np.abs(resid))) > FEAS_SUM_TOL:
        raise RuntimeError(
            f"equality constraints violated by {np.max(np.abs(resid))} at t={t}; state dump: {x!r}")


def difw_run(objective, region, rule: StepRule, x0, iters: int, *,
             metadata: dict | None = None, check_invariants: bool = True) -> RunTrace:
    """Run decomposition-invariant pairwise Frank-Wolfe.

    Parameters
    ----------
    objective : objective oracle
    region : simplex-like polytope
        Needs lmo, a support-restricted away_lmo(gradient, x), and the
        constraint data (constraint_A, constraint_b).
    rule : OpenLoop or LineSearch
        Open-loop steps are rounded down to powers of two; line search
        minimizes along p+ - p- subject to the maximal feasible step.
    x0 : array
        Feasible starting point; the run's first move jumps to the vertex
        minimizing <grad f(x0), p>.
    iters : int
        Iteration budget (trace holds iters + 1 records; early exit pads).
    """
    if iters < 1:
        raise ValueError("iteration budget must be >= 1")
    if not isinstance(rule, (OpenLoop, LineSearch)):
        raise ValueError("pairwise runs support open-loop or line-search rules")
    for attr in ("away_lmo", "constraint_A", "constraint_b"):
        if not hasattr(region, attr):
            raise ValueError("region does not expose the simplex-like polytope interface")
    x = as_point(x0, region.dimension)
    if not region.contains(x, 1e-10):
        raise ValueError("x0 is infeasible")

    meta = {
        "algo": "difw",
        "rule": rule_label(rule),
        "region_id": getattr(region, "id_string", lambda: repr(region))(),
        "objective_id": getattr(objective, "id_string", lambda: repr(objective))(),
        "iters": int(iters),
    }
    if metadata:
        meta.update(metadata)
    trace = RunTrace(meta)
    exited = False

    # first move: jump to the best vertex for the starting gradient
    g = objective.gradient(x)
    f = objective.value(x)
    p = region.lmo(g)
    fw_gap = float(g @ (x - p))
    if fw_gap <= EARLY_EXIT_REL_TOL * (1.0 + abs(f)):
        trace.append(0, objective.primal_gap(x), fw_gap, 0.0, "fw")
        exited = True
    else:
        trace.append(0, objective.primal_gap(x), fw_gap, 1.0, "fw")
        x = p.copy()

    t = 1
    while not exited and t < iters:
        g = objective.gradient(x)
        f = objective.value(x)
        if not np.isfinite(f):
            raise RuntimeError(f"objective value is not finite at iteration {t}")
        h = objective.primal_gap(x)
        p_plus = region.lmo(g)
        fw_gap = float(g @ (x - p_plus))
        if fw_gap <= EARLY_EXIT_REL_TOL * (1.0 + abs(f)):
            trace.append(t, h, fw_gap, 0.0, "pairwise")
            exited = True
            break
        p_minus = region.away_lmo(g, x)
        pair_gap = float(g @ (p_minus - p_plus))
        if pair_gap < -PAIRWISE_GAP_TOL:
            raise RuntimeError(f"pairwise gap {pair_gap} is negative at t={t}")
        if np.array_equal(p_plus, p_minus):
            if pair_gap > PAIRWISE_GAP_TOL:
                raise RuntimeError("identical pairwise vertices with positive gap (oracle inconsistency)")
            trace.append(t, h, fw_gap, 0.0, "pairwise")
            exited = True
            break

        direction = p_plus - p_minus
        if isinstance(rule, OpenLoop):
            gamma = pow2_round_down(rule.eta(t))
        else:
            shrinking = direction < 0.0
            cap = float(x[shrinking].min())
            A = getattr(objective, "A", None)
            Ad = direction if A is None else A @ direction
            denom = float(Ad @ Ad)
            raw = -float(g @ direction) / denom if denom > 0.0 else cap
            gamma = min(cap, max(0.0, raw))
        trace.append(t, h, fw_gap, gamma, "pairwise")
        x = x + gamma * direction
        if check_invariants:
            _check_state(region, x, t)
        t += 1

    if exited:
        trace.metadata["early_exit_t"] = int(trace.t[-1])
        trace.pad_to(iters)
    else:
        g = objective.gradient(x)
        p = region.lmo(g)
        trace.append(iters, objective.primal_gap(x), float(g @ (x - p)), 0.0, "pairwise")
    trace.metadata["x_final"] = x
    return trace

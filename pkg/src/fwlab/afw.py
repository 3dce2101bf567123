"""Away-step Frank-Wolfe over polytopes.

Two step regimes share one loop: exact line search / short step (classic
variant), and the scheduled regime where the step is min(eta_k, eta_max)
with k a progress counter that only advances on steps achieving the
scheduled decrease. Away steps that empty an atom's weight are drop steps;
drop steps failing the progress test are the only non-progress steps.
"""

from __future__ import annotations

import numpy as np

from .core import (
    EARLY_EXIT_REL_TOL,
    LineSearch,
    OpenLoop,
    RunTrace,
    ShortStep,
    StepRule,
    as_point,
    rule_label,
)

WEIGHT_DROP_TOL = 1e-12


class ActiveSet:
    """Vertices with positive weight representing the iterate as a convex combination."""

    def __init__(self, vertex: np.ndarray):
        v = as_point(vertex)
        self._atoms = v.reshape(1, -1).copy()
        self._weights = np.ones(1)
        self._count = 1
        self._index: dict[bytes, int] = {v.tobytes(): 0}

    # -- views ------------------------------------------------------------

    @property
    def size(self) -> int:
        return self._count

    @property
    def atoms(self) -> np.ndarray:
        return self._atoms[: self._count]

    @property
    def weights(self) -> np.ndarray:
        return self._weights[: self._count]

    def reconstruct(self) -> np.ndarray:
        return self.weights @ self.atoms

    def argmax_inner(self, g: np.ndarray) -> int:
        """Row index of the atom maximizing <g, atom> (first max on ties)."""
        return int(np.argmax(self.atoms @ g))

    # -- updates ------------------------------------------------------------

    def _ensure_capacity(self):
        if self._count == self._atoms.shape[0]:
            self._atoms = np.vstack([self._atoms, np.zeros_like(self._atoms)])
            self._weights = np.concatenate([self._weights, np.zeros(self._weights.shape[0])])

    def _remove(self, idx: int):
        last = self._count - 1
        del self._index[self._atoms[idx].tobytes()]
        if idx != last:
            self._atoms[idx] = self._atoms[last]
            self._weights[idx] = self._weights[last]
            self._index[self._atoms[idx].tobytes()] = idx
        self._count = last

    def fw_update(self, p: np.ndarray, gamma: float):
        """Shift weight gamma onto vertex p; gamma = 1 resets the set to {p}."""
        if gamma >= 1.0:
            self._atoms[0] = p
            self._weights[0] = 1.0
            self._count = 1
            self._index = {p.tobytes(): 0}
            return
        self._weights[: self._count] *= 1.0 - gamma
        key = p.tobytes()
        at = self._index.get(key)
        if at is None:
            self._ensure_capacity()
            at = self._count
            self._atoms[at] = p
            self._weights[at] = gamma
            self._index[key] = at
            self._count += 1
        else:
            self._weights[at] += gamma

    def away_update(self, idx: int, gamma: float, drop: bool):
        """Move weight gamma away from the atom at idx, removing it on a drop."""
        self._weights[: self._count] *= 1.0 + gamma
        if drop:
            self._remove(idx)
            return
        self._weights[idx] -= gamma
        if self._weights[idx] <= WEIGHT_DROP_TOL:
            self._remove(idx)

    def check_invariants(self, x: np.ndarray, t: int):
        w = self.weights
        if np.any(w < 0.0):
            raise RuntimeError(f"negative active-set weight at t={t}")
        if abs(float(w.sum()) - 1.0) > 1e-10:
            raise RuntimeError(f"active-set weights sum to {w.sum()} at t={t}")
        if float(np.max(np.abs(self.reconstruct() - x))) > 1e-9:
            raise RuntimeError(f"active-set reconstruction drifted from the iterate at t={t}")


def afw_run(objective, region, rule: StepRule, x0, iters: int, *,
            metadata: dict | None = None, check_invariants: bool = True) -> RunTrace:
    """Run away-step Frank-Wolfe from the vertex x0.

    Parameters
    ----------
    objective, region : oracles
        The region needs lmo/contains; away candidates are maximized over
        the maintained active set.
    rule : StepRule
        OpenLoop(ell) selects the scheduled regime with the progress
        counter; LineSearch/ShortStep select the classic variant.
    x0 : array
        A vertex of the region.
    iters : int
        Iteration budget (trace holds iters + 1 records; early exit pads).

    The trace gains an ``active_set_size`` column, and step kinds are
    fw / away / drop / non_progress (drop = away step that removes its
    atom; non_progress = drop failing the scheduled-progress test).
    """
    if iters < 1:
        raise ValueError("iteration budget must be >= 1")
    x = as_point(x0, region.dimension)
    if not region.contains(x, 1e-10):
        raise ValueError("x0 is infeasible")
    if hasattr(region, "is_vertex") and not region.is_vertex(x):
        raise ValueError("x0 must be a vertex of the region")

    scheduled = isinstance(rule, OpenLoop)
    if not scheduled and not isinstance(rule, (LineSearch, ShortStep)):
        raise ValueError("away-step runs support open-loop, line-search, or short-step rules")

    meta = {
        "algo": "afw",
        "rule": rule_label(rule),
        "region_id": getattr(region, "id_string", lambda: repr(region))(),
        "objective_id": getattr(objective, "id_string", lambda: repr(objective))(),
        "iters": int(iters),
    }
    if metadata:
        meta.update(metadata)
    trace = RunTrace(meta)

    active = ActiveSet(x)
    L = objective.smoothness_L
    delta = region.diameter
    Ld2 = L * delta * delta
    ell = 0
    exited = False

    for t in range(iters):
        g = objective.gradient(x)
        f = objective.value(x)
        if not np.isfinite(f):
            raise RuntimeError(f"objective value is not finite at iteration {t}")
        h = objective.primal_gap(x)
        p_fw = region.lmo(g)
        fw_gap = float(g @ (x - p_fw))
        if fw_gap <= EARLY_EXIT_REL_TOL * (1.0 + abs(f)):
            trace.append(t, h, fw_gap, 0.0, "fw", active_set_size=active.size, ell=ell)
            exited = True
            break

        idx_a = active.argmax_inner(g)
        p_away = active.atoms[idx_a].copy()
        lam_a = float(active.weights[idx_a])
        away_gap = float(g @ (x - p_away))

        take_fw = -fw_gap <= away_gap  # <grad, p_fw - x> <= <grad, x - p_away>
        if take_fw:
            d = p_fw - x
            eta_max = 1.0
        else:
            if lam_a >= 1.0 - 1e-14:
                raise RuntimeError("away step chosen from a singleton active set")
            d = x - p_away
            eta_max = lam_a / (1.0 - lam_a)

        if scheduled:
            eta_sched = rule.eta(ell)
            gamma = min(eta_sched, eta_max)
        else:
            eta_sched = None
            gamma = _segment_minimizer(objective, rule, x, d, g, eta_max)

        drop = (not take_fw) and gamma >= eta_max
        if scheduled:
            a = float(g @ (p_away - p_fw))
            progress = (eta_sched - gamma) * a <= (eta_sched**2 - gamma**2) * Ld2
        else:
            progress = True
        if not progress and not drop:
            raise RuntimeError("non-progress step that is not a drop step")

        if take_fw:
            kind = "fw"
        elif not progress:
            kind = "non_progress"
        elif drop:
            kind = "drop"
        else:
            kind = "away"
        trace.append(t, h, fw_gap, gamma, kind, active_set_size=active.size, ell=ell)
        if scheduled and progress:
            ell += 1

        x = x + gamma * d
        if take_fw:
            active.fw_update(p_fw, gamma)
        else:
            active.away_update(idx_a, gamma, drop)
        if check_invariants:
            active.check_invariants(x, t)
            if not region.contains(x, 1e-8):
                raise RuntimeError(f"iterate left the region at iteration {t}")

    if exited:
        trace.metadata["early_exit_t"] = int(trace.t[-1])
        trace.pad_to(iters)
    else:
        g = objective.gradient(x)
        p_fw = region.lmo(g)
        trace.append(iters, objective.primal_gap(x), float(g @ (x - p_fw)), 0.0, "fw",
                     active_set_size=active.size, ell=ell)
    trace.metadata["x_final"] = x
    trace.metadata["active_set_final"] = active
    return trace


def _segment_minimizer(objective, rule, x, d, g, eta_max: float) -> float:
    """Minimizer of f(x + gamma d) over [0, eta_max] for the classic variant."""
    slope = float(g @ d)
    if isinstance(rule, ShortStep):
        denom = objective.smoothness_L * float(d @ d)
        gamma = -slope / denom if denom > 0.0 else 0.0
    else:
        A = getattr(objective, "A", None)
        Ad = d if A is None else A @ d
        denom = float(Ad @ Ad)
        if denom <= 0.0:
            return eta_max if slope < 0.0 else 0.0
        gamma = -slope / denom
    return min(eta_max, max(0.0, gamma))

"""Shared numeric types, step-size rules, and run tracing.

Everything the solvers have in common lives here: the step-size policy
objects (open loop, line search, short step, constant), the per-run trace
with its CSV serialization, and the scalar recurrence simulator used to
sanity-check accelerated-rate arguments numerically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence, Union

import numpy as np

# Early exit once the duality gap is numerically zero relative to f.
EARLY_EXIT_REL_TOL = 1e-14
# Primal gaps may dip below zero by floating-point noise; anything worse
# than this is a bug, anything above it is clamped to zero.
GAP_CLAMP_TOL = 1e-9

TRACE_COLUMNS = ("t", "h", "h_min_prefix", "fw_gap", "eta", "step_kind")
# Extra per-solver columns that are serialized when present.
SERIALIZED_EXTRAS = ("active_set_size", "atom")

STEP_KINDS = ("fw", "away", "drop", "non_progress", "pairwise")


class DegenerateDirectionError(RuntimeError):
    """Short step requested with x == p; the caller should treat the run as converged."""


def as_point(x, dimension: int | None = None) -> np.ndarray:
    """Validate and return a dense float64 vector with finite entries."""
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d point, got shape {v.shape}")
    if dimension is not None and v.shape[0] != dimension:
        raise ValueError(f"expected dimension {dimension}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("point has non-finite entries")
    return v


# ---------------------------------------------------------------------------
# Step-size rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OpenLoop:
    """Predetermined schedule eta_t = ell / (t + ell)."""

    ell: int

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("open loop parameter ell must be a positive integer")

    def eta(self, t: int) -> float:
        return self.ell / (t + self.ell)


@dataclass(frozen=True)
class LineSearch:
    """Exact minimization of f along the segment (closed form for quadratics)."""

    tol: float = 1e-12


@dataclass(frozen=True)
class ShortStep:
    """Minimizer of the smoothness quadratic upper bound, clipped to [0, 1]."""


@dataclass(frozen=True)
class ConstantStep:
    """Fixed step length eta in (0, 1]."""

    eta: float

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"constant step must lie in (0, 1], got {self.eta}")


StepRule = Union[OpenLoop, LineSearch, ShortStep, ConstantStep]


def constant_rate_step(alpha: float, lam: float, L: float) -> float:
    """Constant step alpha*lambda/(2L) that yields a linear rate on strongly convex regions."""
    if alpha <= 0 or lam <= 0 or L <= 0:
        raise ValueError("alpha, lambda and L must be positive")
    return alpha * lam / (2.0 * L)


def rule_label(rule: StepRule) -> str:
    if isinstance(rule, OpenLoop):
        return f"openloop:{rule.ell}"
    if isinstance(rule, LineSearch):
        return "linesearch"
    if isinstance(rule, ShortStep):
        return "shortstep"
    if isinstance(rule, ConstantStep):
        return f"constant:{rule.eta!r}"
    raise TypeError(f"unknown step rule {rule!r}")


def parse_rule(label: str) -> StepRule:
    """Parse a rule label such as ``openloop:4`` or ``constant:0.25``."""
    name, _, arg = label.partition(":")
    name = name.strip().lower()
    if name == "openloop":
        return OpenLoop(int(arg))
    if name == "linesearch":
        return LineSearch()
    if name == "shortstep":
        return ShortStep()
    if name == "constant":
        if not arg:
            raise ValueError("constant rule needs an explicit step, e.g. constant:0.25")
        return ConstantStep(float(arg))
    raise ValueError(f"unknown step rule {label!r}")


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Golden-section search for a minimizer of a unimodal f on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def step_length(
    rule: StepRule,
    t: int,
    *,
    x: np.ndarray | None = None,
    p: np.ndarray | None = None,
    gradient: np.ndarray | None = None,
    L: float | None = None,
    objective=None,
) -> float:
    """Step length in [0, 1] for the step from x_t toward the oracle vertex p.

    Parameters
    ----------
    rule : StepRule
        The step-size policy.
    t : int
        Iteration index (used only by open-loop schedules).
    x, p, gradient : arrays, optional
        Current iterate, target vertex, gradient at x. Required for the
        short-step and line-search rules.
    L : float, optional
        Smoothness constant; required by the short-step rule.
    objective : optional
        Objective oracle; line search uses its closed form when it exposes
        ``exact_line_step`` and falls back to golden-section search on
        ``value`` otherwise.
    """
    if isinstance(rule, OpenLoop):
        return rule.eta(t)
    if isinstance(rule, ConstantStep):
        return rule.eta
    if isinstance(rule, ShortStep):
        if gradient is None or x is None or p is None or L is None:
            raise ValueError("short step needs x, p, gradient and L")
        d = x - p
        denom = L * float(d @ d)
        if denom <= 0.0:
            raise DegenerateDirectionError("short step with x == p")
        return min(1.0, max(0.0, float(gradient @ d) / denom))
    if isinstance(rule, LineSearch):
        if x is None or p is None:
            raise ValueError("line search needs x and p")
        if objective is not None and hasattr(objective, "exact_line_step"):
            g = gradient if gradient is not None else objective.gradient(x)
            return objective.exact_line_step(x, p, g)
        if objective is None:
            raise ValueError("line search needs an objective oracle")
        return golden_section(lambda e: objective.value((1.0 - e) * x + e * p), 0.0, 1.0, rule.tol)
    raise TypeError(f"unknown step rule {rule!r}")


# ---------------------------------------------------------------------------
# Scalar recurrence simulator
# ---------------------------------------------------------------------------


def _eta4(t: int) -> float:
    # eta_t = 4/(t+4); also evaluated at small negative indices by the bound.
    return 4.0 / (t + 4.0)


def simulate_recurrence(
    A: float,
    B: float,
    C: float,
    Ct: Sequence[float],
    psi: float,
    S: int,
    hS: float,
    T: int,
) -> np.ndarray:
    """Iterate h_{t+1} = (1 - eta_t/2) h_t - eta_t*A*C_t*h_t^{1-psi} + eta_t^2*B*C_t.

    The schedule is eta_t = 4/(t+4) and the sequence is floored at 0.
    Returns the values h_S, ..., h_T.
    """
    if not (0 <= S <= T):
        raise ValueError("need 0 <= S <= T")
    if hS < 0:
        raise ValueError("hS must be nonnegative")
    if not (0.0 <= psi <= 0.5):
        raise ValueError("psi must lie in [0, 1/2]")
    if min(A, B, C) < 0:
        raise ValueError("A, B, C must be nonnegative")
    Ct = np.asarray(Ct, dtype=np.float64)
    if Ct.shape[0] < T - S:
        raise ValueError(f"need at least {T - S} values of C_t")
    if np.any(Ct < -1e-15) or np.any(Ct > C + 1e-12):
        raise ValueError("C_t values must lie in [0, C]")
    out = np.empty(T - S + 1)
    h = float(hS)
    out[0] = h
    expo = 1.0 - psi
    for i, t in enumerate(range(S, T)):
        eta = _eta4(t)
        h = (1.0 - 0.5 * eta) * h - eta * A * Ct[i] * h**expo + eta * eta * B * Ct[i]
        h = max(h, 0.0)
        out[i + 1] = h
    return out


def recurrence_bound(A: float, B: float, C: float, psi: float, S: int, hS: float, t: int) -> float:
    """Closed-form envelope max{(eta_{t-2}/eta_{S-1})^{1/(1-psi)} h_S, (eta_{t-2} B/A)^{1/(1-psi)} + eta_{t-2}^2 B C}."""
    if A <= 0:
        raise ValueError("the envelope needs A > 0")
    expo = 1.0 / (1.0 - psi)
    e_t2 = _eta4(t - 2)
    first = (e_t2 / _eta4(S - 1)) ** expo * hS
    second = (e_t2 * B / A) ** expo + e_t2 * e_t2 * B * C
    return max(first, second)


# ---------------------------------------------------------------------------
# Oracle protocols (implemented in objectives.py / regions.py)
# ---------------------------------------------------------------------------


class ObjectiveOracle(Protocol):
    smoothness_L: float
    fstar: float | None

    def value(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...


class FeasibleRegion(Protocol):
    dimension: int
    diameter: float

    def lmo(self, c: np.ndarray) -> np.ndarray: ...

    def contains(self, x: np.ndarray, tol: float = 1e-10) -> bool: ...


# ---------------------------------------------------------------------------
# Run traces
# ---------------------------------------------------------------------------


class RunTrace:
    """Per-iteration record of primal gap, FW gap, step length and step kind.

    A run with iteration budget T appends exactly T + 1 records (t = 0..T);
    early exits pad the tail by replicating the final record with eta = 0.
    """

    def __init__(self, metadata: dict | None = None):
        self.metadata: dict = dict(metadata or {})
        self._t: list[int] = []
        self._h: list[float] = []
        self._gap: list[float] = []
        self._eta: list[float] = []
        self._kind: list[str] = []
        self._extras: dict[str, list] = {}

    # -- building -----------------------------------------------------------

    def append(self, t: int, h: float, fw_gap: float, eta: float, step_kind: str, **extras):
        if step_kind not in STEP_KINDS:
            raise ValueError(f"unknown step kind {step_kind!r}")
        if h < -GAP_CLAMP_TOL:
            raise RuntimeError(f"primal gap {h} below -{GAP_CLAMP_TOL} at t={t}")
        self._t.append(int(t))
        self._h.append(max(h, 0.0))
        self._gap.append(float(fw_gap))
        self._eta.append(float(eta))
        self._kind.append(step_kind)
        for key, val in extras.items():
            self._extras.setdefault(key, []).append(val)

    def pad_to(self, budget: int):
        """Replicate the final record until the trace holds budget + 1 records."""
        if not self._t:
            raise RuntimeError("cannot pad an empty trace")
        while len(self._t) < budget + 1:
            extras = {k: v[-1] for k, v in self._extras.items()}
            self.append(self._t[-1] + 1, self._h[-1], self._gap[-1], 0.0, self._kind[-1], **extras)

    # -- access --------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._t)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self._t, dtype=np.int64)

    @property
    def h(self) -> np.ndarray:
        return np.asarray(self._h)

    @property
    def fw_gap(self) -> np.ndarray:
        return np.asarray(self._gap)

    @property
    def eta(self) -> np.ndarray:
        return np.asarray(self._eta)

    @property
    def step_kinds(self) -> list[str]:
        return list(self._kind)

    def extra(self, key: str) -> np.ndarray:
        return np.asarray(self._extras[key])

    @property
    def extras(self) -> dict:
        return {k: np.asarray(v) for k, v in self._extras.items()}

    def min_prefix(self) -> np.ndarray:
        return np.minimum.accumulate(self.h)

    # -- serialization -------------------------------------------------------

    def to_csv(self, path):
        """Write the trace table; floats use scientific notation with 17 significant digits."""
        extra_cols = [k for k in SERIALIZED_EXTRAS if k in self._extras]
        mp = self.min_prefix()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(list(TRACE_COLUMNS) + extra_cols)
            for i in range(len(self._t)):
                row = [
                    str(self._t[i]),
                    f"{self._h[i]:.16e}",
                    f"{mp[i]:.16e}",
                    f"{self._gap[i]:.16e}",
                    f"{self._eta[i]:.16e}",
                    self._kind[i],
                ]
                for k in extra_cols:
                    v = self._extras[k][i]
                    row.append(str(v) if isinstance(v, (int, np.integer)) else f"{v:.16e}")
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "RunTrace":
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            extra_cols = header[len(TRACE_COLUMNS):]
            for row in reader:
                extras = {}
                for j, k in enumerate(extra_cols):
                    raw = row[len(TRACE_COLUMNS) + j]
                    extras[k] = int(raw) if k == "active_set_size" else float(raw)
                trace.append(int(row[0]), float(row[1]), float(row[3]), float(row[4]), row[5], **extras)
        return trace

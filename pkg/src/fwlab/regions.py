"""Linear minimization oracles and geometry metadata for the feasible regions.

Two region families ship: lp-balls (closed-form LMO, uniform-convexity
metadata) and the probability simplex, which doubles as the one shipped
instance of the simplex-like-polytope interface (nonnegative orthant
intersected with linear equalities, 0/1 vertices) that the pairwise solver
consumes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .core import as_point

SUPPORT_TOL = 1e-12


# ---------------------------------------------------------------------------
# Closed-form oracles
# ---------------------------------------------------------------------------


def lp_ball_lmo(c: np.ndarray, p: float, radius: float, center: np.ndarray | None = None) -> np.ndarray:
    """Minimizer of <c, x> over the lp-ball of the given radius.

    For p > 1 the optimum is -radius * sign(c) |c|^(1/(p-1)) / ||c||_q^(q/p)
    with 1/p + 1/q = 1; for p = 1 it is a signed scaled unit vector at the
    max-magnitude coordinate (smallest index on ties). A zero cost vector
    returns the center.
    """
    c = np.asarray(c, dtype=np.float64)
    out = np.zeros_like(c)
    absc = np.abs(c)
    if not absc.any():
        return out if center is None else center.copy()
    if p == 1.0:
        i = int(np.argmax(absc))
        out[i] = -radius * np.sign(c[i])
    else:
        q = p / (p - 1.0)
        # scale first for overflow safety with large exponents
        scaled = absc / absc.max()
        mag = scaled ** (1.0 / (p - 1.0))
        norm_q = float(np.sum(scaled**q)) ** (1.0 / q)
        out = -radius * np.sign(c) * mag / norm_q ** (q / p)
    if center is not None:
        out += center
    return out


def simplex_lmo(c: np.ndarray) -> np.ndarray:
    """Vertex e_i of the probability simplex minimizing <c, x>, smallest index on ties."""
    c = np.asarray(c, dtype=np.float64)
    out = np.zeros_like(c)
    out[int(np.argmin(c))] = 1.0
    return out


def simplex_away_lmo(gradient: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Support-restricted away vertex: e_i maximizing gradient_i over {i : x_i > tol}."""
    gradient = np.asarray(gradient, dtype=np.float64)
    mask = np.asarray(x) > SUPPORT_TOL
    if not mask.any():
        raise RuntimeError("away oracle called with empty support (infeasible iterate)")
    masked = np.where(mask, gradient, -np.inf)
    out = np.zeros_like(gradient)
    out[int(np.argmax(masked))] = 1.0
    return out


# ---------------------------------------------------------------------------
# Region classes
# ---------------------------------------------------------------------------


class LpBall:
    """lp-ball feasible region with closed-form LMO.

    Parameters
    ----------
    dimension : int
    p : float
        p = 1 or p > 1.
    radius : float
    center : array, optional
        Defaults to the origin.
    """

    kind = "lp_ball"

    def __init__(self, dimension: int, p: float, radius: float = 1.0, center=None):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        if not (p == 1.0 or p > 1.0):
            raise ValueError("p must equal 1 or exceed 1")
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.dimension = int(dimension)
        self.p = float(p)
        self.radius = float(radius)
        self.center = None if center is None else as_point(center, dimension)

    @property
    def diameter(self) -> float:
        # Euclidean diameter; for p > 2 the corners are sqrt-factor farther
        # in l2 than the axis points.
        d, p, r = self.dimension, self.p, self.radius
        return 2.0 * r * d ** max(0.0, 0.5 - 1.0 / p)

    @property
    def uniform_convexity(self):
        """(alpha, q) metadata, or None for the l1-ball.

        alpha is conservative for p > 2 (validity over tightness); the
        scaling tests and the constant step rule only need a valid constant.
        """
        p, r = self.p, self.radius
        if p <= 1.0:
            return None
        if p <= 2.0:
            return ((p - 1.0) / r, 2.0)
        return (2.0 / (p * 2.0**p * r ** (p - 1.0)), p)

    def lmo(self, c: np.ndarray) -> np.ndarray:
        return lp_ball_lmo(c, self.p, self.radius, self.center)

    def norm(self, x: np.ndarray) -> float:
        z = x if self.center is None else x - self.center
        if self.p == 1.0:
            return float(np.sum(np.abs(z)))
        return float(np.sum(np.abs(z) ** self.p) ** (1.0 / self.p))

    def contains(self, x: np.ndarray, tol: float = 1e-10) -> bool:
        return self.norm(x) <= self.radius + tol * max(1.0, self.radius)

    def boundary_gap(self, x: np.ndarray) -> float:
        """Radius of a Euclidean ball around x guaranteed inside the region."""
        slack = self.radius - self.norm(x)
        if self.p >= 2.0:
            return slack  # ||u||_p <= ||u||_2
        return slack / self.dimension ** (1.0 / self.p - 0.5)

    def id_string(self) -> str:
        p = int(self.p) if float(self.p).is_integer() else self.p
        return f"l{p}ball-d{self.dimension}-r{self.radius:g}"


class SimplexLikePolytope(Protocol):
    """Polytope {x >= 0, Ax = b} whose vertices lie on the Boolean hypercube."""

    dimension: int
    diameter: float
    constraint_A: np.ndarray
    constraint_b: np.ndarray

    def lmo(self, c: np.ndarray) -> np.ndarray: ...

    def away_lmo(self, gradient: np.ndarray, x: np.ndarray) -> np.ndarray: ...

    def contains(self, x: np.ndarray, tol: float = 1e-10) -> bool: ...


class ProbabilitySimplex:
    """Probability simplex; the shipped simplex-like polytope instance."""

    kind = "simplex"

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)
        self.constraint_A = np.ones((1, dimension))
        self.constraint_b = np.ones(1)

    @property
    def diameter(self) -> float:
        return float(np.sqrt(2.0))

    uniform_convexity = None

    def lmo(self, c: np.ndarray) -> np.ndarray:
        return simplex_lmo(c)

    def away_lmo(self, gradient: np.ndarray, x: np.ndarray) -> np.ndarray:
        return simplex_away_lmo(gradient, x)

    def contains(self, x: np.ndarray, tol: float = 1e-10) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= -tol) and abs(float(x.sum()) - 1.0) <= tol)

    def is_vertex(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        x = np.asarray(x)
        i = int(np.argmax(x))
        e = np.zeros_like(x)
        e[i] = 1.0
        return bool(np.max(np.abs(x - e)) <= tol)

    def id_string(self) -> str:
        return f"simplex-d{self.dimension}"


# ---------------------------------------------------------------------------
# Sparse-minimum brute force on the simplex
# ---------------------------------------------------------------------------


def jaggi_lower_bound(d: int, t: int) -> float:
    """Minimum of ||x||_2^2 over the probability simplex restricted to card(x) <= t.

    Brute force over support sets: for each support the restricted problem
    min sum x_i^2 s.t. sum x_i = 1 has the exact stationary solution
    x_i = 1/|S| with value 1/|S|, so the overall minimum is 1/t.
    """
    if not (1 <= t <= d):
        raise ValueError(f"need 1 <= t <= d, got t={t}, d={d}")
    best = np.inf
    for size in range(1, t + 1):
        for support in itertools.combinations(range(d), size):
            value = 1.0 / len(support)
            if value < best:
                best = value
    return best


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionSpec:
    """Region block of the harness config: kind, p, radius, dimension."""

    kind: str
    dimension: int
    p: float | None = None
    radius: float | None = None

    def build(self):
        return region_from_spec(self)


def region_from_spec(spec: RegionSpec):
    kind = spec.kind.lower()
    if kind == "lp_ball":
        if spec.p is None:
            raise ValueError("lp_ball region needs p")
        return LpBall(spec.dimension, spec.p, spec.radius if spec.radius is not None else 1.0)
    if kind in ("simplex", "slp"):
        return ProbabilitySimplex(spec.dimension)
    raise ValueError(f"unknown region kind {spec.kind!r}")

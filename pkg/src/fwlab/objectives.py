"""Quadratic objectives with controlled optimum location and exact metadata.

Instances are quadratics f(x) = 0.5 ||A x - b||^2 whose unconstrained
minimizer is placed at a declared location relative to a feasible region
(interior / boundary / exterior / relative interior of a face), with
smoothness and convexity constants computed to high accuracy and a
certified reference optimum attached for primal-gap traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import LineSearch, as_point
from .regions import LpBall, ProbabilitySimplex, RegionSpec, region_from_spec

EIG_RES_TOL = 1e-9
REFERENCE_MAX_ITERS = 1_000_000
REFERENCE_WIDTH_TOL = 1e-12


# ---------------------------------------------------------------------------
# Eigenvalue extremes by power iteration
# ---------------------------------------------------------------------------


def power_iteration_extremes(M: np.ndarray, seed: int = 0,
                             max_iters: int = 100_000) -> tuple[float, float]:
    """Largest and smallest eigenvalue of a symmetric PSD matrix.

    Plain power iteration for the top eigenvalue, then shifted power
    iteration on lmax*I - M for the bottom one. The loop stops on the
    eigenpair residual; for symmetric matrices the Rayleigh quotient error
    is quadratic in that residual.
    """
    rng = np.random.default_rng(seed + 0xE16)

    def top(mat, scale):
        v = rng.standard_normal(mat.shape[0])
        v /= np.linalg.norm(v)
        rho = 0.0
        for _ in range(max_iters):
            w = mat @ v
            rho = float(v @ w)
            res = float(np.linalg.norm(w - rho * v))
            nw = float(np.linalg.norm(w))
            if nw == 0.0:
                return 0.0
            v = w / nw
            if res <= EIG_RES_TOL * scale:
                break
        return rho

    scale0 = max(float(np.abs(M).sum(axis=1).max()), 1e-30)
    lmax = top(M, scale0)
    shifted = lmax * np.eye(M.shape[0]) - M
    lmin = lmax - top(shifted, max(scale0, lmax))
    return lmax, max(lmin, 0.0)


# ---------------------------------------------------------------------------
# Quadratic objective
# ---------------------------------------------------------------------------


class QuadraticObjective:
    """f(x) = 0.5 ||A x - b||^2 with cached metadata.

    A = None encodes the identity. L and alpha_f are the eigenvalue extremes
    of A^T A (alpha_f = 0 when A is rank deficient); strongly convex
    instances carry the error-bound pair (mu, theta) = (sqrt(2/alpha_f), 1/2).
    """

    def __init__(self, A: np.ndarray | None, b: np.ndarray, *, seed: int | None = None,
                 rank_deficient: bool = False, unconstrained_target: np.ndarray | None = None):
        self.b = as_point(b)
        self.dimension = self.b.shape[0] if A is None else int(A.shape[1])
        if A is None:
            self.A = None
            self.At = None
            self.smoothness_L = 1.0
            self.strong_convexity_alpha_f = 1.0
        else:
            self.A = np.ascontiguousarray(A, dtype=np.float64)
            self.At = np.ascontiguousarray(self.A.T)
            lmax, lmin = power_iteration_extremes(self.At @ self.A, seed=seed or 0)
            self.smoothness_L = lmax
            self.strong_convexity_alpha_f = 0.0 if rank_deficient else lmin
        self.seed = seed
        self.rank_deficient = rank_deficient
        self.unconstrained_target = None if unconstrained_target is None else as_point(unconstrained_target)
        self.fstar: float | None = None
        self.xstar: np.ndarray | None = None
        self.fstar_provenance: str | None = None
        self._rstar: np.ndarray | None = None
        self.gradient_lower_bound_lambda: float | None = None

    # -- oracle ----------------------------------------------------------------

    def residual(self, x: np.ndarray) -> np.ndarray:
        return (x - self.b) if self.A is None else (self.A @ x - self.b)

    def value(self, x: np.ndarray) -> float:
        r = self.residual(x)
        return 0.5 * float(r @ r)

    def value_from_residual(self, r: np.ndarray) -> float:
        return 0.5 * float(r @ r)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.gradient_from_residual(x, self.residual(x))

    def gradient_from_residual(self, x: np.ndarray, r: np.ndarray) -> np.ndarray:
        return r.copy() if self.A is None else self.At @ r

    @property
    def heb(self) -> tuple[float, float] | None:
        a = self.strong_convexity_alpha_f
        if a and a > 0.0:
            return (math.sqrt(2.0 / a), 0.5)
        return None

    def exact_line_step(self, x: np.ndarray, p: np.ndarray, gradient: np.ndarray) -> float:
        """Closed-form minimizer of eta -> f((1-eta) x + eta p) over [0, 1]."""
        d = x - p
        Ad = d if self.A is None else self.A @ d
        denom = float(Ad @ Ad)
        if denom <= 0.0:
            # flat direction: walk to whichever end the slope favors
            return 1.0 if float(gradient @ d) > 0.0 else 0.0
        return min(1.0, max(0.0, float(gradient @ d) / denom))

    # -- reference optimum -------------------------------------------------------

    def set_reference(self, xstar: np.ndarray, fstar: float, provenance: str):
        self.xstar = as_point(xstar, self.dimension)
        self.fstar = float(fstar)
        self.fstar_provenance = provenance
        self._rstar = self.residual(self.xstar)

    def primal_gap(self, x: np.ndarray, r: np.ndarray | None = None) -> float:
        """f(x) - f*, cancellation-free when a reference point is attached.

        With x* attached the gap is 0.5 <A(x - x*), (Ax-b) + (Ax*-b)>, which
        stays accurate near machine zero even when f itself is of order 1e2.
        """
        if self.fstar is None:
            raise RuntimeError("objective has no reference optimum")
        if self.xstar is None:
            if r is None:
                r = self.residual(x)
            return self.value_from_residual(r) - self.fstar
        u = x - self.xstar
        if self.A is None:
            Au = u
        else:
            Au = self.A @ u
        if r is None:
            r = self.residual(x)
        return 0.5 * float(Au @ (r + self._rstar))

    def id_string(self) -> str:
        tag = "id" if self.A is None else f"randA-seed{self.seed}"
        return f"quad-{tag}-d{self.dimension}"


# ---------------------------------------------------------------------------
# Exact simplex projection (sorted-threshold procedure)
# ---------------------------------------------------------------------------


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.shape[0] + 1)
    cond = u - (css - 1.0) / idx > 0
    rho = int(np.nonzero(cond)[0][-1])
    tau = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(v - tau, 0.0)


# ---------------------------------------------------------------------------
# Instance specification and generation
# ---------------------------------------------------------------------------

LOCATIONS = ("interior", "boundary", "exterior", "face")


@dataclass(frozen=True)
class InstanceSpec:
    """Instance block of the harness config; reproducible bit-for-bit given seed."""

    location: str
    region: RegionSpec
    seed: int
    face_rho: float | None = None

    def __post_init__(self):
        if self.location not in LOCATIONS:
            raise ValueError(f"unknown optimum location {self.location!r}")
        if self.location == "face" and self.face_rho is None:
            raise ValueError("face location needs face_rho")

    def with_seed(self, seed: int) -> "InstanceSpec":
        return replace(self, seed=seed)

    def id_string(self) -> str:
        loc = f"face{self.face_rho:g}" if self.location == "face" else self.location
        region = region_from_spec(self.region)
        return f"{region.id_string()}-{loc}-seed{self.seed}"


def half_indicator(d: int) -> np.ndarray:
    """Vector with zeros on the first ceil(d/2) coordinates, ones on the rest."""
    v = np.zeros(d)
    if d // 2:
        v[-(d // 2):] = 1.0
    return v


def _simplex_target(location: str, d: int, rho: float | None) -> np.ndarray:
    bar = half_indicator(d)
    if location == "interior":
        return np.full(d, 1.0 / d)
    if location == "boundary":
        return (2.0 / d) * bar
    if location == "exterior":
        return 2.0 * bar
    return rho * bar


def generate_instance(spec: InstanceSpec) -> tuple[QuadraticObjective, object]:
    """Build (objective, region) with the unconstrained optimum at the declared location.

    Simplex instances use A = I with the classical target points; ball
    instances draw A = I + 0.1 G (G standard normal, seeded) and place the
    target on a random direction normalized in the ball's own norm. The
    merely-convex exterior case zeroes the last ceil(d/2) rows of A, making
    A^T A rank deficient.
    """
    region = region_from_spec(spec.region)
    d = region.dimension

    if isinstance(region, ProbabilitySimplex):
        if spec.location == "face" and spec.face_rho < 2.0 / d:
            raise ValueError("face instances need rho >= 2/d")
        target = _simplex_target(spec.location, d, spec.face_rho)
        obj = QuadraticObjective(None, target, seed=spec.seed, unconstrained_target=target)
    elif isinstance(region, LpBall):
        rng = np.random.default_rng(spec.seed)
        G = rng.standard_normal((d, d))
        u = rng.standard_normal(d)
        scale = {"interior": 0.5, "boundary": 1.0, "exterior": 2.0}.get(spec.location)
        if scale is None:
            raise ValueError("face location requires a simplex region")
        target = (scale * region.radius / region.norm(u)) * u
        A = np.eye(d) + 0.1 * G
        rank_deficient = spec.location == "exterior"
        if rank_deficient:
            A[d // 2:, :] = 0.0  # zero the last ceil(d/2) rows
        obj = QuadraticObjective(A, A @ target, seed=spec.seed,
                                 rank_deficient=rank_deficient, unconstrained_target=target)
    else:
        raise ValueError(f"unsupported region {region!r}")

    verify_location(spec, obj, region)
    reference_optimum(obj, region)
    if spec.location == "exterior" and not (obj.fstar is not None and obj.fstar > 1e-8):
        raise RuntimeError(
            f"exterior instance seed={spec.seed} is not verifiably exterior (f*={obj.fstar})")
    return obj, region


def verify_location(spec: InstanceSpec, obj: QuadraticObjective, region) -> None:
    """Check the construction target actually sits at the declared location."""
    target = obj.unconstrained_target
    if isinstance(region, ProbabilitySimplex):
        if spec.location == "interior" and not (np.all(target > 1e-8) and abs(target.sum() - 1.0) <= 1e-8):
            raise RuntimeError("interior simplex target is not strictly feasible")
        if spec.location == "boundary" and not (region.contains(target, 1e-8) and np.any(target <= 1e-8)):
            raise RuntimeError("boundary simplex target is not on the boundary")
        # face/exterior targets are validated through the reference optimum
        return
    norm = region.norm(target)
    r = region.radius
    if spec.location == "interior" and norm > r - 1e-8 * max(1.0, r):
        raise RuntimeError("interior target too close to the boundary")
    if spec.location == "boundary" and abs(norm - r) > 1e-8 * max(1.0, r):
        raise RuntimeError("boundary target is off the sphere")
    if spec.location == "exterior" and norm < r + 1e-8 * max(1.0, r):
        raise RuntimeError("exterior target is not outside the region")


# ---------------------------------------------------------------------------
# Reference optimum
# ---------------------------------------------------------------------------


def reference_optimum(obj: QuadraticObjective, region) -> tuple[float, np.ndarray]:
    """Attach and return (f*, x*).

    Closed form when the unconstrained optimum is feasible, exact simplex
    projection for identity quadratics over the simplex, and a certified
    line-search reference run otherwise (f* taken as the run's final value
    minus its final duality gap; the sandwich width is checked and failures
    are flagged as uncertified).
    """
    if obj.fstar is not None and obj.xstar is not None:
        return obj.fstar, obj.xstar

    target = obj.unconstrained_target
    if target is None:
        if obj.A is None:
            target = obj.b
        else:
            target = np.linalg.lstsq(obj.A, obj.b, rcond=None)[0]

    if region.contains(target, 1e-10):
        obj.set_reference(target, 0.0, "closed_form")
        return obj.fstar, obj.xstar

    if isinstance(region, ProbabilitySimplex) and obj.A is None:
        d = region.dimension
        bar = half_indicator(d)
        support = bar > 0
        b = obj.b
        if support.any() and np.all(b[~support] == 0.0) and np.ptp(b[support]) == 0.0 \
                and b[support][0] >= 2.0 / d:
            # constant target on the face: optimum is the face barycenter
            xstar = (2.0 / d) * bar
        else:
            xstar = project_to_simplex(b)
        obj.set_reference(xstar, obj.value(xstar), "projection")
        return obj.fstar, obj.xstar

    return _reference_run(obj, region)


def _reference_run(obj: QuadraticObjective, region) -> tuple[float, np.ndarray]:
    """Line-search reference run with a duality-gap certificate."""
    from .afw import afw_run
    from .fw import fw_run

    probe = QuadraticObjective(obj.A, obj.b, seed=obj.seed, rank_deficient=obj.rank_deficient,
                               unconstrained_target=obj.unconstrained_target)
    probe.fstar = 0.0  # gap column then records raw objective values

    if isinstance(region, ProbabilitySimplex):
        x0 = np.zeros(region.dimension)
        x0[0] = 1.0
        run = lambda n: afw_run(probe, region, LineSearch(), x0, n, check_invariants=False)
    else:
        x0 = region.lmo(-np.ones(region.dimension))
        run = lambda n: fw_run(probe, region, LineSearch(), x0, n)

    budget = 4096
    while True:
        trace = run(budget)
        f_last = float(trace.h[-1])
        gap_last = max(float(trace.fw_gap[-1]), 0.0)
        certified = gap_last <= REFERENCE_WIDTH_TOL * (1.0 + abs(f_last))
        if certified or budget >= REFERENCE_MAX_ITERS:
            xstar = trace.metadata["x_final"]
            fstar = f_last - gap_last
            obj.set_reference(xstar, fstar,
                              "reference_certified" if certified else "reference_uncertified")
            return obj.fstar, obj.xstar
        budget *= 8

"""Kernel herding in the periodic Sobolev space on [0, 1].

The reproducing kernel is k(y, z) = B2(y - z - floor(y - z)) / 2 with
B2(u) = u^2 - u + 1/6 the degree-two Bernoulli polynomial. Herding greedily
minimizes f(x) = 0.5 ||x - mu||^2 in that space, where mu is the mean
embedding of a density on [0, 1]; iterates are convex combinations of
feature atoms Phi(y_i), so all arithmetic reduces to kernel sums.

Two engines run the greedy loop:

* an exact engine for the uniform density with the eta_t = 1/(t+1)
  schedule, where weights stay uniform and every atom is a dyadic rational;
  pair sums are evaluated in exactly representable dyadic arithmetic so the
  doubling structure of the atom set is reproduced bit-for-bit;
* a general engine (any rule, any density) with cached inner products and
  a piecewise-quadratic interval solver (uniform density) or a dense grid
  scan plus safeguarded Newton refinement (smooth densities).
"""

from __future__ import annotations

import math

import numpy as np

from .core import (
    EARLY_EXIT_REL_TOL,
    ConstantStep,
    LineSearch,
    OpenLoop,
    RunTrace,
    ShortStep,
    StepRule,
    rule_label,
)

K_DIAG = 1.0 / 12.0  # k(y, y) = B2(0)/2
GRID_NODES = 10_001  # non-uniform LMO grid (1e4 intervals)
NEWTON_STEPS = 30
NEWTON_TOL = 1e-12
TIE_TOL = 1e-13


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------


def kernel_eval(y, z):
    """Evaluate k(y, z) = 0.5 * B2(y - z - floor(y - z)) for y, z in [0, 1].

    Accepts scalars or arrays (broadcast). Out-of-range inputs raise.
    """
    ya = np.asarray(y, dtype=np.float64)
    za = np.asarray(z, dtype=np.float64)
    if np.any(ya < 0.0) or np.any(ya > 1.0) or np.any(za < 0.0) or np.any(za > 1.0):
        raise ValueError("kernel arguments must lie in [0, 1]")
    w = ya - za
    w = w - np.floor(w)
    out = 0.5 * (w * w - w + 1.0 / 6.0)
    return float(out) if np.isscalar(y) and np.isscalar(z) else out


# ---------------------------------------------------------------------------
# Densities and mean embeddings
# ---------------------------------------------------------------------------


class FourierDensity:
    """Density p(y) = 1 + sum_j (A_j cos(2 pi j y) + B_j sin(2 pi j y)).

    The constant coefficient is pinned to 1 (normalization); nonnegativity
    is checked on a dense grid at construction. Densities built through
    ``from_square_coefficients`` are nonnegative by construction.
    """

    def __init__(self, cos_coeffs=(), sin_coeffs=(), check: bool = True):
        self.cos_coeffs = np.asarray(cos_coeffs, dtype=np.float64)
        self.sin_coeffs = np.asarray(sin_coeffs, dtype=np.float64)
        if self.cos_coeffs.shape != self.sin_coeffs.shape:
            raise ValueError("cosine and sine coefficient arrays must have equal length")
        self._j = np.arange(1, self.cos_coeffs.shape[0] + 1, dtype=np.float64)
        if check and self.degree and float(np.min(self.pdf(np.linspace(0.0, 1.0, 10_001)))) < -1e-10:
            raise ValueError("density is negative beyond tolerance")

    @classmethod
    def uniform(cls) -> "FourierDensity":
        return cls()

    @classmethod
    def from_square_coefficients(cls, a, b) -> "FourierDensity":
        """Density proportional to (sum_i a_i cos(2 pi i y) + b_i sin(2 pi i y))^2."""
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape or a.ndim != 1 or not a.size:
            raise ValueError("need matching nonempty coefficient arrays")
        n = a.shape[0]
        spec = np.zeros(2 * n + 1, dtype=np.complex128)  # exponents -n..n
        spec[n + 1:] = (a - 1j * b) / 2.0
        spec[:n] = np.conj(spec[n + 1:])[::-1]
        full = np.convolve(spec, spec)  # exponents -2n..2n
        mass = full[2 * n].real
        if mass <= 0.0:
            raise ValueError("zero trigonometric polynomial")
        full = full / mass
        cos_c = 2.0 * full[2 * n + 1:].real
        sin_c = -2.0 * full[2 * n + 1:].imag
        return cls(cos_c, sin_c, check=False)

    @classmethod
    def random(cls, n: int, seed: int) -> "FourierDensity":
        rng = np.random.default_rng(seed)
        return cls.from_square_coefficients(rng.standard_normal(n), rng.standard_normal(n))

    @property
    def degree(self) -> int:
        return int(self.cos_coeffs.shape[0])

    @property
    def is_uniform(self) -> bool:
        return self.degree == 0

    def pdf(self, y):
        y = np.asarray(y, dtype=np.float64)
        if not self.degree:
            return np.ones_like(y)
        ang = 2.0 * np.pi * np.multiply.outer(y, self._j)
        return 1.0 + np.cos(ang) @ self.cos_coeffs + np.sin(ang) @ self.sin_coeffs

    def mu(self, z):
        """Mean embedding mu(z) = integral of k(z, y) p(y) dy."""
        z = np.asarray(z, dtype=np.float64)
        if not self.degree:
            return np.zeros_like(z)
        ang = 2.0 * np.pi * np.multiply.outer(z, self._j)
        w = 1.0 / (2.0 * np.pi * self._j) ** 2
        return np.cos(ang) @ (self.cos_coeffs * w) + np.sin(ang) @ (self.sin_coeffs * w)

    def mu_prime(self, z):
        z = np.asarray(z, dtype=np.float64)
        if not self.degree:
            return np.zeros_like(z)
        ang = 2.0 * np.pi * np.multiply.outer(z, self._j)
        w = 1.0 / (2.0 * np.pi * self._j)
        return -np.sin(ang) @ (self.cos_coeffs * w) + np.cos(ang) @ (self.sin_coeffs * w)

    @property
    def mu_norm_sq(self) -> float:
        if not self.degree:
            return 0.0
        w = (self.cos_coeffs**2 + self.sin_coeffs**2) / (2.0 * (2.0 * np.pi * self._j) ** 2)
        return float(np.sum(w))

    def id_string(self) -> str:
        return "uniform" if self.is_uniform else f"fourier-deg{self.degree}"


def mean_embedding(density: FourierDensity):
    """Return (mu as a callable, <mu, mu>)."""
    return density.mu, density.mu_norm_sq


# ---------------------------------------------------------------------------
# Herding state (general engine)
# ---------------------------------------------------------------------------


class HerdingState:
    """Atoms y_i with convex weights v_i and cached inner products.

    Caches <x, x> and <x, mu>, so objective values and line-search steps are
    O(1) given the kernel column evaluated by the LMO.
    """

    def __init__(self, density: FourierDensity):
        self.density = density
        self.ys = np.empty(0)
        self.ws = np.empty(0)
        self.sxx = 0.0
        self.sxmu = 0.0

    @property
    def size(self) -> int:
        return int(self.ys.shape[0])

    def objective(self) -> float:
        return 0.5 * (self.sxx - 2.0 * self.sxmu + self.density.mu_norm_sq)

    def kernel_column(self, y: float) -> float:
        """<x, Phi(y)> = sum_i v_i k(y_i, y)."""
        if not self.size:
            return 0.0
        return float(self.ws @ kernel_eval(self.ys, y))

    def add_atom(self, y: float, eta: float, k_col: float | None = None):
        """x <- (1 - eta) x + eta Phi(y); k_col is <x, Phi(y)> before the update."""
        if k_col is None:
            k_col = self.kernel_column(y)
        mu_y = float(self.density.mu(y))
        self.sxx = (1.0 - eta) ** 2 * self.sxx + 2.0 * eta * (1.0 - eta) * k_col + eta * eta * K_DIAG
        self.sxmu = (1.0 - eta) * self.sxmu + eta * mu_y
        self.ws = self.ws * (1.0 - eta)
        hit = np.nonzero(self.ys == y)[0]
        if hit.size:
            self.ws[hit[0]] += eta
        else:
            self.ys = np.append(self.ys, y)
            self.ws = np.append(self.ws, eta)

    def recompute_objective(self) -> float:
        """From-scratch objective; the cached value must match within 1e-10."""
        if not self.size:
            return 0.5 * self.density.mu_norm_sq
        gram = kernel_eval(self.ys[:, None], self.ys[None, :])
        sxx = float(self.ws @ gram @ self.ws)
        sxmu = float(self.ws @ self.density.mu(self.ys))
        return 0.5 * (sxx - 2.0 * sxmu + self.density.mu_norm_sq)


# ---------------------------------------------------------------------------
# LMO: minimize g(y) = sum_i v_i k(y_i, y) - mu(y) over [0, 1]
# ---------------------------------------------------------------------------


def _sorted_unique(ys: np.ndarray, ws: np.ndarray):
    uniq, inv = np.unique(ys, return_inverse=True)
    agg = np.zeros_like(uniq)
    np.add.at(agg, inv, ws)
    return uniq, agg


def _kernel_part(yq, atoms, cum_w, cum_wy, ybar, sq_sum):
    """sum_i v_i k(y_i, y) at query points, via prefix sums over sorted atoms."""
    idx = np.searchsorted(atoms, yq, side="right")
    F = cum_w[idx]
    G = cum_wy[idx]
    sq = yq * yq - 2.0 * yq * ybar + sq_sum
    ab = 2.0 * yq * F - 2.0 * G + ybar - yq
    return 0.5 * (sq - ab + 1.0 / 6.0)


def herding_lmo(state: HerdingState, density: FourierDensity | None = None) -> float:
    """Smallest global minimizer of g(y) = <x, Phi(y)> - mu(y) over [0, 1]."""
    density = density if density is not None else state.density
    y, _ = _lmo_with_value(state.ys, state.ws, density)
    return y


def _lmo_with_value(ys: np.ndarray, ws: np.ndarray, density: FourierDensity):
    if ys.shape[0] == 0:
        if density.is_uniform:
            return 0.0, 0.0  # -mu is identically zero; smallest minimizer
        return _minimize_neg_mu(density)
    if density.is_uniform:
        return _lmo_piecewise(ys, ws)
    return _lmo_grid_newton(ys, ws, density)


def _lmo_piecewise(ys: np.ndarray, ws: np.ndarray):
    """Per-interval quadratic minimization for the uniform density."""
    atoms, agg = _sorted_unique(ys, ws)
    cum_w = np.concatenate([[0.0], np.cumsum(agg)])
    cum_wy = np.concatenate([[0.0], np.cumsum(agg * atoms)])
    ybar = float(cum_wy[-1])
    sq_sum = float(np.sum(agg * atoms * atoms))

    lefts = np.concatenate([[0.0], atoms])
    rights = np.concatenate([atoms, [1.0]])
    # vertex of the quadratic piece on interval j: ybar + W_below - 0.5
    verts = ybar + cum_w - 0.5
    cands = np.clip(verts, lefts, rights)
    cands = np.concatenate([cands, [0.0, 1.0]])
    vals = _kernel_part(cands, atoms, cum_w, cum_wy, ybar, sq_sum)
    gmin = float(vals.min())
    y = float(cands[vals <= gmin + TIE_TOL].min())
    gy = float(_kernel_part(np.asarray([y]), atoms, cum_w, cum_wy, ybar, sq_sum)[0])
    return y, gy


def _minimize_neg_mu(density: FourierDensity):
    grid = np.linspace(0.0, 1.0, GRID_NODES)
    vals = -density.mu(grid)
    i0 = int(np.argmin(vals))
    lo = grid[max(i0 - 1, 0)]
    hi = grid[min(i0 + 1, GRID_NODES - 1)]
    # golden-section polish; -mu is smooth but not convex
    from .core import golden_section

    y = golden_section(lambda z: -float(density.mu(z)), lo, hi, NEWTON_TOL)
    cands = np.sort(np.asarray([y, float(grid[i0]), 0.0]))
    cvals = -density.mu(cands)
    gmin = float(cvals.min())
    best = int(np.nonzero(cvals <= gmin + TIE_TOL)[0][0])  # smallest location on ties
    return float(cands[best]), float(cvals[best])


def _lmo_grid_newton(ys: np.ndarray, ws: np.ndarray, density: FourierDensity):
    """Dense grid scan plus safeguarded Newton polish inside the bracketing cell."""
    atoms, agg = _sorted_unique(ys, ws)
    cum_w = np.concatenate([[0.0], np.cumsum(agg)])
    cum_wy = np.concatenate([[0.0], np.cumsum(agg * atoms)])
    ybar = float(cum_wy[-1])
    sq_sum = float(np.sum(agg * atoms * atoms))

    def g(yq):
        yq = np.atleast_1d(np.asarray(yq, dtype=np.float64))
        return _kernel_part(yq, atoms, cum_w, cum_wy, ybar, sq_sum) - density.mu(yq)

    def g_prime(y, side="right"):
        # side picks the one-sided limit when y coincides with an atom
        idx = int(np.searchsorted(atoms, y, side=side))
        return (y - ybar) - cum_w[idx] + 0.5 - float(density.mu_prime(y))

    grid = np.linspace(0.0, 1.0, GRID_NODES)
    gvals = g(grid)
    i0 = int(np.argmin(gvals))
    y0 = float(grid[i0])
    lo = float(grid[max(i0 - 1, 0)])
    hi = float(grid[min(i0 + 1, GRID_NODES - 1)])
    # restrict to the atom-free cell around y0 (kinks at atoms are local maxima)
    j = int(np.searchsorted(atoms, y0, side="left"))
    cell_lo = atoms[j - 1] if j > 0 else 0.0
    jr = int(np.searchsorted(atoms, y0, side="right"))
    cell_hi = atoms[jr] if jr < atoms.shape[0] else 1.0
    lo = max(lo, float(cell_lo))
    hi = min(hi, float(cell_hi))

    y = _safeguarded_newton(g_prime, density, lo, hi, y0)
    cands = np.asarray([y, y0, lo, hi])
    cvals = g(cands)
    gmin = float(cvals.min())
    mask = cvals <= gmin + TIE_TOL
    y_best = float(cands[mask].min())
    return y_best, float(g(np.asarray([y_best]))[0])


def _safeguarded_newton(g_prime, density: FourierDensity, lo: float, hi: float, y0: float) -> float:
    if hi <= lo:
        return lo
    glo = g_prime(lo, side="right")
    ghi = g_prime(hi, side="left")
    if glo >= 0.0:
        return lo
    if ghi <= 0.0:
        return hi
    a, b = lo, hi
    y = min(max(y0, a), b)
    for _ in range(NEWTON_STEPS):
        gy = g_prime(y)
        if gy > 0.0:
            b = y
        else:
            a = y
        curv = float(density.pdf(y))  # g'' = p(y) within a cell
        step = gy / curv if curv > 1e-12 else 0.0
        y_new = y - step
        if not (a < y_new < b):
            y_new = 0.5 * (a + b)
        if abs(y_new - y) <= NEWTON_TOL:
            return y_new
        y = y_new
    return y


# ---------------------------------------------------------------------------
# Exact engine: uniform density, eta_t = 1/(t+1)
# ---------------------------------------------------------------------------


def _exact_uniform_lmo(atoms_sorted: np.ndarray, sumy: float, sumsq: float, t: int):
    """Exact interval LMO for t uniform-weight dyadic atoms.

    Returns (y*, S(y*)) where S(y) = sum_i [(y - y_i)^2 - |y - y_i|]; all
    quantities are exactly representable dyadics, so ties break exactly.
    """
    lefts = np.concatenate([[0.0], atoms_sorted])
    rights = np.concatenate([atoms_sorted, [1.0]])
    k = np.arange(t + 1, dtype=np.float64)
    verts = (2.0 * sumy + 2.0 * k - t) / (2.0 * t)
    cands = np.clip(verts, lefts, rights)
    # snap to the dyadic grid carrying all true minimizers at this stage
    m = int(math.floor(math.log2(t))) if t else 0
    q = 2.0 ** -(m + 1)
    cands = np.round(cands / q) * q
    cands = np.clip(cands, 0.0, 1.0)
    cands = np.concatenate([cands, [1.0]])

    idx = np.searchsorted(atoms_sorted, cands, side="right")
    cum = np.concatenate([[0.0], np.cumsum(atoms_sorted)])
    F = idx.astype(np.float64)
    G = cum[idx]
    sq = t * cands * cands - 2.0 * cands * sumy + sumsq
    ab = 2.0 * cands * F - 2.0 * G + sumy - t * cands
    S = sq - ab
    order = np.lexsort((cands, S))  # min S first, then smallest y
    best = order[0]
    return float(cands[best]), float(S[best])


def _run_uniform_exact(iters: int, meta: dict) -> RunTrace:
    trace = RunTrace(meta)
    atoms = np.empty(iters)
    atoms[0] = 0.0  # smallest minimizer of the identically-zero start objective
    trace.append(0, 0.0, 0.0, 1.0, "fw", atom=0.0)
    n = 1
    sumy = 0.0
    sumsq = 0.0
    t_pair = 0.0  # sum over all atom pairs of (y_i - y_j)^2 - |y_i - y_j|

    for t in range(1, iters):
        srt = np.sort(atoms[:n])
        f = (6.0 * t_pair + t * t) / (24.0 * t * t)
        ystar, s_star = _exact_uniform_lmo(srt, sumy, sumsq, t)
        g_star = s_star / (2.0 * t) + K_DIAG
        fw_gap = 2.0 * f - g_star
        if fw_gap <= EARLY_EXIT_REL_TOL * (1.0 + abs(f)):
            trace.append(t, f, fw_gap, 0.0, "fw", atom=ystar)
            trace.metadata["early_exit_t"] = t
            trace.pad_to(iters)
            break
        trace.append(t, f, fw_gap, 1.0 / (t + 1.0), "fw", atom=ystar)
        t_pair += 2.0 * s_star
        sumy += ystar
        sumsq += ystar * ystar
        atoms[n] = ystar
        n += 1
    else:
        t = iters
        srt = np.sort(atoms[:n])
        f = (6.0 * t_pair + t * t) / (24.0 * t * t)
        ystar, s_star = _exact_uniform_lmo(srt, sumy, sumsq, t)
        fw_gap = 2.0 * f - (s_star / (2.0 * t) + K_DIAG)
        trace.append(t, f, fw_gap, 0.0, "fw", atom=ystar)

    state = HerdingState(FourierDensity.uniform())
    state.ys = atoms[:n].copy()
    state.ws = np.full(n, 1.0 / n)
    state.sxx = (6.0 * t_pair + n * n) / (12.0 * n * n)
    trace.metadata["final_state"] = state
    return trace


# ---------------------------------------------------------------------------
# Herding runs
# ---------------------------------------------------------------------------


def herding_run(density: FourierDensity, rule: StepRule, iters: int, *,
                metadata: dict | None = None) -> RunTrace:
    """Greedy herding run for `iters` iterations.

    The trace records t = 0..iters with h_t = f(x_t) (the optimal value is
    0), the duality gap, the step taken from x_t, and the atom selected by
    that step (``atom`` column). The first step is a full step for every
    rule: the run starts at the zero element, where line search is
    degenerate, and the first atom is the smallest minimizer of -mu.
    """
    if iters < 1:
        raise ValueError("iteration budget must be >= 1")
    if not isinstance(rule, (OpenLoop, LineSearch, ShortStep, ConstantStep)):
        raise ValueError(f"unsupported rule {rule!r}")
    meta = {
        "algo": "herding",
        "rule": rule_label(rule),
        "density": density.id_string(),
        "iters": int(iters),
    }
    if metadata:
        meta.update(metadata)

    if density.is_uniform and isinstance(rule, OpenLoop) and rule.ell == 1:
        return _run_uniform_exact(iters, meta)

    trace = RunTrace(meta)
    state = HerdingState(density)
    mu2 = density.mu_norm_sq

    # t = 0: start at the zero element of the space
    y1, g0 = _lmo_with_value(state.ys, state.ws, density)
    f0 = 0.5 * mu2
    trace.append(0, f0, -g0, 1.0, "fw", atom=y1)
    state.add_atom(y1, 1.0, k_col=0.0)

    exited = False
    for t in range(1, iters):
        ystar, gstar = _lmo_with_value(state.ys, state.ws, density)
        f = state.objective()
        fw_gap = state.sxx - state.sxmu - gstar
        if fw_gap <= EARLY_EXIT_REL_TOL * (1.0 + abs(f)):
            trace.append(t, f, fw_gap, 0.0, "fw", atom=ystar)
            exited = True
            break
        k_col = gstar + float(density.mu(ystar))
        if isinstance(rule, OpenLoop):
            eta = rule.eta(t)
        elif isinstance(rule, ConstantStep):
            eta = rule.eta
        else:
            # closed-form quadratic line search (short step coincides: L = 1)
            denom = state.sxx - 2.0 * k_col + K_DIAG
            eta = min(1.0, max(0.0, fw_gap / denom)) if denom > 0.0 else 0.0
        trace.append(t, f, fw_gap, eta, "fw", atom=ystar)
        state.add_atom(ystar, eta, k_col=k_col)

    if exited:
        trace.metadata["early_exit_t"] = int(trace.t[-1])
        trace.pad_to(iters)
    else:
        ystar, gstar = _lmo_with_value(state.ys, state.ws, density)
        f = state.objective()
        trace.append(iters, f, state.sxx - state.sxmu - gstar, 0.0, "fw", atom=ystar)
    trace.metadata["final_state"] = state
    return trace

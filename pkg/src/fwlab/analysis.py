"""Rate measurement on primal-gap traces.

Local convergence rates are minus the slope of the least-squares regression
line of log h against log(t + 1) over a sliding window; burn-in detection
scans for the first window whose local rate clears a threshold, and the
contour driver sweeps instance dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import OpenLoop, RunTrace


def _gaps(trace_or_h) -> np.ndarray:
    if isinstance(trace_or_h, RunTrace):
        return trace_or_h.h
    return np.asarray(trace_or_h, dtype=np.float64)


def min_prefix(trace_or_h) -> np.ndarray:
    """Running minimum of the primal gap; nonincreasing by construction."""
    return np.minimum.accumulate(_gaps(trace_or_h))


@dataclass(frozen=True)
class RateEstimate:
    window_start: int
    window_len: int
    slope: float  # minus the log-log regression slope
    r_squared: float


def local_rate(trace_or_h, t: int, window: int = 100) -> RateEstimate:
    """Local rate over h_t .. h_{t+window}.

    Ordinary least squares of log h against log(t + 1); returns minus the
    slope. A nonpositive gap inside the window reports +inf (converged).
    """
    h = _gaps(trace_or_h)
    if t < 0 or t + window >= h.shape[0]:
        raise ValueError("window exceeds the trace")
    seg = h[t : t + window + 1]
    if np.any(seg <= 0.0):
        return RateEstimate(t, window, np.inf, 1.0)
    xs = np.log(np.arange(t, t + window + 1, dtype=np.float64) + 1.0)
    ys = np.log(seg)
    slope, r2 = _ols(xs, ys)
    return RateEstimate(t, window, -slope, r2)


def _ols(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    xm = xs - xs.mean()
    ym = ys - ys.mean()
    sxx = float(xm @ xm)
    sxy = float(xm @ ym)
    syy = float(ym @ ym)
    slope = sxy / sxx
    r2 = 1.0 if syy == 0.0 else (sxy * sxy) / (sxx * syy)
    return slope, r2


def fit_loglog_rate(trace_or_h, t_lo: int, t_hi: int) -> float:
    """Minus the OLS slope of log h on log(t + 1) over t in [t_lo, t_hi]."""
    h = _gaps(trace_or_h)
    seg = h[t_lo : t_hi + 1]
    if np.any(seg <= 0.0):
        return np.inf
    xs = np.log(np.arange(t_lo, t_hi + 1, dtype=np.float64) + 1.0)
    slope, _ = _ols(xs, np.log(seg))
    return -slope


def rolling_rates(trace_or_h, window: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized local_rate for every admissible window start.

    Returns (slopes, r_squared), each of length len(h) - window. Windows
    containing a nonpositive gap get slope +inf.
    """
    h = _gaps(trace_or_h)
    n = h.shape[0]
    m = n - window
    if m <= 0:
        return np.empty(0), np.empty(0)
    bad = h <= 0.0
    hsafe = np.where(bad, 1.0, h)
    xs = np.log(np.arange(n, dtype=np.float64) + 1.0)
    ys = np.log(hsafe)
    w = window + 1

    def win_sums(v):
        c = np.concatenate([[0.0], np.cumsum(v)])
        return c[w:] - c[:-w]

    sx, sy = win_sums(xs), win_sums(ys)
    sxx, syy = win_sums(xs * xs), win_sums(ys * ys)
    sxy = win_sums(xs * ys)
    nbad = win_sums(bad.astype(np.float64))
    vxx = sxx - sx * sx / w
    vyy = syy - sy * sy / w
    vxy = sxy - sx * sy / w
    slopes = -vxy / vxx
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(vyy > 0.0, vxy * vxy / (vxx * vyy), 1.0)
    slopes = np.where(nbad > 0.0, np.inf, slopes)
    r2 = np.where(nbad > 0.0, 1.0, r2)
    return slopes, r2


def burn_in_end(trace_or_h, threshold: float = 1.8, window: int = 100) -> int | None:
    """Smallest t whose local rate reaches the threshold (stride-1 scan), or None."""
    h = _gaps(trace_or_h)
    if h.shape[0] <= window:
        raise ValueError("trace shorter than the window")
    slopes, _ = rolling_rates(h, window)
    hits = np.nonzero(slopes >= threshold)[0]
    return int(hits[0]) if hits.size else None


def rate_contour(template, dims, iters: int, window: int = 100, rule=OpenLoop(4),
                 seed_offset: int = 0):
    """Dimension sweep: run FW per dimension and emit (d, t, slope, r2) rows.

    `template` is an InstanceSpec whose region dimension is replaced per
    sweep entry. Per-cell failures are recorded in the returned error list
    rather than raised.
    """
    from dataclasses import replace as _replace

    from .fw import fw_run
    from .objectives import generate_instance

    rows: list[tuple[int, int, float, float]] = []
    errors: list[tuple[int, str]] = []
    for d in dims:
        try:
            spec = _replace(template, region=_replace(template.region, dimension=d),
                            seed=template.seed + seed_offset)
            objective, region = generate_instance(spec)
            x0 = np.zeros(d)
            x0[0] = 1.0
            if not region.contains(x0, 1e-10):
                x0 = region.lmo(-np.ones(d))
            trace = fw_run(objective, region, rule, x0, iters)
            slopes, r2 = rolling_rates(trace.h, window)
            rows.extend((d, t, float(slopes[t]), float(r2[t])) for t in range(slopes.shape[0]))
        except Exception as exc:  # noqa: BLE001 - per-cell failures are data
            errors.append((d, str(exc)))
    return rows, errors

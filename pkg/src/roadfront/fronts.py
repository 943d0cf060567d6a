"""Front positions, measured spreading speeds and steady-tail decay rates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import InsufficientData, NoCrossing, NonPositiveTail


@dataclass
class FrontTrace:
    times: np.ndarray
    positions_right: np.ndarray
    positions_left: np.ndarray
    level: float
    probe_y: float | None = None


def front_position(x, values, level: float, limit: float = 1.0) -> tuple[float, float]:
    """Outermost crossings of level * limit, linearly interpolated.

    Returns (x_left, x_right).  Raises NoCrossing when the field never reaches
    the threshold.
    """
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    thr = level * limit
    above = np.flatnonzero(values >= thr)
    if above.size == 0:
        raise NoCrossing(f"field never reaches {thr:.6g}")
    i, j = above[-1], above[0]

    if i == len(x) - 1:
        x_right = x[-1]
    else:
        s = (values[i] - thr) / (values[i] - values[i + 1])
        x_right = x[i] + s * (x[i + 1] - x[i])
    if j == 0:
        x_left = x[0]
    else:
        s = (values[j] - thr) / (values[j] - values[j - 1])
        x_left = x[j] - s * (x[j] - x[j - 1])
    return float(x_left), float(x_right)


def trace_fronts(times, x, profiles, level: float, limit: float = 1.0,
                 probe_y: float | None = None) -> FrontTrace:
    """Front positions over a stack of profiles; times without a front are skipped."""
    ts, left, right = [], [], []
    for t, prof in zip(times, profiles):
        try:
            xl, xr = front_position(x, prof, level, limit)
        except NoCrossing:
            continue
        ts.append(t)
        left.append(xl)
        right.append(xr)
    return FrontTrace(np.array(ts), np.array(right), np.array(left), level, probe_y)


def trajectory_fronts(traj, level: float, limit: float, probe_y: float | None = None) -> FrontTrace:
    """FrontTrace of a simulator Trajectory: the road density when probe_y is None."""
    profiles = traj.line() if probe_y is None else traj.trace(probe_y)
    return trace_fronts(traj.times, traj.x, profiles, level, limit, probe_y)


def estimate_speed(trace: FrontTrace, fit_window: float = 0.4, side: str = "right",
                   min_points: int = 10, clear_distance: float = 0.0) -> tuple[float, float]:
    """OLS speed over the final ``fit_window`` fraction of the run.

    Samples whose front lies within ``clear_distance`` of the origin are
    dropped.  The leftward speed is reported as a positive number.
    Returns (c_hat, stderr).
    """
    t = np.asarray(trace.times, dtype=float)
    pos = np.asarray(trace.positions_right if side == "right" else trace.positions_left, dtype=float)
    if t.size == 0:
        raise InsufficientData("empty front trace")
    t_start = t[-1] - fit_window * (t[-1] - t[0])
    mask = (t >= t_start) & (np.abs(pos) >= clear_distance)
    if mask.sum() < min_points:
        raise InsufficientData(f"only {mask.sum()} front samples in the fit window (need {min_points})")
    fit = stats.linregress(t[mask], pos[mask])
    slope = fit.slope if side == "right" else -fit.slope
    return float(slope), float(fit.stderr)


def estimate_decay(x, values, x_window: tuple[float, float], baseline: float = 0.0) -> tuple[float, float]:
    """Exponential decay rate of (values - baseline) over x_window.

    Fits log(values - baseline) against |x| for window points; returns the
    rate (minus the slope) and its standard error.
    """
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = x_window
    mask = (np.abs(x) >= lo) & (np.abs(x) <= hi) & (x >= 0)
    if mask.sum() < 3:
        raise InsufficientData("fewer than 3 points in the decay window")
    excess = values[mask] - baseline
    if np.any(excess <= 0):
        raise NonPositiveTail("field does not exceed the baseline across the window")
    fit = stats.linregress(np.abs(x[mask]), np.log(excess))
    return float(-fit.slope), float(fit.stderr)

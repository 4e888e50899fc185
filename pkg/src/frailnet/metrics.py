"""Evaluation metrics for predicted survival curves.

Censoring is handled by inverse-probability-of-censoring weighting:
a Kaplan-Meier estimate of the censoring distribution (computed on the
test split, censorings treated as the event) reweights observed events
and at-risk subjects.  On top of that sit the integrated Brier score,
the integrated negative Bernoulli log-likelihood, and a time-dependent
concordance index that compares each subject's predicted survival at
their own event time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoComparablePairsError, SpecError

# Guards against exploding weights / infinite logs in the tails; the
# censoring survival is floored and Bernoulli probabilities clamped.
CENSOR_FLOOR = 1e-4
PROB_CLAMP = 1e-7

DEFAULT_GRID_SIZE = 100
DEFAULT_UPPER_QUANTILE = 0.9


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function equal to 1 before the first jump.

    Calling it at t returns the value from the latest jump at or before
    t; before(t) gives the left limit, i.e. the value just before t.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if times.ndim != 1 or times.shape != values.shape:
            raise SpecError("times and values must be matching 1-d arrays")
        if times.size and np.any(np.diff(times) <= 0):
            raise SpecError("jump times must be strictly increasing")
        if np.any((values < 0) | (values > 1)):
            raise SpecError("step values must lie in [0, 1]")
        if values.size and np.any(np.diff(values) > 0):
            raise SpecError("step values must be non-increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def _eval(self, t, side):
        idx = np.searchsorted(self.times, t, side=side) - 1
        padded = np.concatenate([[1.0], self.values])
        return padded[idx + 1]

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = self._eval(t, side="right")
        return float(out) if t.ndim == 0 else out

    def before(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = self._eval(t, side="left")
        return float(out) if t.ndim == 0 else out


@dataclass(frozen=True)
class SurvivalCurve:
    """Predicted survival sampled on a time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if times.ndim != 1 or times.shape != values.shape or times.size == 0:
            raise SpecError("curve needs matching non-empty 1-d arrays")
        if np.any(np.diff(times) < 0):
            raise SpecError("curve times must be non-decreasing")
        if np.any((values < -1e-12) | (values > 1 + 1e-12)):
            raise SpecError("survival values must lie in [0, 1]")
        if np.any(np.diff(values) > 1e-12):
            raise SpecError("survival values must be non-increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", np.clip(values, 0.0, 1.0))


def _check_test_arrays(times, events):
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.float64)
    if times.ndim != 1 or times.shape != events.shape or times.size == 0:
        raise SpecError("times and events must be matching non-empty 1-d arrays")
    if np.any(times < 0) or not np.all(np.isin(events, (0.0, 1.0))):
        raise SpecError("times must be >= 0 and events binary")
    return times, events


def km_censoring(times, events) -> StepFunction:
    """Kaplan-Meier estimate of the censoring survival function.

    Censorings (event = 0) play the role of the event.  At tied times,
    deaths are taken to occur first, so the at-risk count for the
    censorings at t is (number with T >= t) minus the deaths at t.
    """
    times, events = _check_test_arrays(times, events)
    order = np.argsort(times, kind="stable")
    t_sorted = times[order]
    e_sorted = events[order]
    uniq, start = np.unique(t_sorted, return_index=True)
    n = times.size
    jump_t, jump_v = [], []
    surv = 1.0
    for k, t in enumerate(uniq):
        stop = start[k + 1] if k + 1 < uniq.size else n
        deaths = float(np.sum(e_sorted[start[k] : stop]))
        cens = float(stop - start[k]) - deaths
        if cens == 0:
            continue
        at_risk = float(n - start[k]) - deaths
        surv *= 1.0 - cens / at_risk
        jump_t.append(t)
        jump_v.append(surv)
    return StepFunction(times=np.array(jump_t), values=np.array(jump_v))


def score_grid(times, t1=None, t2=None, grid_size: int = DEFAULT_GRID_SIZE):
    """Equally spaced evaluation grid; default window is [0, 90th
    percentile of the test times]."""
    times = np.asarray(times, dtype=np.float64)
    if t1 is None:
        t1 = 0.0
    if t2 is None:
        t2 = float(np.quantile(times, DEFAULT_UPPER_QUANTILE))
    if not t1 < t2:
        raise SpecError(f"need t1 < t2, got [{t1}, {t2}]")
    if grid_size < 2:
        raise SpecError("grid_size must be >= 2")
    return np.linspace(t1, t2, grid_size)


def _check_surv(surv, grid, n):
    surv = np.asarray(surv, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise SpecError("grid must be strictly increasing with >= 2 points")
    if surv.shape != (n, grid.size):
        raise SpecError(f"surv must have shape (n_subjects, n_grid) = ({n}, {grid.size})")
    if np.any((surv < 0) | (surv > 1)):
        raise SpecError("survival predictions must lie in [0, 1]")
    return surv, grid


def _weighted_scores(loss_event, loss_risk, surv, grid, times, events):
    """Censoring-weighted mean loss at each grid time.

    Subjects with an observed event before t contribute the event loss
    weighted by 1/S_C(T_i); subjects still at risk at t contribute the
    at-risk loss weighted by 1/S_C(t).
    """
    times, events = _check_test_arrays(times, events)
    surv, grid = _check_surv(surv, grid, times.size)
    km = km_censoring(times, events)
    w_event = 1.0 / np.maximum(km(times), CENSOR_FLOOR)
    w_grid = 1.0 / np.maximum(km(grid), CENSOR_FLOOR)
    had_event = (times[:, None] <= grid[None, :]) & (events[:, None] == 1.0)
    at_risk = times[:, None] > grid[None, :]
    contrib = np.where(had_event, loss_event(surv) * w_event[:, None], 0.0)
    contrib += np.where(at_risk, loss_risk(surv) * w_grid[None, :], 0.0)
    return contrib.mean(axis=0)


def _integrate_scores(scores, grid):
    return float(np.trapezoid(scores, grid) / (grid[-1] - grid[0]))


def ibs(surv, grid, times, events) -> float:
    """Integrated Brier score of predictions surv[i, j] = S(grid[j] | z_i),
    normalized by the window length."""
    scores = _weighted_scores(
        lambda s: s**2, lambda s: (1.0 - s) ** 2, surv, grid, times, events
    )
    return _integrate_scores(scores, grid)


def inbll(surv, grid, times, events) -> float:
    """Integrated negative Bernoulli log-likelihood, normalized by the
    window length; probabilities are clamped away from 0 and 1."""

    def loss_event(s):
        return -np.log(np.clip(1.0 - s, PROB_CLAMP, 1.0))

    def loss_risk(s):
        return -np.log(np.clip(s, PROB_CLAMP, 1.0))

    scores = _weighted_scores(loss_event, loss_risk, surv, grid, times, events)
    return _integrate_scores(scores, grid)


def c_index(surv_at_event, times, events, block: int = 512) -> float:
    """Time-dependent concordance: over pairs with T_i < T_j and
    delta_i = 1, the fraction where the predicted survival of i at its
    own event time is below j's at j's time; ties count half."""
    times, events = _check_test_arrays(times, events)
    s = np.asarray(surv_at_event, dtype=np.float64)
    if s.shape != times.shape:
        raise SpecError("surv_at_event must match times in shape")
    num = 0.0
    den = 0
    for lo in range(0, times.size, block):
        hi = min(lo + block, times.size)
        comp = (times[lo:hi, None] < times[None, :]) & (events[lo:hi, None] == 1.0)
        den += int(comp.sum())
        num += float(np.sum(comp & (s[lo:hi, None] < s[None, :])))
        num += 0.5 * float(np.sum(comp & (s[lo:hi, None] == s[None, :])))
    if den == 0:
        raise NoComparablePairsError("no comparable pairs (need T_i < T_j with event at i)")
    return num / den


def evaluation_report(surv, grid, times, events, surv_at_event) -> dict:
    """All three metrics plus their evaluation-window bookkeeping, as a
    flat dict ready for serialization."""
    report = {
        "ibs": {
            "value": ibs(surv, grid, times, events),
            "window_lo": float(grid[0]),
            "window_hi": float(grid[-1]),
            "n_grid": int(len(grid)),
        },
        "inbll": {
            "value": inbll(surv, grid, times, events),
            "window_lo": float(grid[0]),
            "window_hi": float(grid[-1]),
            "n_grid": int(len(grid)),
        },
    }
    times_arr, events_arr = _check_test_arrays(times, events)
    comp = (times_arr[:, None] < times_arr[None, :]) & (events_arr[:, None] == 1.0)
    report["cindex"] = {
        "value": c_index(surv_at_event, times, events),
        "n_pairs": int(comp.sum()),
    }
    return report


def format_report(report: dict) -> str:
    """Human-readable key-value rendering: `<metric>.<field> = <value>`
    per line, metrics in sorted order."""
    lines = []
    for metric in sorted(report):
        fields = report[metric]
        for key in sorted(fields):
            lines.append(f"{metric}.{key} = {fields[key]!r}")
    return "\n".join(lines) + "\n"

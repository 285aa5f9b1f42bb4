"""Trajectory and vector-field property checkers.

Each checker works on recorded data only (no re-integration) and returns a
:class:`PropertyReport` whose ``worst_violation`` is compared against a
property-specific tolerance.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .certify import jsonable, lyapunov_entropy, lyapunov_entropy_rate, lyapunov_l1_rate
from .network import PowerNetwork, drift
from .signals import assumption1_bounds
from .sim import Trajectory

MONOTONE_TOL = 1e-7
DESCENT_TOL = 1e-8
RATE_RTOL = 0.05


@dataclass
class PropertyReport:
    name: str
    holds: bool
    worst_violation: float
    location: tuple[float | None, Any] = (None, None)
    samples_checked: int = 0
    data: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return jsonable(asdict(self))


def _nonempty(traj: Trajectory) -> None:
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")


def check_positivity(traj: Trajectory, tol: float = 0.0) -> PropertyReport:
    _nonempty(traj)
    X = traj.states
    flat = int(np.argmin(X))
    k, i = np.unravel_index(flat, X.shape)
    low = float(X[k, i])
    return PropertyReport(
        "positivity", low >= -tol, max(0.0, -low), (float(traj.times[k]), int(i) + 1), X.size,
        {"min_component": low},
    )


def check_monotone_order(traj_a: Trajectory, traj_b: Trajectory, tol: float = MONOTONE_TOL) -> PropertyReport:
    """A(t) <= B(t) + tol componentwise at every shared stamp, given A(0) <= B(0)."""
    _nonempty(traj_a)
    _nonempty(traj_b)
    if traj_a.times.shape != traj_b.times.shape or not np.array_equal(traj_a.times, traj_b.times):
        raise ValueError("trajectories do not share a time grid")
    if np.any(traj_a.states[0] > traj_b.states[0]):
        raise ValueError("initial conditions are not ordered A(0) <= B(0)")
    gap = traj_a.states - traj_b.states
    k, i = np.unravel_index(int(np.argmax(gap)), gap.shape)
    worst = max(0.0, float(gap[k, i]))
    return PropertyReport("monotone_order", worst <= tol, worst, (float(traj_a.times[k]), int(i) + 1), gap.size)


def _rate_agreement(times, values, rates, floor) -> tuple[float, float, int, float | None]:
    """Compare difference quotients with the trapezoid average of sampled rates.

    Only intervals where both endpoint values exceed ``floor`` take part,
    since below that the recorded states are dominated by integration error.
    """
    dt = np.diff(times)
    dq = np.diff(values) / dt
    model = 0.5 * (rates[1:] + rates[:-1])
    active = (np.minimum(np.abs(values[1:]), np.abs(values[:-1])) > floor) & (np.abs(model) > 0)
    if not np.any(active):
        return 0.0, 0.0, 0, None
    rel = np.abs(dq[active] - model[active]) / np.abs(model[active])
    j = int(np.argmax(rel))
    return float(rel[j]), float(np.median(rel)), int(active.sum()), float(times[:-1][active][j])


def check_lyapunov_descent(traj: Trajectory, v_bar, psi_l, tau=None, tol: float = DESCENT_TOL,
                           rate_rtol: float = RATE_RTOL, rate_floor: float = 1e-10) -> PropertyReport:
    _nonempty(traj)
    if np.any(traj.states <= 0.0):
        raise ValueError("trajectory touches the boundary of the orthant; entropy function undefined")
    v_bar = np.asarray(v_bar, dtype=float)
    values = np.array([lyapunov_entropy(V, v_bar) for V in traj.states])
    rates = np.array([lyapunov_entropy_rate(V, v_bar, psi_l, tau) for V in traj.states])
    rise = np.diff(values) if len(values) > 1 else np.zeros(1)
    k = int(np.argmax(rise))
    worst_rise = max(0.0, float(rise[k]))
    rate_err, rate_med, n_rate, at = _rate_agreement(traj.times, values, rates, rate_floor)
    holds = worst_rise <= tol and rate_err <= rate_rtol
    worst = worst_rise if worst_rise > tol else rate_err
    loc = float(traj.times[k + 1]) if worst_rise > tol or at is None else at
    return PropertyReport(
        "lyapunov_descent", holds, worst, (loc, None), len(values),
        {"max_increase": worst_rise, "max_rate_rel_error": rate_err, "median_rate_rel_error": rate_med,
         "rate_intervals": n_rate, "initial_value": float(values[0]), "final_value": float(values[-1])},
    )


def check_l1_descent_frozen(traj: Trajectory, psi, tau=None, tol: float = DESCENT_TOL,
                            rate_rtol: float = RATE_RTOL, rate_floor: float = 1e-8) -> PropertyReport:
    """Sum of voltages non-increasing along a drive-free frozen run, at rate V^T Psi V."""
    _nonempty(traj)
    if np.any(traj.states < 0.0):
        raise ValueError("drive-free frozen trajectory left the nonnegative orthant")
    totals = traj.states.sum(axis=1)
    rates = np.array([lyapunov_l1_rate(V, psi, tau) for V in traj.states])
    rise = np.diff(totals) if len(totals) > 1 else np.zeros(1)
    k = int(np.argmax(rise))
    worst_rise = max(0.0, float(rise[k]))
    rate_err, rate_med, n_rate, at = _rate_agreement(traj.times, totals, rates, rate_floor)
    holds = worst_rise <= tol and rate_err <= rate_rtol
    worst = worst_rise if worst_rise > tol else rate_err
    loc = float(traj.times[k + 1]) if worst_rise > tol or at is None else at
    return PropertyReport(
        "l1_descent_frozen", holds, worst, (loc, None), len(totals),
        {"max_increase": worst_rise, "max_rate_rel_error": rate_err, "median_rate_rel_error": rate_med,
         "initial_l1": float(totals[0]), "final_l1": float(totals[-1])},
    )


def estimate_ultimate_bound(traj: Trajectory, transient_fraction: float = 0.5,
                            growth_tol: float = 1e-3) -> tuple[float, PropertyReport]:
    """Empirical bound R = sup ||V(t)||_inf after the transient.

    The report holds when the last decile of the post-transient window does
    not exceed the earlier post-transient maximum by more than ``growth_tol``
    (relative), i.e. the sup is not still being pushed up at the end.
    """
    _nonempty(traj)
    if not 0.0 < transient_fraction < 1.0:
        raise ValueError("transient_fraction must lie in (0, 1)")
    t = traj.times
    cutoff = t[0] + transient_fraction * (t[-1] - t[0])
    post = np.flatnonzero(t >= cutoff)
    if post.size < 10:
        raise ValueError(f"only {post.size} stamps after the transient; need at least 10")
    norms = np.max(np.abs(traj.states[post]), axis=1)
    R = float(norms.max())
    split = post.size - max(1, post.size // 10)
    head, tail = norms[:split], norms[split:]
    growth = float(tail.max() / head.max() - 1.0) if head.max() > 0 else 0.0
    slope = float(np.polyfit(t[post][split:], tail, 1)[0]) if tail.size > 1 else 0.0
    k = int(post[np.argmax(norms)])
    report = PropertyReport(
        "ultimate_bound", math.isfinite(R) and growth <= growth_tol, max(0.0, growth),
        (float(t[k]), None), int(post.size),
        {"R": R, "terminal_growth": growth, "terminal_slope": slope, "transient_fraction": transient_fraction},
    )
    return R, report


def check_homogeneity(net: PowerNetwork, theta, k, samples: int = 100, seed: int = 0,
                      rtol: float = 1e-10) -> PropertyReport:
    """f_H(sV) = s^2 f_H(V) for the drive-free field: homogeneous of degree two,
    which is r-homogeneity of order r under the uniform dilation s^r V."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    worst, where = 0.0, None
    for m in range(samples):
        V = rng.uniform(0.0, 3.0, net.n) * (rng.random(net.n) > 0.1)
        s = 10.0 * (1.0 - rng.random())
        lhs = drift(net, s * V, theta, k)
        rhs = s * s * drift(net, V, theta, k)
        scale = np.max(np.abs(rhs))
        err = 0.0 if scale == 0.0 else float(np.max(np.abs(lhs - rhs)) / scale)
        if err > worst:
            worst, where = err, m
    return PropertyReport("homogeneity", worst <= rtol, worst, (None, where), samples, {"degree": 2})


def check_assumption1(net: PowerNetwork, horizon: float = 100.0, points: int = 2001) -> PropertyReport:
    """Finite gain/reference bounds with gains bounded away from zero."""
    c_k, c_r = assumption1_bounds(net, np.linspace(0.0, horizon, points))
    k_low = net.gain_bank.lower
    i = int(np.argmin(k_low))
    holds = bool(k_low[i] > 0.0) and math.isfinite(c_k) and math.isfinite(c_r)
    return PropertyReport(
        "assumption1", holds, max(0.0, -float(k_low[i])), (None, net.nodes[i].id), net.n,
        {"c_k": c_k, "c_r": c_r, "min_gain_lower_envelope": float(k_low[i])},
    )

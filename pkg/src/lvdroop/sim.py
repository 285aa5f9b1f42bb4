"""Adaptive Dormand-Prince 5(4) integration of the voltage dynamics.

Two departures from a textbook stepper, both tied to positivity:

* a step whose proposal has a negative component is rejected and retried
  at half the step size (never clipped);
* components that start at exactly 0 are held at exactly 0; their
  derivative is identically zero, so this only removes roundoff.

Steps are shortened to land exactly on the record grid t0 + i * stride,
so runs sharing a stride share time stamps bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .network import PowerNetwork

# Dormand & Prince (1980), as tabulated in Hairer, Norsett & Wanner, vol. I.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class IntegrationError(RuntimeError):
    """Step-size underflow or a non-finite state; carries time and state."""

    def __init__(self, message: str, t: float, state: np.ndarray):
        super().__init__(f"{message} at t={t:.17g}; state={np.array2string(state, precision=6)}")
        self.t = t
        self.state = state


@dataclass(frozen=True)
class IntegratorSettings:
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 1e-2
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    record_stride: float = 1e-2
    # False: fixed step dt_init, no error control (used for order studies)
    adaptive: bool = True

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.record_stride > 0):
            raise ValueError("tolerances and record_stride must be > 0")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def make_rhs(net: PowerNetwork, sigma: float | None = None, drift_only: bool = False,
             decoupled: bool = False) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side f(t, V) of the (optionally frozen / drive-free) dynamics."""
    n = net.n
    I, J = net.edge_i, net.edge_j
    Bv, Gv, tau, b_abs = net.edge_b, net.edge_g, net.tau, net.b_abs

    def params(t):
        th = np.zeros(len(I)) if decoupled else net.edge_angles(t)
        s, c = np.sin(th), np.cos(th)
        gs, bc = Gv * s, Bv * c
        k = net.gains(t)
        b = np.zeros(n) if drift_only else k * net.references(t)
        return bc + gs, bc - gs, -(b_abs + k), b

    if sigma is not None:
        fixed = params(sigma)
        params = lambda t: fixed  # noqa: E731

    def rhs(t, V):
        up, down, dg, b = params(t)
        psi_v = dg * V + np.bincount(I, up * V[J], minlength=n) + np.bincount(J, down * V[I], minlength=n)
        return V * (psi_v + b) / tau

    return rhs


def record_grid(t0: float, t_end: float, stride: float) -> np.ndarray:
    count = int(math.ceil((t_end - t0) / stride - 1e-9))
    grid = t0 + stride * np.arange(count + 1)
    grid[-1] = t_end
    return grid


def _dopri(rhs, V0: np.ndarray, t0: float, t_end: float, st: IntegratorSettings, meta: dict) -> Trajectory:
    y = np.array(V0, dtype=float)
    pinned = y == 0.0
    stamps = record_grid(t0, t_end, st.record_stride)
    out = np.empty((len(stamps), y.size))
    out[0] = y
    t, h = float(t0), st.dt_init
    k1 = rhs(t, y)
    accepted = rejected = positivity_rejections = 0
    ks = [None] * 7
    just_rejected = False

    for m in range(1, len(stamps)):
        target = stamps[m]
        while t < target:
            if h < st.dt_min:
                raise IntegrationError(f"step size {h:.3g} fell below dt_min", t, y)
            last = t + h >= target - 1e-12 * max(1.0, abs(target))
            step = target - t if last else h
            ks[0] = k1
            for s in range(1, 7):
                acc = y.copy()
                for j, a in enumerate(_A[s]):
                    if a:
                        acc += step * a * ks[j]
                t_s = target if (last and _C[s] == 1.0) else t + _C[s] * step
                if s == 6:
                    y_new = acc
                ks[s] = rhs(t_s, acc)
            y_new[pinned] = 0.0
            if not np.all(np.isfinite(y_new)):
                raise IntegrationError("non-finite state", t, y)

            if st.adaptive:
                err_vec = step * sum(e * k for e, k in zip(_E, ks) if e)
                scale = st.abs_tol + st.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
                err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            else:
                err = 0.0
            if err > 1.0:
                rejected += 1
                just_rejected = True
                h = step * max(0.2, 0.9 * err ** -0.2)
                continue
            if np.any(y_new < 0.0):
                rejected += 1
                positivity_rejections += 1
                just_rejected = True
                h = step / 2.0
                continue

            accepted += 1
            t = target if last else t + step
            y, k1 = y_new, ks[6]
            if st.adaptive:
                grow = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                if just_rejected:
                    grow = min(grow, 1.0)
                if last and step < h:
                    # a step shortened to hit a stamp says little about the next one
                    grow = min(grow, 1.0)
                    step = h
                h = min(st.dt_max, step * grow)
            just_rejected = False
        out[m] = y

    meta = dict(meta)
    meta.update(settings=asdict(st), accepted_steps=accepted, rejected_steps=rejected,
                positivity_rejections=positivity_rejections)
    return Trajectory(stamps, out, meta)


def _check_inputs(V0, t0, t_end) -> np.ndarray:
    V0 = np.asarray(V0, dtype=float)
    if V0.ndim != 1:
        raise ValueError("V0 must be a vector")
    if np.any(V0 < 0.0) or not np.all(np.isfinite(V0)):
        raise ValueError("V0 must be finite and in the nonnegative orthant")
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    return V0


def integrate(net: PowerNetwork, V0, t0: float = 0.0, t_end: float = 10.0,
              settings: IntegratorSettings | None = None, decoupled: bool = False,
              scenario: str = "") -> Trajectory:
    V0 = _check_inputs(V0, t0, t_end)
    if V0.size != net.n:
        raise ValueError(f"V0 has {V0.size} entries for a {net.n}-node network")
    settings = settings or IntegratorSettings()
    rhs = make_rhs(net, decoupled=decoupled)
    return _dopri(rhs, V0, t0, t_end, settings, {"scenario": scenario, "frozen": None, "decoupled": decoupled})


def integrate_frozen(net: PowerNetwork, sigma: float, V0, t0: float = 0.0, t_end: float = 10.0,
                     settings: IntegratorSettings | None = None, drift_only: bool = False,
                     decoupled: bool = False, scenario: str = "") -> Trajectory:
    """Same stepper with every signal held at its value at ``sigma``.

    ``drift_only`` drops the drive b, leaving dV/dt = diag(tau)^-1 diag(V) Psi V.
    """
    V0 = _check_inputs(V0, t0, t_end)
    if V0.size != net.n:
        raise ValueError(f"V0 has {V0.size} entries for a {net.n}-node network")
    if np.any(net.gains(sigma) <= 0.0):
        raise ValueError(f"frozen droop gain not positive at sigma={sigma}")
    settings = settings or IntegratorSettings()
    rhs = make_rhs(net, sigma=sigma, drift_only=drift_only, decoupled=decoupled)
    meta = {"scenario": scenario, "frozen": sigma, "drift_only": drift_only, "decoupled": decoupled}
    return _dopri(rhs, V0, t0, t_end, settings, meta)


def batch_integrate(net: PowerNetwork, V0s: Sequence, t0: float = 0.0, t_end: float = 10.0,
                    settings: IntegratorSettings | None = None, decoupled: bool = False,
                    scenario: str = "") -> list[Trajectory]:
    return [integrate(net, V0, t0, t_end, settings, decoupled, scenario) for V0 in V0s]

"""Time-varying scalar signals (droop gains, references, angle perturbations).

Only two forms exist: a constant and a single-tone sinusoid

    s(t) = offset + amplitude * sin(angular_frequency * t + phase)

A constant is stored as a sinusoid with zero amplitude, which lets a whole
network's worth of signals be evaluated as one vectorized expression
(see :class:`SignalBank`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .network import PowerNetwork


@dataclass(frozen=True)
class SignalSpec:
    form: str = "constant"
    offset: float = 0.0
    amplitude: float = 0.0
    angular_frequency: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.form not in ("constant", "sinusoid"):
            raise ValueError(f"unknown signal form {self.form!r}")
        if self.form == "constant" and self.amplitude != 0.0:
            raise ValueError("constant signal cannot carry an amplitude")
        for name in ("offset", "amplitude", "angular_frequency", "phase"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"signal {name} must be finite")

    @classmethod
    def constant(cls, value: float) -> "SignalSpec":
        return cls("constant", offset=float(value))

    @classmethod
    def sinusoid(cls, offset: float, amplitude: float, angular_frequency: float = 1.0,
                 phase: float = 0.0) -> "SignalSpec":
        return cls("sinusoid", float(offset), float(amplitude), float(angular_frequency), float(phase))

    @property
    def lower(self) -> float:
        return self.offset - abs(self.amplitude)

    @property
    def upper(self) -> float:
        return self.offset + abs(self.amplitude)

    def require_positive(self, what: str) -> None:
        """Raise if the analytic envelope admits a value <= 0."""
        if not self.lower > 0.0:
            raise ValueError(f"{what} must be positive-valued; envelope lower bound is {self.lower:g}")

    def to_dict(self) -> dict:
        if self.form == "constant":
            return {"constant": self.offset}
        return {
            "sinusoid": {
                "offset": self.offset,
                "amplitude": self.amplitude,
                "angular_frequency": self.angular_frequency,
                "phase": self.phase,
            }
        }


def eval_signal(spec: SignalSpec, t: float) -> float:
    if spec.form == "constant":
        return spec.offset
    return spec.offset + spec.amplitude * math.sin(spec.angular_frequency * t + spec.phase)


class SignalBank:
    """A stack of signals evaluated together: ``bank(t)`` returns an array."""

    def __init__(self, specs: Iterable[SignalSpec]):
        specs = list(specs)
        self.specs = tuple(specs)
        self.offset = np.array([s.offset for s in specs], dtype=float)
        self.amplitude = np.array([s.amplitude for s in specs], dtype=float)
        self.omega = np.array([s.angular_frequency for s in specs], dtype=float)
        self.phase = np.array([s.phase for s in specs], dtype=float)
        self.constant = not np.any(self.amplitude)

    def __len__(self) -> int:
        return len(self.specs)

    def __call__(self, t: float) -> np.ndarray:
        if self.constant:
            return self.offset.copy()
        return self.offset + self.amplitude * np.sin(self.omega * t + self.phase)

    @property
    def lower(self) -> np.ndarray:
        return self.offset - np.abs(self.amplitude)

    @property
    def upper(self) -> np.ndarray:
        return self.offset + np.abs(self.amplitude)


@dataclass(frozen=True)
class FrozenScenario:
    """All node/edge signals evaluated at a fixed instant ``sigma``.

    ``theta`` holds nodal angles; ``theta_rel`` is the antisymmetric matrix of
    relative angles actually used by the interaction matrix (it differs from
    ``theta[:, None] - theta[None, :]`` on edges carrying an angle override).
    """
    sigma: float
    theta: np.ndarray
    theta_rel: np.ndarray
    k: np.ndarray
    v_star: np.ndarray


def freeze(net: "PowerNetwork", sigma: float) -> FrozenScenario:
    k = net.gains(sigma)
    if np.any(k <= 0.0):
        bad = [net.nodes[i].id for i in np.flatnonzero(k <= 0.0)]
        raise ValueError(f"frozen droop gain is not positive at sigma={sigma:g} for nodes {bad}")
    return FrozenScenario(
        sigma=float(sigma),
        theta=net.nodal_angles(sigma),
        theta_rel=net.relative_angles(sigma),
        k=k,
        v_star=net.references(sigma),
    )


def assumption1_bounds(net: "PowerNetwork", t_grid: Sequence[float]) -> tuple[float, float]:
    """Bounds ``(c_k, c_r)`` on the droop gains and on ``|k_i V_i^*|``.

    The analytic envelopes (offset + |amplitude|) are authoritative since the
    bound must hold for every instant; ``t_grid`` samples are folded in as a
    diagnostic and can only raise the result through roundoff.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise ValueError("t_grid must be non-empty")
    k_hi = np.array([abs(s.offset) + abs(s.amplitude) for s in net.gain_bank.specs])
    r_hi = np.array([abs(s.offset) + abs(s.amplitude) for s in net.reference_bank.specs])
    c_k = float(np.max(k_hi))
    c_r = float(np.max(k_hi * r_hi))
    for t in t_grid:
        k = net.gains(t)
        c_k = max(c_k, float(np.max(k)))
        c_r = max(c_r, float(np.max(np.abs(k * net.references(t)))))
    return c_k, c_r


def parse_signal(raw) -> SignalSpec:
    """Accept a number, ``{"constant": v}``, ``{"sinusoid": {...}}`` or a SignalSpec."""
    if isinstance(raw, SignalSpec):
        return raw
    if isinstance(raw, bool):
        raise ValueError(f"invalid signal {raw!r}")
    if isinstance(raw, (int, float)):
        return SignalSpec.constant(raw)
    if isinstance(raw, dict) and len(raw) == 1:
        (form, body), = raw.items()
        if form == "constant":
            return SignalSpec.constant(float(body))
        if form == "sinusoid" and isinstance(body, dict):
            unknown = set(body) - {"offset", "amplitude", "angular_frequency", "phase"}
            if unknown:
                raise ValueError(f"unknown sinusoid fields {sorted(unknown)}")
            return SignalSpec.sinusoid(
                float(body.get("offset", 0.0)),
                float(body.get("amplitude", 0.0)),
                float(body.get("angular_frequency", 1.0)),
                float(body.get("phase", 0.0)),
            )
    raise ValueError(f"invalid signal {raw!r}; expected a number, {{constant: v}} or {{sinusoid: {{...}}}}")

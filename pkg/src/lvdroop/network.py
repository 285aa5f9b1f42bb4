"""Power network, quadratic droop controllers and the Lotka-Volterra form.

Every node i runs the controller

    tau_i dV_i/dt = V_i * (-k_i (V_i - V_i^*)) - Q_i

with Q_i the AC reactive power injection. Substituting Q gives

    diag(tau) dV/dt = diag(V) (Psi(theta) V + b),   b_i = k_i V_i^*

where Psi has diagonal -(|B_i| + k_i) and off-diagonal entries
G_ij sin(theta_ij) + |B_ij| cos(theta_ij) on lines, zero elsewhere.

Sign conventions: line susceptances are <= 0, conductances >= 0, shunts >= 0,
and the aggregate |B_i| = B_i^sh + sum_j |B_ij|.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Hashable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .signals import SignalBank, SignalSpec, parse_signal

KINDS = ("coupled", "symmetric", "skew", "decoupled")


class NetworkError(ValueError):
    """Invalid network description; the message names the offending element."""


@dataclass(frozen=True)
class LineParams:
    from_node: Hashable
    to_node: Hashable
    susceptance: float
    conductance: float = 0.0


@dataclass(frozen=True)
class NodeParams:
    id: Hashable
    tau: float = 1.0
    shunt_susceptance: float = 0.0
    droop_gain: SignalSpec = SignalSpec.constant(1.0)
    reference: SignalSpec = SignalSpec.constant(1.0)
    theta0: float = 0.0
    theta_perturbation: SignalSpec = SignalSpec.constant(0.0)


@dataclass(frozen=True)
class EdgeAngleOverride:
    """Relative angle on one line: theta_ij(t) = theta0_i - theta0_j + signal(t)."""
    from_node: Hashable
    to_node: Hashable
    signal: SignalSpec


@dataclass(frozen=True, eq=False)
class PowerNetwork:
    nodes: tuple[NodeParams, ...]
    lines: tuple[LineParams, ...]
    edge_overrides: tuple[EdgeAngleOverride, ...] = ()
    # False admits gain/reference envelopes touching <= 0 (for hypothesis checks)
    check_signals: bool = True
    # derived; filled in __post_init__
    index: Mapping[Hashable, int] = field(init=False, repr=False)
    neighbors: tuple[frozenset, ...] = field(init=False, repr=False)
    b_abs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _validate(self)
        n = len(self.nodes)
        index = {node.id: i for i, node in enumerate(self.nodes)}
        I = np.array([index[ln.from_node] for ln in self.lines], dtype=int)
        J = np.array([index[ln.to_node] for ln in self.lines], dtype=int)
        B = np.array([abs(ln.susceptance) for ln in self.lines], dtype=float)
        G = np.array([ln.conductance for ln in self.lines], dtype=float)
        shunt = np.array([nd.shunt_susceptance for nd in self.nodes], dtype=float)
        b_abs = shunt + np.bincount(I, B, minlength=n) + np.bincount(J, B, minlength=n)
        nbrs = [set() for _ in range(n)]
        for i, j in zip(I, J):
            nbrs[i].add(int(j))
            nbrs[j].add(int(i))

        # per-edge override lookup, oriented along the stored line direction
        override_sign = np.zeros(len(self.lines))
        override_specs = [SignalSpec.constant(0.0)] * len(self.lines)
        pos = {(int(i), int(j)): e for e, (i, j) in enumerate(zip(I, J))}
        for ov in self.edge_overrides:
            a, c = index[ov.from_node], index[ov.to_node]
            if (a, c) in pos:
                e, sgn = pos[(a, c)], 1.0
            else:
                e, sgn = pos[(c, a)], -1.0
            override_specs[e] = ov.signal
            override_sign[e] = sgn

        put = object.__setattr__
        put(self, "index", index)
        put(self, "neighbors", tuple(frozenset(s) for s in nbrs))
        put(self, "b_abs", _readonly(b_abs))
        put(self, "edge_i", _readonly(I))
        put(self, "edge_j", _readonly(J))
        put(self, "edge_b", _readonly(B))
        put(self, "edge_g", _readonly(G))
        put(self, "tau", _readonly(np.array([nd.tau for nd in self.nodes], dtype=float)))
        put(self, "shunt", _readonly(shunt))
        put(self, "theta0", _readonly(np.array([nd.theta0 for nd in self.nodes], dtype=float)))
        put(self, "gain_bank", SignalBank(nd.droop_gain for nd in self.nodes))
        put(self, "reference_bank", SignalBank(nd.reference for nd in self.nodes))
        put(self, "angle_bank", SignalBank(nd.theta_perturbation for nd in self.nodes))
        put(self, "override_bank", SignalBank(override_specs))
        put(self, "override_sign", _readonly(override_sign))
        put(self, "has_overrides", bool(np.any(override_sign)))

        # literal B_i = B_sh + sum B_ij must be <= 0 for the |B_i| rewriting to be exact
        literal = shunt - (b_abs - shunt)
        odd = [self.nodes[i].id for i in np.flatnonzero((literal > 0) & (b_abs > shunt))]
        put(self, "convention_conflicts", tuple(odd))
        if odd:
            warnings.warn(
                f"shunt susceptance exceeds incident line susceptance at nodes {odd}; "
                "using |B_i| = B_sh + sum|B_ij|",
                stacklevel=3,
            )

    @property
    def n(self) -> int:
        return len(self.nodes)

    def gains(self, t: float) -> np.ndarray:
        return self.gain_bank(t)

    def references(self, t: float) -> np.ndarray:
        return self.reference_bank(t)

    def nodal_angles(self, t: float) -> np.ndarray:
        return self.theta0 + self.angle_bank(t)

    def edge_angles(self, t: float) -> np.ndarray:
        """theta_i - theta_j for every line (i, j) in stored orientation."""
        th = self.nodal_angles(t)
        rel = th[self.edge_i] - th[self.edge_j]
        if self.has_overrides:
            mask = self.override_sign != 0.0
            base = self.theta0[self.edge_i] - self.theta0[self.edge_j]
            rel = np.where(mask, base + self.override_sign * self.override_bank(t), rel)
        return rel

    def relative_angles(self, t: float) -> np.ndarray:
        rel = np.zeros((self.n, self.n))
        e = self.edge_angles(t)
        rel[self.edge_i, self.edge_j] = e
        rel[self.edge_j, self.edge_i] = -e
        return rel

    def angle_bound(self) -> float:
        """Analytic bound on max_t |theta_ij(t)| over all lines (0 without lines)."""
        if not self.lines:
            return 0.0
        I, J = self.edge_i, self.edge_j
        ab = self.angle_bank
        base = self.theta0[I] - self.theta0[J]
        nodal = np.abs(base + ab.offset[I] - ab.offset[J]) + np.abs(ab.amplitude[I]) + np.abs(ab.amplitude[J])
        ob = self.override_bank
        over = np.abs(base + self.override_sign * ob.offset) + np.abs(ob.amplitude)
        return float(np.max(np.where(self.override_sign != 0.0, over, nodal)))

    def line(self, a: Hashable, b: Hashable) -> LineParams | None:
        for ln in self.lines:
            if {ln.from_node, ln.to_node} == {a, b}:
                return ln
        return None


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _validate(net: PowerNetwork) -> None:
    ids = [nd.id for nd in net.nodes]
    if not ids:
        raise NetworkError("network has no nodes")
    seen = set()
    for nid in ids:
        if nid in seen:
            raise NetworkError(f"duplicate node id {nid!r}")
        seen.add(nid)
    for nd in net.nodes:
        if not nd.tau > 0:
            raise NetworkError(f"node {nd.id!r}: tau must be > 0, got {nd.tau}")
        if nd.shunt_susceptance < 0:
            raise NetworkError(f"node {nd.id!r}: shunt susceptance must be >= 0, got {nd.shunt_susceptance}")
        if not net.check_signals:
            continue
        try:
            nd.droop_gain.require_positive("droop gain")
            nd.reference.require_positive("reference")
        except ValueError as exc:
            raise NetworkError(f"node {nd.id!r}: {exc}") from None
        if not np.isfinite(nd.theta0):
            raise NetworkError(f"node {nd.id!r}: theta0 must be finite")

    pairs = set()
    for ln in net.lines:
        tag = f"line ({ln.from_node!r}, {ln.to_node!r})"
        for end in (ln.from_node, ln.to_node):
            if end not in seen:
                raise NetworkError(f"{tag}: unknown node {end!r}")
        if ln.from_node == ln.to_node:
            raise NetworkError(f"{tag}: self-loop")
        key = frozenset((ln.from_node, ln.to_node))
        if key in pairs:
            raise NetworkError(f"{tag}: duplicate line")
        pairs.add(key)
        if ln.susceptance > 0:
            raise NetworkError(f"{tag}: susceptance must be <= 0, got {ln.susceptance}")
        if ln.susceptance == 0:
            raise NetworkError(f"{tag}: zero susceptance (omit the line instead)")
        if ln.conductance < 0:
            raise NetworkError(f"{tag}: conductance must be >= 0, got {ln.conductance}")

    for ov in net.edge_overrides:
        if frozenset((ov.from_node, ov.to_node)) not in pairs:
            raise NetworkError(f"angle override on ({ov.from_node!r}, {ov.to_node!r}): no such line")
    if len({frozenset((o.from_node, o.to_node)) for o in net.edge_overrides}) != len(net.edge_overrides):
        raise NetworkError("duplicate angle override")

    n = len(ids)
    if n > 1:
        index = {nid: i for i, nid in enumerate(ids)}
        rows = [index[ln.from_node] for ln in net.lines]
        cols = [index[ln.to_node] for ln in net.lines]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        ncomp, labels = connected_components(adj, directed=False)
        if ncomp > 1:
            stray = [ids[i] for i in np.flatnonzero(labels != labels[0])]
            raise NetworkError(f"network is disconnected; nodes {stray} unreachable from {ids[0]!r}")


def build_network(config: Mapping[str, Any], check_signals: bool = True) -> PowerNetwork:
    """Build a validated network from a parsed description.

    ``config`` has ``nodes`` (list of mappings with ``id`` and optional
    ``tau``, ``shunt_susceptance``, ``droop_gain``, ``reference``, ``theta0``,
    ``theta_perturbation``), ``lines`` (``from``, ``to``, ``susceptance``,
    ``conductance``) and optionally ``edge_angle_overrides``
    (``from``, ``to``, ``signal``). Signals are numbers or signal mappings.
    """
    nodes = []
    for raw in config.get("nodes", []):
        nodes.append(NodeParams(
            id=raw["id"],
            tau=float(raw.get("tau", 1.0)),
            shunt_susceptance=float(raw.get("shunt_susceptance", 0.0)),
            droop_gain=parse_signal(raw.get("droop_gain", 1.0)),
            reference=parse_signal(raw.get("reference", 1.0)),
            theta0=float(raw.get("theta0", 0.0)),
            theta_perturbation=parse_signal(raw.get("theta_perturbation", 0.0)),
        ))
    lines = [
        LineParams(raw["from"], raw["to"], float(raw["susceptance"]), float(raw.get("conductance", 0.0)))
        for raw in config.get("lines", [])
    ]
    overrides = [
        EdgeAngleOverride(raw["from"], raw["to"], parse_signal(raw["signal"]))
        for raw in config.get("edge_angle_overrides", []) or []
    ]
    return PowerNetwork(tuple(nodes), tuple(lines), tuple(overrides), check_signals)


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    entries: np.ndarray
    kind: str
    k_used: np.ndarray
    theta_used: np.ndarray | None = None
    parts: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown interaction-matrix kind {self.kind!r}")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def _check_len(net: PowerNetwork, name: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.n,):
        raise ValueError(f"{name} has shape {x.shape}, expected ({net.n},)")
    return x


def _check_gains(net: PowerNetwork, k) -> np.ndarray:
    k = _check_len(net, "k", k)
    if np.any(k <= 0):
        bad = [net.nodes[i].id for i in np.flatnonzero(k <= 0)]
        raise ValueError(f"droop gains must be > 0; offending nodes {bad}")
    return k


def _edge_theta(net: PowerNetwork, theta) -> np.ndarray:
    """Per-line relative angle from nodal angles (1-D) or a relative-angle matrix (2-D)."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape == (net.n,):
        return theta[net.edge_i] - theta[net.edge_j]
    if theta.shape == (net.n, net.n):
        return theta[net.edge_i, net.edge_j]
    raise ValueError(f"theta has shape {theta.shape}; expected ({net.n},) or ({net.n}, {net.n})")


def _edge_coefficients(net: PowerNetwork, theta_e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s, c = np.sin(theta_e), np.cos(theta_e)
    gs, bc = net.edge_g * s, net.edge_b * c
    return bc + gs, bc - gs


def reactive_power(net: PowerNetwork, V, theta) -> np.ndarray:
    """Nodal reactive power under the AC power-flow model.

    Q_i = |B_i| V_i^2 + sum_j (B_ij cos th_ij - G_ij sin th_ij) V_i V_j,
    i.e. the textbook -B_i V_i^2 term with -B_i taken as |B_i|.
    """
    V = _check_len(net, "V", V)
    th_e = _edge_theta(net, theta)
    Q = net.b_abs * V**2
    for e, ln in enumerate(net.lines):
        i, j = net.edge_i[e], net.edge_j[e]
        t, B, G = th_e[e], ln.susceptance, ln.conductance
        Q[i] += (B * np.cos(t) - G * np.sin(t)) * V[i] * V[j]
        Q[j] += (B * np.cos(-t) - G * np.sin(-t)) * V[j] * V[i]
    return Q


def interaction_matrix_coupled(net: PowerNetwork, theta, k) -> InteractionMatrix:
    k = _check_gains(net, k)
    th_e = _edge_theta(net, theta)
    up, down = _edge_coefficients(net, th_e)
    M = np.diag(-(net.b_abs + k))
    M[net.edge_i, net.edge_j] = up
    M[net.edge_j, net.edge_i] = down
    # same per-line terms as _edge_coefficients, so sym + skew == M bit for bit
    gs, bc = net.edge_g * np.sin(th_e), net.edge_b * np.cos(th_e)
    sym = np.diag(-(net.b_abs + k))
    sym[net.edge_i, net.edge_j] = bc
    sym[net.edge_j, net.edge_i] = bc
    skew = np.zeros_like(sym)
    skew[net.edge_i, net.edge_j] = gs
    skew[net.edge_j, net.edge_i] = -gs
    return InteractionMatrix(_readonly(M), "coupled", k, np.array(theta, dtype=float),
                             parts=(_readonly(sym), _readonly(skew)))


def interaction_matrix_decoupled(net: PowerNetwork, k) -> InteractionMatrix:
    k = _check_gains(net, k)
    M = np.diag(-(net.b_abs + k))
    M[net.edge_i, net.edge_j] = net.edge_b
    M[net.edge_j, net.edge_i] = net.edge_b
    return InteractionMatrix(_readonly(M), "decoupled", k)


def split_parts(M: InteractionMatrix) -> tuple[InteractionMatrix, InteractionMatrix]:
    """Split a coupled matrix into (symmetric cos part, skew sin part).

    Matrices built by :func:`interaction_matrix_coupled` carry their parts;
    for anything else the symmetric and antisymmetric halves are used.
    """
    if M.kind != "coupled":
        raise ValueError(f"split_parts needs a coupled matrix, got {M.kind!r}")
    if M.parts is not None:
        sym, skew = M.parts
    else:
        A = M.entries
        sym = _readonly(0.5 * (A + A.T))
        skew = _readonly(0.5 * (A - A.T))
    return (
        InteractionMatrix(sym, "symmetric", M.k_used, M.theta_used),
        InteractionMatrix(skew, "skew", M.k_used, M.theta_used),
    )


def drive_vector(k, v_star) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    if k.shape != v_star.shape:
        raise ValueError(f"k has shape {k.shape} but v_star has shape {v_star.shape}")
    return k * v_star


def _psi_times(net: PowerNetwork, V: np.ndarray, theta_e: np.ndarray, k: np.ndarray) -> np.ndarray:
    up, down = _edge_coefficients(net, theta_e)
    n = net.n
    return (
        -(net.b_abs + k) * V
        + np.bincount(net.edge_i, up * V[net.edge_j], minlength=n)
        + np.bincount(net.edge_j, down * V[net.edge_i], minlength=n)
    )


def vector_field(net: PowerNetwork, V, theta, k, v_star) -> np.ndarray:
    """dV/dt = diag(tau)^-1 diag(V) (Psi(theta) V + b)."""
    V = _check_len(net, "V", V)
    k = _check_len(net, "k", k)
    v_star = _check_len(net, "v_star", v_star)
    return V * (_psi_times(net, V, _edge_theta(net, theta), k) + k * v_star) / net.tau


def drift(net: PowerNetwork, V, theta, k) -> np.ndarray:
    """The drive-free part diag(tau)^-1 diag(V) Psi(theta) V (quadratic in V)."""
    V = _check_len(net, "V", V)
    k = _check_len(net, "k", k)
    return V * _psi_times(net, V, _edge_theta(net, theta), k) / net.tau


def network_to_dict(net: PowerNetwork) -> dict:
    out = {
        "nodes": [
            {
                "id": nd.id,
                "tau": nd.tau,
                "shunt_susceptance": nd.shunt_susceptance,
                "droop_gain": nd.droop_gain.to_dict(),
                "reference": nd.reference.to_dict(),
                "theta0": nd.theta0,
                "theta_perturbation": nd.theta_perturbation.to_dict(),
            }
            for nd in net.nodes
        ],
        "lines": [
            {"from": ln.from_node, "to": ln.to_node, "susceptance": ln.susceptance,
             "conductance": ln.conductance}
            for ln in net.lines
        ],
    }
    if net.edge_overrides:
        out["edge_angle_overrides"] = [
            {"from": ov.from_node, "to": ov.to_node, "signal": ov.signal.to_dict()}
            for ov in net.edge_overrides
        ]
    return out


def node_ids(net: PowerNetwork) -> Sequence[Hashable]:
    return [nd.id for nd in net.nodes]

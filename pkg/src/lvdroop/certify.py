"""Structural and stability certificates for interaction matrices.

Every check returns a :class:`CertificateReport` carrying the smallest slack
(``margin``, negative when violated) and the entries that witness it.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from .network import PowerNetwork, drive_vector, interaction_matrix_decoupled

METZLER_TOL = 1e-12
HURWITZ_TOL = 1e-9
EQUILIBRIUM_RTOL = 1e-10


@dataclass
class CertificateReport:
    kind: str
    holds: bool
    margin: float
    witnesses: list[tuple[Any, float]] = field(default_factory=list)
    notes: str = ""
    status: str = ""
    data: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = "holds" if self.holds else "fails"

    def to_dict(self) -> dict:
        return jsonable(asdict(self))


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _square(M) -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def is_metzler(M, tol: float = METZLER_TOL, n_witnesses: int = 3) -> CertificateReport:
    A = _square(M)
    n = A.shape[0]
    if n < 2:
        return CertificateReport("metzler", True, math.inf, notes="no off-diagonal entries")
    off = ~np.eye(n, dtype=bool)
    idx = np.argwhere(off)
    vals = A[off]
    order = np.argsort(vals, kind="stable")[:n_witnesses]
    witnesses = [((int(idx[o][0]) + 1, int(idx[o][1]) + 1), float(vals[o])) for o in order]
    margin = float(vals.min())
    return CertificateReport("metzler", margin >= -tol, margin, witnesses,
                             notes="witness indices are 1-based (row, col)")


def gershgorin_negative_definite(net: PowerNetwork, k) -> CertificateReport:
    """Row-dominance certificate for x^T Psi x < 0 at every angle configuration.

    Uses the worst case |cos| = 1, so the margin reduces to B_sh_i + k_i and
    does not depend on theta.
    """
    k = np.asarray(k, dtype=float)
    radius = net.b_abs - net.shunt
    slack = net.b_abs + k - radius
    i = int(np.argmin(slack))
    margin = float(slack[i])
    order = np.argsort(slack, kind="stable")[:3]
    return CertificateReport(
        "gershgorin",
        margin > 0.0,
        margin,
        [(net.nodes[j].id, float(slack[j])) for j in order],
        notes="strict row dominance of -(|B_i|+k_i) over sum_j |B_ij|",
    )


def hurwitz_check(M, tol: float = HURWITZ_TOL) -> CertificateReport:
    A = _square(M)
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"eigenvalue computation failed: {exc}") from exc
    top = float(np.max(eig.real))
    return CertificateReport(
        "hurwitz", top < -tol, -top,
        [("max_real_eigenvalue", top)],
        data={"eigenvalues_real": np.sort(eig.real)},
    )


def negative_definite_check(M, tol: float = HURWITZ_TOL) -> CertificateReport:
    """Definiteness of the symmetric part, via its largest eigenvalue."""
    A = _square(M)
    top = float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1])
    return CertificateReport("negative_definite", top < -tol, -top, [("max_eigenvalue_sym", top)])


def cooperativity_check(net: PowerNetwork, beta: float) -> CertificateReport:
    """Metzler-ness of Psi(theta) for every |theta_ij| <= beta.

    The worst case over the interval is |B| cos(beta) - G sin(beta) >= 0,
    i.e. G/|B| < cot(beta) per line.
    """
    if not 0.0 <= beta < math.pi / 2:
        raise ValueError(f"beta must lie in [0, pi/2), got {beta}")
    if beta == 0.0 or not net.lines:
        return CertificateReport("cooperativity", True, math.inf, notes="cot(0) = +inf")
    cot = 1.0 / math.tan(beta)
    ratio = net.edge_g / net.edge_b
    slack = cot - ratio
    order = np.argsort(slack, kind="stable")[:3]
    wit = [((net.lines[e].from_node, net.lines[e].to_node), float(slack[e])) for e in order]
    return CertificateReport(
        "cooperativity", bool(np.all(slack > 0.0)), float(slack.min()), wit,
        notes=f"cot(beta) = {cot:.6g}; threshold angle per line is arctan(|B|/G)",
        data={"beta": beta, "threshold_beta": float(np.min(np.arctan2(net.edge_b, net.edge_g)))},
    )


def _max_sym_eig(A: np.ndarray, logd: np.ndarray) -> float:
    # geometric mean of D pinned to 1; otherwise shrinking D fakes a witness
    P = A * np.exp(logd - logd.mean())[None, :]
    return float(np.linalg.eigvalsh(0.5 * (P + P.T))[-1])


def dissipativity_check(M, tol: float = HURWITZ_TOL, restarts: int = 100, seed: int = 0,
                        sweeps: int = 20) -> CertificateReport:
    """Look for a diagonal D > 0 with sym(M D) negative semidefinite.

    D = I is tried first. Otherwise a coordinate descent on log(d_i) minimises
    the top eigenvalue of sym(M D); failing to find a witness is reported as
    status "unknown", not as a failure. A positive diagonal entry rules out
    any witness, since (M D)_ii = M_ii d_i.
    """
    A = _square(M)
    n = A.shape[0]
    diag = np.diag(A)
    stably = bool(np.all(diag < 0.0))
    note = "negativity checked on the symmetric part of M D"

    if np.any(diag > 0.0):
        i = int(np.argmax(diag))
        return CertificateReport("dissipativity", False, -float(diag[i]), [((i + 1, i + 1), float(diag[i]))],
                                 notes=note + "; positive diagonal entry", data={"stably_dissipative": False})

    top = _max_sym_eig(A, np.zeros(n))
    if top <= tol:
        return CertificateReport("dissipativity", True, -top, [("max_eigenvalue_sym", top)], notes=note,
                                 data={"D": np.ones(n), "stably_dissipative": stably})

    rng = np.random.default_rng(seed)
    best_val, best_d = top, np.ones(n)
    for r in range(restarts):
        logd = np.zeros(n) if r == 0 else rng.normal(0.0, 2.0, n)
        val = _max_sym_eig(A, logd)
        for _ in range(sweeps):
            prev = val
            for i in range(n):
                def f(x, i=i):
                    trial = logd.copy()
                    trial[i] = x
                    return _max_sym_eig(A, trial)
                res = minimize_scalar(f, bounds=(logd[i] - 6.0, logd[i] + 6.0), method="bounded",
                                      options={"xatol": 1e-8})
                if res.fun < val:
                    logd[i], val = res.x, res.fun
            if val <= tol or prev - val < 1e-12:
                break
        if val < best_val:
            best_val, best_d = val, np.exp(logd - logd.mean())
        if best_val <= tol:
            return CertificateReport("dissipativity", True, -best_val, [("max_eigenvalue_sym", best_val)],
                                     notes=note, data={"D": best_d, "stably_dissipative": stably})
    return CertificateReport("dissipativity", False, -best_val, [("max_eigenvalue_sym", best_val)],
                             notes=note + f"; no diagonal witness after {restarts} restarts",
                             status="unknown", data={"D": best_d, "stably_dissipative": False})


@dataclass
class EquilibriumResult:
    v_bar: np.ndarray
    interior: bool
    residual: float
    anomaly: str = ""


def solve_equilibrium(net: PowerNetwork, k, v_star) -> EquilibriumResult:
    """Interior equilibrium of the decoupled system: Psi_l v = -b."""
    k = np.asarray(k, dtype=float)
    b = drive_vector(k, v_star)
    if b.shape != (net.n,):
        raise ValueError(f"k/v_star have shape {b.shape}, expected ({net.n},)")
    if np.any(b <= 0.0):
        bad = [net.nodes[i].id for i in np.flatnonzero(b <= 0.0)]
        raise ValueError(f"k_i V_i^* must be > 0; offending nodes {bad}")
    gersh = gershgorin_negative_definite(net, k)
    if not gersh.holds:
        raise ValueError(f"decoupled matrix not certified invertible (Gershgorin margin {gersh.margin:g})")
    psi = interaction_matrix_decoupled(net, k).entries
    try:
        v_bar = np.linalg.solve(psi, -b)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular decoupled system: {exc}") from exc
    residual = float(np.max(np.abs(psi @ v_bar + b)))
    interior = bool(np.min(v_bar) > 0.0)
    anomaly = "" if interior else "non-interior equilibrium despite certified preconditions"
    return EquilibriumResult(v_bar, interior, residual, anomaly)


def lyapunov_entropy(V, v_bar) -> float:
    """sum_i (V_i - vb_i) - vb_i ln(V_i / vb_i); zero only at V = v_bar."""
    V = np.asarray(V, dtype=float)
    v_bar = np.asarray(v_bar, dtype=float)
    if V.shape != v_bar.shape:
        raise ValueError(f"shape mismatch {V.shape} vs {v_bar.shape}")
    if np.any(V <= 0.0) or np.any(v_bar <= 0.0):
        raise ValueError("entropy Lyapunov function needs strictly positive arguments")
    r = V / v_bar
    # vb * (r - 1 - ln r); log1p keeps precision near r = 1, plain log near 0
    near = np.abs(r - 1.0) < 0.5
    logr = np.where(near, np.log1p(np.where(near, r - 1.0, 0.0)), np.log(r))
    return float(np.sum(v_bar * ((r - 1.0) - logr)))


def lyapunov_entropy_rate(V, v_bar, psi_l, tau=None) -> float:
    """(V - vb)^T diag(tau)^-1 Psi_l (V - vb); tau defaults to ones."""
    V = np.asarray(V, dtype=float)
    v_bar = np.asarray(v_bar, dtype=float)
    P = np.asarray(psi_l, dtype=float)
    if V.shape != v_bar.shape or P.shape != (V.size, V.size):
        raise ValueError("dimension mismatch between state, equilibrium and matrix")
    e = V - v_bar
    w = e if tau is None else e / np.asarray(tau, dtype=float)
    return float(w @ (P @ e))


def lyapunov_l1_rate(V, psi, tau=None) -> float:
    """Rate of sum_i V_i along the drive-free frozen system: V^T diag(tau)^-1 Psi V."""
    V = np.asarray(V, dtype=float)
    P = np.asarray(psi, dtype=float)
    if P.shape != (V.size, V.size):
        raise ValueError("dimension mismatch between state and matrix")
    w = V if tau is None else V / np.asarray(tau, dtype=float)
    return float(w @ (P @ V))


def homogeneous_norm(x, r) -> float:
    x = np.asarray(x, dtype=float)
    r = np.broadcast_to(np.asarray(r, dtype=float), x.shape)
    if np.any(r <= 0.0) or np.any(r >= 1.0):
        raise ValueError("homogeneity weights must lie in (0, 1)")
    return float(np.sum(np.abs(x) ** (1.0 / r)))

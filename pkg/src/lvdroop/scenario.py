"""Run the checks named in a scenario file against its network and runs."""
from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np

from . import certify, verify
from .certify import CertificateReport
from .config import CERTIFICATE_CHECKS, PROPERTY_CHECKS, ScenarioConfig
from .network import interaction_matrix_coupled, interaction_matrix_decoupled
from .sim import Trajectory, batch_integrate, integrate_frozen, record_grid
from .verify import PropertyReport

MAX_SWEEP_POINTS = 2001


def simulate(cfg: ScenarioConfig) -> list[Trajectory]:
    return batch_integrate(cfg.network, cfg.initial_conditions, cfg.t0, cfg.t_end, cfg.settings,
                           decoupled=cfg.decoupled, scenario=cfg.name)


def _instants(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.decoupled or _time_invariant(cfg):
        return np.array([cfg.t0])
    grid = record_grid(cfg.t0, cfg.t_end, cfg.settings.record_stride)
    if grid.size > MAX_SWEEP_POINTS:
        grid = np.linspace(cfg.t0, cfg.t_end, MAX_SWEEP_POINTS)
    return grid


def _time_invariant(cfg: ScenarioConfig) -> bool:
    net = cfg.network
    return all(b.constant for b in (net.gain_bank, net.reference_bank, net.angle_bank, net.override_bank))


def _matrix_at(cfg: ScenarioConfig, t: float) -> np.ndarray:
    net = cfg.network
    if cfg.decoupled:
        return interaction_matrix_decoupled(net, net.gains(t)).entries
    return interaction_matrix_coupled(net, net.relative_angles(t), net.gains(t)).entries


def _worst_instant(cfg: ScenarioConfig, check: Callable[[np.ndarray], CertificateReport]) -> CertificateReport:
    worst, when = None, None
    for t in _instants(cfg):
        rep = check(_matrix_at(cfg, t))
        if worst is None or rep.margin < worst.margin:
            worst, when = rep, t
    what = "decoupled matrix" if cfg.decoupled else "coupled matrix"
    span = "" if len(_instants(cfg)) == 1 else f"; worst of {len(_instants(cfg))} instants at t={when:g}"
    worst.notes = "; ".join(x for x in (worst.notes, f"{what}{span}") if x)
    worst.data["instant"] = when
    return worst


def run_certificate(cfg: ScenarioConfig, name: str) -> CertificateReport:
    net = cfg.network
    if name == "metzler":
        return _worst_instant(cfg, certify.is_metzler)
    if name == "hurwitz":
        return _worst_instant(cfg, certify.hurwitz_check)
    if name == "negative_definite":
        return _worst_instant(cfg, certify.negative_definite_check)
    if name == "dissipativity":
        return _worst_instant(cfg, lambda M: certify.dissipativity_check(M, seed=cfg.seed))
    if name == "gershgorin":
        # worst case over time as well as angle: the lowest gain envelope
        return certify.gershgorin_negative_definite(net, net.gain_bank.lower)
    if name == "cooperativity":
        beta = cfg.check_options.get("beta", 0.0 if cfg.decoupled else net.angle_bound())
        if beta >= math.pi / 2:
            return CertificateReport("cooperativity", False, -math.inf,
                                     notes=f"angle envelope {beta:.6g} reaches pi/2", data={"beta": beta})
        rep = certify.cooperativity_check(net, beta)
        rep.data["beta"] = beta
        return rep
    if name == "equilibrium":
        k, vs = net.gains(cfg.t0), net.references(cfg.t0)
        try:
            eq = certify.solve_equilibrium(net, k, vs)
        except ValueError as exc:
            return CertificateReport("equilibrium", False, -math.inf, notes=str(exc))
        bound = certify.EQUILIBRIUM_RTOL * float(np.max(np.abs(k * vs)))
        ok = eq.interior and eq.residual <= bound
        return CertificateReport(
            "equilibrium", ok, float(np.min(eq.v_bar)), [("residual", eq.residual)],
            notes=eq.anomaly or f"decoupled equilibrium at t={cfg.t0:g}",
            data={"v_bar": eq.v_bar, "residual": eq.residual, "interior": eq.interior},
        )
    raise ValueError(f"unknown certificate {name!r}")


def _merge(name: str, reports: list[PropertyReport]) -> PropertyReport:
    """Fold per-run reports into one: holds if all hold, worst of the worsts."""
    if len(reports) == 1:
        return reports[0]
    worst = max(reports, key=lambda r: r.worst_violation)
    return PropertyReport(
        name, all(r.holds for r in reports), worst.worst_violation, worst.location,
        sum(r.samples_checked for r in reports),
        {"runs": [r.data | {"holds": r.holds, "worst_violation": r.worst_violation} for r in reports]},
    )


def _guarded(name: str, check: Callable[[], PropertyReport]) -> PropertyReport:
    """A trajectory that breaks a checker's precondition fails that check."""
    try:
        return check()
    except ValueError as exc:
        return PropertyReport(name, False, math.inf, data={"note": str(exc)})


def frozen_drift_run(cfg: ScenarioConfig) -> tuple[Trajectory, np.ndarray]:
    net = cfg.network
    sigma = float(cfg.check_options.get("frozen_sigma", cfg.t0))
    horizon = float(cfg.check_options.get("frozen_t_end", cfg.t_end - cfg.t0))
    traj = integrate_frozen(net, sigma, np.ones(net.n), cfg.t0, cfg.t0 + horizon, cfg.settings,
                            drift_only=True, decoupled=cfg.decoupled, scenario=f"{cfg.name}:frozen-drift")
    return traj, _matrix_at(cfg, sigma)


def run_property(cfg: ScenarioConfig, name: str, trajs: list[Trajectory],
                 frozen: tuple[Trajectory, np.ndarray] | None = None) -> PropertyReport:
    net = cfg.network
    if name == "positivity":
        return _merge(name, [verify.check_positivity(tr) for tr in trajs])
    if name == "ultimate_bound":
        frac = cfg.check_options.get("transient_fraction", 0.5)
        return _merge(name, [_guarded(name, lambda tr=tr: verify.estimate_ultimate_bound(tr, frac)[1])
                             for tr in trajs])
    if name == "monotone_order":
        pairs = []
        for a in range(len(trajs)):
            for b in range(len(trajs)):
                if a != b and np.all(trajs[a].states[0] <= trajs[b].states[0]) and (
                        np.any(trajs[a].states[0] < trajs[b].states[0]) or a < b):
                    pairs.append(_guarded(name, lambda a=a, b=b: verify.check_monotone_order(trajs[a], trajs[b])))
        if not pairs:
            return PropertyReport(name, False, math.inf, data={"note": "no ordered pair of initial conditions"})
        return _merge(name, pairs)
    if name == "lyapunov_descent":
        if not (cfg.decoupled and _time_invariant(cfg)):
            return PropertyReport(name, False, math.inf,
                                  data={"note": "needs a decoupled scenario with constant signals"})
        k, vs = net.gains(cfg.t0), net.references(cfg.t0)
        eq = certify.solve_equilibrium(net, k, vs)
        psi = interaction_matrix_decoupled(net, k).entries
        return _merge(name, [_guarded(name, lambda tr=tr: verify.check_lyapunov_descent(tr, eq.v_bar, psi, net.tau))
                             for tr in trajs])
    if name == "l1_descent_frozen":
        traj, psi = frozen if frozen is not None else frozen_drift_run(cfg)
        return _guarded(name, lambda: verify.check_l1_descent_frozen(traj, psi, net.tau))
    if name == "homogeneity":
        n_samples = int(cfg.check_options.get("homogeneity_samples", 100))
        theta = np.zeros((net.n, net.n)) if cfg.decoupled else net.relative_angles(cfg.t0)
        return verify.check_homogeneity(net, theta, net.gains(cfg.t0), n_samples, cfg.seed)
    if name == "assumption1":
        return verify.check_assumption1(net)
    raise ValueError(f"unknown property {name!r}")


def split_checks(names: Iterable[str]) -> tuple[list[str], list[str]]:
    names = list(names)
    return ([n for n in names if n in CERTIFICATE_CHECKS], [n for n in names if n in PROPERTY_CHECKS])

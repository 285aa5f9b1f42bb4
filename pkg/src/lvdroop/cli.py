"""Command line: simulate, certify, equilibrium, verify, reproduce.

Exit status is 0 when every requested check holds, 1 when one fails and 2
on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certify import CertificateReport, jsonable, solve_equilibrium
from .config import (BUNDLED, CERTIFICATE_CHECKS, PROPERTY_CHECKS, ConfigError, RunBundle, ScenarioConfig,
                     bundled_config_path, config_hash, parse_config, read_trajectory_csv, write_trajectory_csv)
from .network import NetworkError
from .scenario import frozen_drift_run, run_certificate, run_property, simulate, split_checks
from .sim import IntegrationError

DEFAULT_CERTIFICATES = ["metzler", "gershgorin", "hurwitz"]
DEFAULT_PROPERTIES = ["positivity", "ultimate_bound"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--abs-tol", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--stride", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lvdroop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate every initial condition; write CSVs and bundle.json")
    p.add_argument("config")
    _common(p)
    p = sub.add_parser("certify", help="structural and stability certificates")
    p.add_argument("config")
    _common(p)
    p = sub.add_parser("equilibrium", help="decoupled interior equilibrium and residual")
    p.add_argument("config")
    _common(p)
    p = sub.add_parser("verify", help="trajectory property checks on fresh runs or supplied CSVs")
    p.add_argument("config")
    p.add_argument("--csv", type=Path, nargs="+", help="trajectory CSVs to check instead of integrating")
    _common(p)
    p = sub.add_parser("reproduce", help="run a bundled scenario end to end")
    p.add_argument("figure", choices=BUNDLED)
    _common(p)
    return parser


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    st = {}
    if args.rel_tol is not None:
        st["rel_tol"] = args.rel_tol
    if args.abs_tol is not None:
        st["abs_tol"] = args.abs_tol
    if args.stride is not None:
        st["record_stride"] = args.stride
    if st:
        cfg.settings = dataclasses.replace(cfg.settings, **st)
    if args.t_end is not None:
        if not args.t_end > cfg.t0:
            raise ConfigError(f"--t-end {args.t_end} must exceed t0 = {cfg.t0}")
        cfg.t_end = args.t_end
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _line(rep) -> str:
    if isinstance(rep, CertificateReport):
        return f"{rep.kind}: {rep.status} (margin {rep.margin:.6g})"
    extra = f", R {rep.data['R']:.6g}" if "R" in rep.data else ""
    note = f"; {rep.data['note']}" if "note" in rep.data else ""
    return f"{rep.name}: {'holds' if rep.holds else 'fails'} (worst violation {rep.worst_violation:.3g}{extra}){note}"


def _run(cfg: ScenarioConfig, certs, props, out: Path | None, trajs=None, source: str = "") -> int:
    certificates = [run_certificate(cfg, c) for c in certs]
    for rep in certificates:
        print(_line(rep))
    frozen = None
    traj_meta = []
    if props or out is not None:
        if trajs is None:
            trajs = simulate(cfg) if any(p not in ("homogeneity", "assumption1", "l1_descent_frozen")
                                         for p in props) or out is not None else []
        if "l1_descent_frozen" in props:
            frozen = frozen_drift_run(cfg)
    properties = [run_property(cfg, p, trajs, frozen) for p in props]
    for rep in properties:
        print(_line(rep))

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        for i, tr in enumerate(trajs or []):
            name = f"trajectory_{i + 1}.csv"
            write_trajectory_csv(tr, out / name)
            traj_meta.append({"file": name, "initial_condition": tr.states[0], "meta": tr.meta})
        if frozen is not None:
            write_trajectory_csv(frozen[0], out / "frozen_drift.csv")
            traj_meta.append({"file": "frozen_drift.csv", "initial_condition": frozen[0].states[0],
                              "meta": frozen[0].meta})
        bundle = RunBundle(
            scenario=cfg.name,
            trajectories=jsonable(traj_meta),
            certificates=[r.to_dict() for r in certificates],
            properties=[r.to_dict() for r in properties],
            provenance={"config": source, "config_sha256": config_hash(source) if source else None,
                        "tool_version": __version__, "seed": cfg.seed},
        )
        bundle.write(out / "bundle.json")
        print(f"wrote {len(traj_meta)} trajectories and bundle.json to {out}")
    ok = all(r.holds for r in certificates) and all(r.holds for r in properties)
    return 0 if ok else 1


def _requested(cfg: ScenarioConfig, pool, default) -> list[str]:
    names = [c for c in cfg.checks if c in pool]
    return names if cfg.checks else list(default)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "reproduce":
            source = str(bundled_config_path(args.figure))
            cfg = _apply_overrides(parse_config(source), args)
            out = args.out or Path(f"reproduce_{args.figure}")
            certs, props = split_checks(cfg.checks)
            return _run(cfg, certs, props, out, source=source)

        cfg = _apply_overrides(parse_config(args.config), args)
        if args.command == "simulate":
            certs, props = split_checks(cfg.checks)
            return _run(cfg, certs, props, args.out or Path("out"), source=args.config)
        if args.command == "certify":
            return _run(cfg, _requested(cfg, CERTIFICATE_CHECKS, DEFAULT_CERTIFICATES), [], args.out,
                        trajs=[], source=args.config)
        if args.command == "verify":
            trajs = [read_trajectory_csv(p) for p in args.csv] if args.csv else None
            if trajs and any(tr.states.shape[1] != cfg.network.n for tr in trajs):
                raise ConfigError("supplied CSV width does not match the network size")
            return _run(cfg, [], _requested(cfg, PROPERTY_CHECKS, DEFAULT_PROPERTIES), args.out,
                        trajs=trajs, source=args.config)
        if args.command == "equilibrium":
            net = cfg.network
            eq = solve_equilibrium(net, net.gains(cfg.t0), net.references(cfg.t0))
            print("v_bar: " + " ".join(repr(float(v)) for v in eq.v_bar))
            print(f"residual: {eq.residual:.3e}")
            print(f"interior: {eq.interior}")
            b_max = float(np.max(net.gains(cfg.t0) * net.references(cfg.t0)))
            return 0 if eq.interior and eq.residual <= 1e-10 * b_max else 1
    except (ConfigError, NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())

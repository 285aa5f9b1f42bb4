"""Decay of the l1 norm along the drive-free frozen system.

The drive-free field is quadratic, so the decay is algebraic, not
exponential. With S = sum(V), m the smallest and rho the largest
eigenvalue magnitude of the symmetric part of Psi, comparison with the
scalar ODE S' = -c S^2 gives

    S0 / (1 + rho S0 t)  <=  S(t)  <=  S0 / (1 + m S0 t / n).

The script integrates the fig2 network frozen at sigma and prints S(t)/S0
next to both envelopes, plus the time each envelope needs to reach a
target ratio.
"""
import argparse

import numpy as np

from lvdroop.config import parse_config
from lvdroop.network import interaction_matrix_coupled, split_parts
from lvdroop.sim import IntegratorSettings, integrate_frozen


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="fig2")
    ap.add_argument("--sigma", type=float, default=0.0)
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--target", type=float, default=1e-3)
    args = ap.parse_args()

    net = parse_config(args.config).network
    n = net.n
    M = interaction_matrix_coupled(net, net.relative_angles(args.sigma), net.gains(args.sigma))
    eig = np.linalg.eigvalsh(split_parts(M)[0].entries)
    m, rho = -eig[-1], -eig[0]
    V0 = np.ones(n)
    S0 = V0.sum()
    tr = integrate_frozen(net, args.sigma, V0, 0.0, args.t_end, IntegratorSettings(record_stride=0.5),
                          drift_only=True)

    print(f"symmetric-part spectrum in [{-rho:.4f}, {-m:.4f}]")
    print(f"{'t':>6} {'S/S0':>12} {'upper':>12} {'lower':>12}")
    for t, V in zip(tr.times, tr.states):
        print(f"{t:6.2f} {V.sum() / S0:12.4e} {1 / (1 + m * S0 * t / n):12.4e} {1 / (1 + rho * S0 * t):12.4e}")

    q = args.target
    t_fast = (1 / q - 1) / (rho * S0)
    t_slow = (1 / q - 1) / (m * S0 / n)
    print(f"\nreaching S/S0 = {q:g}: no earlier than t = {t_fast:.2f}, no later than t = {t_slow:.2f}")


if __name__ == "__main__":
    main()

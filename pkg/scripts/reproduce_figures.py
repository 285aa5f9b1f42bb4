"""Run the three bundled scenarios end to end and summarise the results.

    python scripts/reproduce_figures.py --out runs/
"""
import argparse
import json
import time
from pathlib import Path

from lvdroop.cli import main as cli_main
from lvdroop.config import read_trajectory_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("--figures", nargs="+", default=["fig4", "fig3", "fig2"])
    args = ap.parse_args()

    for fig in args.figures:
        out = args.out / fig
        start = time.perf_counter()
        code = cli_main(["reproduce", fig, "--out", str(out)])
        elapsed = time.perf_counter() - start
        bundle = json.loads((out / "bundle.json").read_text())
        print(f"== {fig}: exit {code}, {elapsed:.2f}s, all checks hold: {bundle['all_hold']}")
        for entry in bundle["trajectories"]:
            tr = read_trajectory_csv(out / entry["file"])
            final = ", ".join(f"{v:.6f}" for v in tr.final)
            print(f"   {entry['file']}: t_end={tr.times[-1]:g}, final=({final})")
        print()


if __name__ == "__main__":
    main()

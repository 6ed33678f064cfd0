#!/usr/bin/env python3
"""Sweep the per-slot displacement cap (the speed lever: cap = v_max * slot
length) and report how UAV speed and relay usage respond."""

import argparse
import csv
from pathlib import Path

from uavrelay.orchestrator import sweep
from uavrelay.scenario import Scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d-max", default="5,15,25,35,45",
                    help="comma-separated displacement caps in meters")
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--fading", default="mixed",
                    choices=("none", "rayleigh", "rician", "mixed"))
    ap.add_argument("--out", default="mobility_sweep.csv")
    args = ap.parse_args()

    values = [float(v) for v in args.d_max.split(",")]
    rows = sweep(Scenario(fading_model=args.fading), "d_max", values,
                 n_seeds=args.seeds, algorithms=("jmstp",))

    with Path(args.out).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)

    print(f"{'d_max':>6} {'avg_speed':>10} {'relay_ues':>10} {'sum_rate':>9}")
    for row in rows:
        print(f"{row['value']:6.1f} {row['avg_speed']:10.3f}"
              f" {row['n_relay_ues']:10.3f} {row['sum_rate']:9.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

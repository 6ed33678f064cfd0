#!/usr/bin/env python3
"""Two-cluster dwell times: does the UAV spend more time over the larger
cluster, and does the split track the cluster-size ratio?"""

import argparse

import numpy as np

from uavrelay.orchestrator import cluster_scenario, dwell_times, run_episode

CENTROIDS = [(250.0, 0.0), (-250.0, 0.0)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="5:2,4:2,3:2",
                    help="comma-separated N_A:N_B cluster sizes")
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--slots", type=int, default=20)
    ap.add_argument("--d-max", type=float, default=25.0)
    args = ap.parse_args()

    print(f"{'N_A':>4} {'N_B':>4} {'T_A':>7} {'T_B':>7} {'T_B/T_A':>8}")
    for pair in args.sizes.split(","):
        n_a, n_b = (int(x) for x in pair.split(":"))
        t = np.zeros(2)
        for seed in range(args.seeds):
            sc = cluster_scenario(n_a, n_b, seed=seed, n_slots=args.slots,
                                  d_max=args.d_max, fading_model="mixed")
            t += dwell_times(run_episode(sc, "jmstp"), CENTROIDS)
        t /= args.seeds
        print(f"{n_a:4d} {n_b:4d} {t[0]:7.2f} {t[1]:7.2f} {t[1] / t[0]:8.4f}")


if __name__ == "__main__":
    main()

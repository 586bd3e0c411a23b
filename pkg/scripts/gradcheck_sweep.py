"""Finite-difference error of every analytic gradient as a function of the step h.

Central differences trade truncation error (O(h^2)) against round-off (O(eps/h));
this prints the worst relative error per loss over a log-spaced grid of h.
"""
import argparse

import numpy as np

from stereodist.cli import gradcheck_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--seeds", type=int, default=1, help="repeat over this many consecutive seeds")
    args = ap.parse_args()

    steps = np.logspace(-3, -8, 11)
    worst = {}
    for h in steps:
        for seed in range(args.seed, args.seed + args.seeds):
            for label, t, rep in gradcheck_rows(args.n, 32, seed, h):
                key = f"{label} t={t:g}"
                worst.setdefault(key, {})
                worst[key][h] = max(worst[key].get(h, 0.0), rep.max_rel_err)
    print(f"{'loss':<26}" + "".join(f"{h:>10.0e}" for h in steps))
    for key, row in worst.items():
        print(f"{key:<26}" + "".join(f"{row[h]:>10.1e}" for h in steps))
    overall = {h: max(r[h] for r in worst.values()) for h in steps}
    print(f"{'worst':<26}" + "".join(f"{overall[h]:>10.1e}" for h in steps))
    best = min(overall, key=overall.get)
    print(f"\nsmallest worst-case error at h={best:.0e}")


if __name__ == "__main__":
    main()

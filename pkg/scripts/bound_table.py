#!/usr/bin/env python3
"""Print the generalization / approximation / statistical error bounds over a
sample-size sweep for each standard family."""

import argparse
import math

from randcrf import parse_family_list, space
from randcrf.bounds import BOUND_TABLE_HEADER, bound_table


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--families", default="tree,dag,set")
    ap.add_argument("--m", default="25,100,400,1600")
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--l1", type=float, default=0.0)
    args = ap.parse_args()

    ms = [int(v) for v in args.m.split(",")]
    for family in parse_family_list(args.families):
        d = family.feature_dim
        grid = {
            "d": [d],
            "s": [math.ceil(math.sqrt(d))],
            "m": ms,
            "n": [math.ceil(math.sqrt(m)) for m in ms[:1]] or [10],
            "r": [space(family).size],
            "delta": [args.delta],
            "l1": [args.l1],
        }
        print(f"\n== {family}")
        print("  ".join(h.rjust(14) for h in BOUND_TABLE_HEADER))
        for row in bound_table(grid):
            cells = [f"{v:.6g}" if isinstance(v, float) else str(v) for v in row]
            print("  ".join(c.rjust(14) for c in cells))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

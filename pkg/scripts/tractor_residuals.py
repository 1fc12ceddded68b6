"""Emit the tractor connection and curvature residuals as JSON lines."""

import argparse

from cpnxray.tractors import residual_jsonl, residual_table


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, nargs="+", default=[2, 3])
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    for n in args.n:
        print(residual_jsonl(residual_table(n, args.points, args.seed)))


if __name__ == "__main__":
    main()

"""Print the Heisenberg cohomology dimension table as JSON keyed by n, ell and degree."""

import argparse

from cpnxray.cohomology import dimension_table_json


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--pairs", default="2:1,2:2,3:1,3:2", help="comma separated n:ell pairs")
    args = p.parse_args()
    pairs = tuple(tuple(int(x) for x in item.split(":")) for item in args.pairs.split(","))
    print(dimension_table_json(pairs))


if __name__ == "__main__":
    main()

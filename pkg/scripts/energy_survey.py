"""Energies of generated fields over sampled closed geodesics, one JSON line per geodesic."""

import argparse

from cpnxray import xray
from cpnxray.fields import FieldSpec, generate


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--record", default="kind=potential space=CP n=2 valence=2 seed=1", help="field spec record")
    p.add_argument("--geodesics", type=int, default=10)
    p.add_argument("--N", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    spec = FieldSpec.from_record(args.record)
    omega = generate(spec)
    for gam in xray.sample_geodesics(omega.space, args.geodesics, args.seed):
        print(xray.energy_report(omega, gam, args.N, args.seed).to_json())


if __name__ == "__main__":
    main()

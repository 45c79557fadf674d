"""Regenerate the scattering phase-shift golden table (M = 13, U = 50 gamma0).

Usage: python scripts/phase_shift_golden.py [OUT] [--U 50] [--M 13]
"""
import argparse

from boundpair.artifacts import metadata, write_csv
from boundpair.eigen import phase_shift_table
from boundpair.model import ModelParams

COLUMNS = ["ell_K", "band", "Ka", "p_re", "p_im", "delta", "modulus", "re_E", "im_E", "residual"]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="tests/data/phase_shifts_M13_U50.csv")
    ap.add_argument("--M", type=int, default=13)
    ap.add_argument("--U", type=float, default=50.0)
    args = ap.parse_args(argv)
    params = ModelParams(M=args.M, U=args.U)
    rows = phase_shift_table(params, params.rates())
    write_csv(args.out, metadata(params, table="phase_shifts"), COLUMNS, [[r[c] for c in COLUMNS] for r in rows])


if __name__ == "__main__":
    main()

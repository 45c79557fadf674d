"""K = 0 bound-state emission pattern versus lambda/a, with peak bookkeeping."""
import sys

import numpy as np

from boundpair import farfield as ff
from boundpair.model import ModelParams

RATIOS = np.round(np.linspace(0.1, 1.0, 10), 10)


def main(out="pattern_vs_wavelength.csv"):
    betas = np.radians(np.linspace(-90, 90, 3601))
    with open(out, "w") as fh:
        fh.write("lambda_ratio,beta_deg,value\n")
        for lr in RATIOS:
            p = ModelParams(lambda_at=float(lr))
            vals = ff.pattern_closed_form(p, 0.0, betas)
            for b, v in zip(betas, vals):
                fh.write(f"{lr:.12g},{np.degrees(b):.12g},{v:.12g}\n")
            peaks = ff.peak_positions(np.sin(betas), vals)
            print(f"lambda/a = {lr:.1f}: {len(peaks)} peaks at sin(beta) = {np.round(peaks, 3)}")


if __name__ == "__main__":
    main(*sys.argv[1:2])

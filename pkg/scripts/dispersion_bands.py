"""Two-excitation dispersion (exact energies) and the bound-band detachment gap."""
import sys

import numpy as np

from boundpair.cli import cmd_dispersion
from boundpair.config import RunConfig
from boundpair.model import ModelParams


def main(out="dispersion_bands.csv", M=21):
    cfg = RunConfig(model=ModelParams(M=M), out=out).with_modes(mode="exact")
    text = cmd_dispersion(cfg)
    rows = [line.split(",") for line in text.splitlines() if line and not line.startswith(("#", "band"))]
    re_b = np.array([float(r[4]) for r in rows if r[0] == "bound"])
    re_s = np.array([float(r[4]) for r in rows if r[0] == "scattering"])
    rates = cfg.model.rates()
    print(f"min gap {np.abs(re_b[:, None] - re_s[None, :]).min():.4f} gamma0, "
          f"U - 2|Gamma1| = {cfg.model.U - 2 * abs(rates.Gamma1):.4f}")


if __name__ == "__main__":
    main(*sys.argv[1:2])

"""Pumped-spin-wave occupation N_kP / Xi against Xi: closed form, linear solve and RK4."""
import numpy as np

from boundpair import dynamics as dy
from boundpair.model import ModelParams


def main():
    p = ModelParams(M=7)
    levels = dy.build_levels(p)
    print("Xi        closed     linear     ode        max|closed-linear|/Xi^3")
    for xi in (0.002, 0.005, 0.01, 0.02, 0.05):
        d = dy.make_drive(p, xi, 0.0)
        kp = 1 + d.kP_ell
        vals = {m: dy.steady_state_occupations(levels, d, m).values for m in ("closed", "linear", "ode")}
        dev = np.abs(vals["closed"] - vals["linear"]).max() / xi**3
        print(f"{xi:<9} {vals['closed'][kp] / xi:.6f}  {vals['linear'][kp] / xi:.6f}  "
              f"{vals['ode'][kp] / xi:.6f}  {dev:.3f}")


if __name__ == "__main__":
    main()

"""Command-line front end.

Every command reads an INI run configuration (defaults if none is given),
writes one CSV artifact with a metadata header, and maps error classes to
exit codes: 2 config, 3 physics precondition, 4 validation failure, 5 I/O.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
import warnings

import numpy as np

from . import dynamics as dy
from . import farfield as ff
from .artifacts import metadata, ordered_map, write_csv
from .config import RunConfig, load_config
from .eigen import approx_detuning, bound_state, sector_states, single_exc_state
from .geometry import DetectorGeometry, dipole_pattern
from .model import ConfigError, PhysicsError, build_hamiltonian, grid_index, zone_grid
from .validation import run_validation

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_VALIDATION, EXIT_IO = 0, 2, 3, 4, 5


def _meta(cfg: RunConfig, command: str, **extra) -> dict:
    m = cfg.modes
    return metadata(cfg.model, command=command, mode=m.mode, bs=m.bs, lattice=m.lattice, **extra)


def _betas(cfg: RunConfig) -> np.ndarray:
    s = cfg.sweep
    if s.variable == "bragg":
        return ff.bragg_angles(cfg.model, "single")
    return np.radians(np.linspace(s.start, s.stop, s.steps))


def cmd_dispersion(cfg: RunConfig) -> str:
    """Re/Im of single, scattering and bound energies (units of gamma0, offset-free)."""
    p, rates, g = cfg.model, cfg.model.rates(), cfg.model.gamma0
    approx = cfg.modes.mode == "approx"
    h2 = build_hamiltonian(p, rates, 2)
    rows = []
    for ell, k in enumerate(zone_grid(p.M)):
        e = approx_detuning(p, "single") if approx else single_exc_state(p, rates, ell).detuning
        rows.append(("single", ell, k, "", e.real / g, e.imag / g))
    for ell, K in enumerate(zone_grid(p.M)):
        for s in sector_states(p, rates, K, h2):
            if s.kind != "scattering":
                continue
            e = approx_detuning(p, "scattering") if approx else s.detuning
            rows.append(("scattering", ell, K, s.p.real if s.p is not None else "", e.real / g, e.imag / g))
        try:
            e = bound_state(p, rates, K).detuning
        except PhysicsError:
            continue
        if approx:
            e = approx_detuning(p, "bound")
        rows.append(("bound", ell, K, "", e.real / g, e.imag / g))
    return write_csv(cfg.out, _meta(cfg, "dispersion"), ["band", "ell", "ka", "p_re", "re_E", "im_E"], rows)


def cmd_pattern(cfg: RunConfig) -> str:
    """Bound-state emission pattern over (lambda/a, beta) at the configured K and t_ret.

    The ideal lattice treats the detected wavenumber as continuous, which is
    the infinite-chain limit of the pattern; ``finite`` uses the explicit sum.
    """
    s, r = cfg.sweep, cfg.run
    betas = np.radians(np.linspace(s.start, s.stop, s.steps))
    ratios = np.linspace(s.lambda_start, s.lambda_stop, s.lambda_steps)

    def one(lr):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = cfg.model.replace(lambda_at=float(lr) * cfg.model.a)
        if cfg.modes.lattice == "ideal":
            vals = ff.pattern_closed_form(p, r.K, betas, r.t_ret)
        else:
            vals = ff.intensity_pattern(p, r.K, betas, [r.t_ret], lattice="finite", bs=cfg.modes.bs,
                                        integrator="closed").values[:, 0]
        return [(lr, np.degrees(b), v) for b, v in zip(betas, np.ravel(vals))]

    rows = [row for chunk in ordered_map(one, ratios, r.threads) for row in chunk]
    text = write_csv(cfg.out, _meta(cfg, "pattern", K=r.K, t_ret=r.t_ret), ["lambda_ratio", "beta_deg", "value"], rows)
    if r.pattern3d and cfg.out not in (None, "-"):
        write_csv(_suffix(cfg.out, "_3d"), _meta(cfg, "pattern3d", K=r.K), ["theta_deg", "phi_deg", "value"],
                  _pattern3d(cfg))
    return text


def _suffix(path: str, tag: str) -> str:
    stem, dot, ext = path.rpartition(".")
    return f"{stem}{tag}.{ext}" if dot else path + tag


def _pattern3d(cfg: RunConfig) -> list:
    """Pattern weighted by the dipole factor r^2 |w|^2 over the sphere."""
    p, K = cfg.model, cfg.run.K
    rows = []
    for theta in np.linspace(0, 180, 37):
        for phi in np.linspace(-180, 180, 73):
            th, ph = np.radians(theta), np.radians(phi)
            # theta measured from the chain axis y
            beta = np.pi / 2 - th
            geo = DetectorGeometry(float(beta), float(ph), 1.0)
            w2, _ = dipole_pattern(geo)
            val = ff.pattern_closed_form(p, K, beta, cfg.run.t_ret)
            rows.append((theta, phi, float(np.ravel(val)[0]) * w2))
    return rows


def cmd_decay(cfg: RunConfig) -> str:
    """Spontaneous emission of the bound state at K: RK4 trajectory plus closed-form deviation."""
    p, r = cfg.model, cfg.run
    levels = dy.build_levels(p, mode=cfg.modes.mode, bs=cfg.modes.bs)
    ell = grid_index(p.M, r.K)
    if ell is None or levels.bound_index(ell) is None:
        raise PhysicsError(f"no bound level at K = {r.K}")
    rho0 = dy.pure_state(levels, levels.labels[levels.bound_index(ell)])
    ts = np.linspace(0, r.t_end, r.samples)
    traj = dy.integrate_master_equation(rho0, levels, t_end=r.t_end, dt=r.dt, times=ts)
    closed = dy.spontaneous_emission_closed_form(rho0, ts)
    dev = np.abs(traj.rho - closed).reshape(len(ts), -1).max(axis=1)
    pops = traj.populations
    cols = ["t_gamma0"] + [f"pop_{lab}" for lab in levels.labels] + ["closed_form_dev"]
    rows = [(t * p.gamma0, *pop, d) for t, pop, d in zip(ts, pops, dev)]
    return write_csv(cfg.out, _meta(cfg, "decay", K=r.K), cols, rows)


def cmd_steady(cfg: RunConfig) -> str:
    p = cfg.model
    levels = dy.build_levels(p, mode=cfg.modes.mode, bs=cfg.modes.bs)
    drive = dy.make_drive(p, cfg.drive.pump_rate, np.radians(cfg.drive.beta_exc_deg))
    closed = dy.steady_state_occupations(levels, drive, "closed").values
    linear = dy.steady_state_occupations(levels, drive, "linear").values
    ode = dy.steady_state_occupations(levels, drive, "ode", t_end=60 / p.gamma0, dt=cfg.run.dt).values
    rows = [(lab, levels.n_exc[i], levels.ell[i], levels.ka[i] if i else "", closed[i], linear[i], ode[i])
            for i, lab in enumerate(levels.labels)]
    meta = _meta(cfg, "steady", Xi=drive.Xi, kP=drive.kP, kP_snap_distance=drive.snap_distance)
    return write_csv(cfg.out, meta, ["level", "n_exc", "ell", "ka", "closed", "linear", "ode"], rows)


def cmd_spectrum(cfg: RunConfig) -> str:
    p = cfg.model
    levels = dy.build_levels(p, mode=cfg.modes.mode, bs=cfg.modes.bs)
    drive = dy.make_drive(p, cfg.drive.pump_rate, np.radians(cfg.drive.beta_exc_deg))
    betas = _betas(cfg)
    chunks = np.array_split(betas, max(1, cfg.run.threads))
    samples = [s for c in ordered_map(lambda b: ff.emission_spectrum_ratio(p, drive, b, levels), chunks,
                                      cfg.run.threads) for s in c]
    closed = ff.spectrum_closed_form(p, drive, betas)
    rows = [(np.degrees(s.beta), s.q, s.ratio, c, s.allowed) for s, c in zip(samples, closed)]
    meta = _meta(cfg, "spectrum", Xi=drive.Xi, kP=drive.kP)
    return write_csv(cfg.out, meta, ["beta_deg", "q", "ratio", "closed_tight", "allowed"], rows)


def cmd_extract(cfg: RunConfig) -> str:
    p = cfg.model
    levels = dy.build_levels(p, mode=cfg.modes.mode, bs=cfg.modes.bs)
    drive = dy.make_drive(p, cfg.drive.pump_rate, np.radians(cfg.drive.beta_exc_deg))
    ex = ff.extract_momentum_distribution(p, drive, _betas(cfg), levels)
    state = levels.twos[levels.bound_index(grid_index(p.M, 2 * drive.kP)) - 1 - p.M]
    ref = state.momentum_distribution(ex.q)
    rows = [(np.degrees(b), q, v, r) for b, q, v, r in zip(ex.beta, ex.q, ex.values, ref)]
    meta = _meta(cfg, "extract", kP=drive.kP, coverage=ex.coverage)
    return write_csv(cfg.out, meta, ["beta_deg", "q", "value", "reference"], rows)


def cmd_validate(cfg: RunConfig) -> int:
    results = run_validation(cfg.model, cfg.modes.mode, cfg.drive.pump_rate / cfg.model.gamma0,
                             np.radians(cfg.drive.beta_exc_deg))
    for res in results:
        print(res.line())
    return EXIT_VALIDATION if any(r.status == "FAIL" for r in results) else EXIT_OK


COMMANDS = {
    "dispersion": cmd_dispersion,
    "pattern": cmd_pattern,
    "decay": cmd_decay,
    "steady": cmd_steady,
    "spectrum": cmd_spectrum,
    "extract": cmd_extract,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boundpair", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--out", help="output CSV path ('-' for stdout)")
        sp.add_argument("--mode", choices=dy.MODES)
        sp.add_argument("--bs", choices=dy.BS_MODES)
        sp.add_argument("--lattice", choices=ff.LATTICES)
        sp.add_argument("--threads", type=int)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = cfg.with_modes(mode=args.mode, bs=args.bs, lattice=args.lattice)
    if args.out is not None:
        cfg = cfg.replace(out=args.out)
    if args.threads is not None:
        cfg = cfg.replace(run=dataclasses.replace(cfg.run, threads=args.threads))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        result = COMMANDS[args.command](cfg)
        return result if isinstance(result, int) else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsError as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Optical observables: Bragg directions, emission pattern, spectrum, extraction.

Public values are pre-normalised: the pattern is G1 / (4 xi^2 |w|^2) and the
spectrum ratio carries the |d|^2/r^2 / |w|^2 factor, so neither xi nor the
dipole strength ever appears.

Two lattice treatments are available.  ``ideal`` keeps the Kronecker deltas
of the infinite lattice sum, so a direction contributes only if its detected
wavenumber lies on the zone grid.  ``finite`` forms the explicit operator
``sum_n exp(-i mu n) sigma_n`` and gives Dirichlet-kernel peaks of width ~1/M.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .dynamics import (
    DriveParams,
    LevelScheme,
    build_levels,
    correlator_branches,
    integrate_master_equation,
    pure_state,
    reference_elevation,
    spontaneous_emission_closed_form,
    steady_state_occupations,
)
from .eigen import build_hamiltonian, collective_lowering, single_exc_state
from .geometry import DetectorGeometry, detected_wavenumber, dipole_pattern, photon_transfer
from .model import TWOPI, ConfigError, ModelParams, PhysicsError, fold, grid_index, zone_grid

LINES = ("single", "bound", "scattering")
LATTICES = ("ideal", "finite")
SPECTRUM_WINDOW = 8.0  # units of 1/gamma0
SPECTRUM_STEP = 1.0 / 200.0


class WindowTooShortError(PhysicsError):
    pass


# --- Bragg directions -------------------------------------------------------


def bragg_solutions(params: ModelParams, transfer: float) -> np.ndarray:
    """All beta in [-pi/2, pi/2] whose detected wavenumber equals ``transfer`` mod 2 pi."""
    lr = params.lambda_ratio
    base = fold(transfer) / TWOPI
    m_max = int(np.ceil(1.0 / lr)) + 1
    s = lr * (base + np.arange(-m_max, m_max + 1))
    s = s[np.abs(s) <= 1.0 + 1e-12]
    return np.arcsin(np.clip(s, -1.0, 1.0))


def bragg_angles(params: ModelParams, line: str = "single", K: float = 0.0, k: float | None = None) -> np.ndarray:
    """Allowed emission elevations for a transition class.

    ``single``: photon carries the spin-wave momentum k.  ``bound`` or
    ``scattering``: a pair at K leaves a spin wave at k, photon carries K - k.
    With ``k=None`` the union over all grid k is returned.
    """
    if line not in LINES:
        raise ConfigError(f"line must be one of {LINES}")
    ks = zone_grid(params.M) if k is None else [k]
    out = []
    for kk in ks:
        transfer = kk if line == "single" else K - kk
        out.append(bragg_solutions(params, transfer))
    betas = np.concatenate(out) if out else np.empty(0)
    return np.unique(np.round(betas, 14))


def bragg_allowed(params: ModelParams, beta) -> np.ndarray:
    kbar = np.atleast_1d(detected_wavenumber(params, beta))
    return np.array([grid_index(params.M, x) is not None for x in kbar])


# --- emission pattern ---------------------------------------------------------


def pattern_closed_form(params: ModelParams, K: float, beta, t_ret=0.0):
    """Tight-limit pattern cos^2(K/2 - mu) exp(-gamma0 t); shape (beta,) + shape(t)."""
    mu = photon_transfer(params, np.asarray(beta, dtype=float))
    t = np.asarray(t_ret, dtype=float)
    return np.multiply.outer(np.cos(K / 2 - mu) ** 2, np.exp(-params.gamma0 * t))


def _lab(levels: LevelScheme, rho: np.ndarray, t: np.ndarray) -> np.ndarray:
    c = levels.carrier
    phase = np.exp(-1j * np.multiply.outer(t, np.subtract.outer(c, c)))
    return rho * phase


def pattern_from_rho(levels: LevelScheme, rho: np.ndarray, t, beta) -> np.ndarray:
    """Ideal-lattice pattern from a density-matrix trajectory, shape (beta, t).

    The photon selects the spin wave at k-bar and, in every pair sector K,
    the transition to k = K - k-bar weighted by the pair's relative-momentum
    amplitude.  Directions off the zone grid give zero.
    """
    params, M = levels.params, levels.M
    rho = _lab(levels, rho, np.asarray(t, dtype=float))
    betas = np.atleast_1d(beta)
    out = np.zeros((len(betas), rho.shape[0]))
    off = 1 + M
    for b, kbar in enumerate(np.atleast_1d(detected_wavenumber(params, betas))):
        lk = grid_index(M, kbar)
        if lk is None:
            continue
        val = rho[:, 1 + lk, 1 + lk].real.copy()
        for ell_K, K in enumerate(zone_grid(M)):
            idx = levels.sector(ell_K)
            if not idx:
                continue
            v = np.array([levels.twos[i - off].eta_bar(levels.twos[i - off].K / 2 - (K - kbar)) for i in idx])
            block = rho[:, idx][:, :, idx]
            val += np.einsum("i,tij,j->t", v, block, v.conj()).real
        out[b] = 0.25 * M * val
    return out


def _eigenvector_blocks(levels: LevelScheme):
    params = levels.params
    h1 = build_hamiltonian(params, levels.rates, 1)
    h2 = build_hamiltonian(params, levels.rates, 2)
    A1 = np.array([single_exc_state(params, levels.rates, l).amplitudes for l in range(levels.M)]).T
    A2 = np.array([s.pair_vector(params, h2.basis) for s in levels.twos]).T
    return h1.basis, h2.basis, A1, A2


def lowering_operator(levels: LevelScheme, mu: float, blocks=None) -> np.ndarray:
    """sum_n exp(-i mu n) sigma_n in the level basis (finite lattice)."""
    params, M = levels.params, levels.M
    basis1, basis2, A1, A2 = _eigenvector_blocks(levels) if blocks is None else blocks
    site = np.exp(-1j * mu * params.sites)
    C = np.sqrt(M) * collective_lowering(params, mu, basis1, basis2)
    L = np.zeros((levels.D, levels.D), dtype=complex)
    L[0, levels.singles] = site @ A1
    L[levels.singles, levels.pairs] = A1.conj().T @ C @ A2
    return L


def pattern_finite_lattice(levels: LevelScheme, rho: np.ndarray, t, beta) -> np.ndarray:
    """tr(L rho L^dag) / 4 with the explicit lattice sum, shape (beta, t)."""
    rho = _lab(levels, rho, np.asarray(t, dtype=float))
    betas = np.atleast_1d(beta)
    blocks = _eigenvector_blocks(levels)
    out = np.zeros((len(betas), rho.shape[0]))
    for b, mu in enumerate(photon_transfer(levels.params, betas)):
        L = lowering_operator(levels, float(mu), blocks)
        out[b] = 0.25 * np.einsum("ij,tjk,ik->t", L, rho, L.conj()).real
    return out


@dataclass(frozen=True)
class PatternResult:
    beta: np.ndarray
    t: np.ndarray
    values: np.ndarray  # (beta, t)
    allowed: np.ndarray  # per beta


def intensity_pattern(
    params: ModelParams,
    K: float,
    beta,
    t_ret,
    method: str = "dynamics",
    bs: str = "tight",
    lattice: str = "ideal",
    integrator: str = "ode",
    dt: float = 0.01,
    levels: LevelScheme | None = None,
) -> PatternResult:
    """Emission pattern G1/(4 xi^2 |w|^2) after preparing the bound state at K.

    ``method='closed'`` is the tight-limit formula; ``'dynamics'`` evaluates
    the lattice sum from a density-matrix trajectory (RK4 with
    ``integrator='ode'``, otherwise the closed-form solution).
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    t = np.atleast_1d(np.asarray(t_ret, dtype=float))
    if lattice not in LATTICES:
        raise ConfigError(f"lattice must be one of {LATTICES}")
    allowed = bragg_allowed(params, beta) if lattice == "ideal" else np.ones(len(beta), bool)
    if method == "closed":
        vals = pattern_closed_form(params, K, beta, t)
        if lattice == "ideal":
            vals = np.where(allowed[:, None], vals, 0.0)
        return PatternResult(beta, t, vals, allowed)
    if method != "dynamics":
        raise ValueError(f"unknown method {method!r}")
    if levels is None:
        levels = build_levels(params, mode="approx", bs=bs, include_scattering=False)
    ell_K = grid_index(params.M, K)
    if ell_K is None or levels.bound_index(ell_K) is None:
        raise PhysicsError(f"no bound level at Ka = {K}")
    rho0 = pure_state(levels, levels.labels[levels.bound_index(ell_K)])
    order = np.argsort(t)
    if integrator == "ode":
        traj = integrate_master_equation(rho0, levels, None, t_end=float(t.max()), dt=dt, times=t[order])
        rho = np.empty_like(traj.rho)
        rho[order] = traj.rho
    else:
        rho = spontaneous_emission_closed_form(rho0, t)
    fn = pattern_from_rho if lattice == "ideal" else pattern_finite_lattice
    return PatternResult(beta, t, fn(levels, rho, t, beta), allowed)


def peak_positions(x: np.ndarray, y: np.ndarray, rel_height: float = 0.5) -> np.ndarray:
    """Local maxima (endpoints included) above rel_height * max(y)."""
    y = np.asarray(y)
    pad = np.concatenate([[-np.inf], y, [-np.inf]])
    is_peak = (pad[1:-1] >= pad[:-2]) & (pad[1:-1] >= pad[2:]) & (y > rel_height * y.max())
    idx = np.flatnonzero(is_peak)
    # merge plateaus
    keep = [i for j, i in enumerate(idx) if j == 0 or i != idx[j - 1] + 1]
    return np.asarray(x)[keep]


def peak_width(x: np.ndarray, y: np.ndarray, x0: float) -> float:
    """Full width at half maximum of the peak nearest x0 (linear interpolation)."""
    x, y = np.asarray(x), np.asarray(y)
    i0 = int(np.argmin(np.abs(x - x0)))
    half = 0.5 * y[i0]
    lo = i0
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = i0
    while hi < len(y) - 1 and y[hi] > half:
        hi += 1

    def cross(a, b):
        if y[a] == y[b]:
            return x[a]
        return x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a])

    return float(cross(hi - 1, hi) - cross(lo, lo + 1))


# --- spectrum -----------------------------------------------------------------


def _half_line_transform(amplitude, freq, rate, omega, window, step) -> float:
    """2 Re int_0^inf A exp((i(omega - f) - g) tau) dtau by Simpson plus exact tail."""
    n = int(round(window / step))
    tau = np.linspace(0.0, window, n + 1)
    z = 1j * (omega - freq) - rate
    body = simpson(amplitude * np.exp(z * tau), x=tau)
    tail = -amplitude * np.exp(z * window) / z
    return float(2.0 * (body + tail).real)


def spectrum_value(corr, omega: float, method: str = "quadrature", window: float = SPECTRUM_WINDOW,
                   step: float = SPECTRUM_STEP, gamma0: float = 1.0) -> float:
    """Bound-branch spectrum at omega (measured from omega0)."""
    if corr.bound is None:
        return 0.0
    b = corr.bound
    if method == "closed":
        z = 1j * (omega - b.freq) - b.rate
        return float(2.0 * (-b.amplitude / z).real)
    if window * gamma0 < SPECTRUM_WINDOW - 1e-12:
        raise WindowTooShortError(f"window {window} shorter than {SPECTRUM_WINDOW}/gamma0")
    return _half_line_transform(b.amplitude, b.freq, b.rate, omega, window, step)


@dataclass(frozen=True)
class SpectrumSample:
    beta: float
    q: float
    ratio: float
    allowed: bool


def spectrum_closed_form(params: ModelParams, drive: DriveParams, beta):
    """Tight-limit signature cos^2(k_P - mu)."""
    return np.cos(drive.kP - photon_transfer(params, np.asarray(beta, dtype=float))) ** 2


def emission_spectrum_ratio(
    params: ModelParams,
    drive: DriveParams,
    beta,
    levels: LevelScheme | None = None,
    method: str = "quadrature",
    phi: float = 0.0,
    r: float = 1e6,
    beta_ref: float | None = None,
    continuum: bool = False,
    window: float = SPECTRUM_WINDOW,
    step: float = SPECTRUM_STEP,
) -> list[SpectrumSample]:
    """S(beta, U)/S(beta_ref, U) times |d|^2/r^2 / |w|^2 for each beta.

    The reported q is measured from K/2 of the pumped pair sector.

    The reference detector sits in the y-z plane at the elevation whose
    detected wavenumber is k_P.  Only the bound branch is transformed; it is
    the sole branch with its carrier at omega0 + U.
    """
    if levels is None:
        levels = build_levels(params, mode="approx", bs="tight")
    occ = steady_state_occupations(levels, drive)
    omega = params.U
    beta_ref = reference_elevation(params, drive) if beta_ref is None else beta_ref
    ref = correlator_branches(levels, drive, DetectorGeometry(beta_ref, 0.0, r), occ, continuum)
    s_ref = spectrum_value(ref, omega, method, window, step, params.gamma0)
    if s_ref <= 0:
        raise PhysicsError("reference direction carries no bound-state emission")
    half_K = float(fold(2 * drive.kP)) / 2
    out = []
    for b in np.atleast_1d(beta):
        geo = DetectorGeometry(float(b), phi, r)
        w2, _ = dipole_pattern(geo)
        corr = correlator_branches(levels, drive, geo, occ, continuum)
        q = float(fold(corr.kbar - half_K))
        if not corr.allowed or w2 == 0:
            out.append(SpectrumSample(float(b), q, 0.0, False))
            continue
        s = spectrum_value(corr, omega, method, window, step, params.gamma0)
        out.append(SpectrumSample(float(b), q, s / s_ref * (1.0 / r**2) / w2, True))
    return out


# --- momentum-distribution extraction -------------------------------------------


@dataclass(frozen=True)
class Extraction:
    q: np.ndarray
    values: np.ndarray
    beta: np.ndarray
    coverage: float
    eta0_sq: float


def zone_coverage(M: int, q, continuum: bool = False, bins: int = 64) -> float:
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        return 0.0
    if not continuum:
        hit = {grid_index(M, x) for x in q} - {None}
        return len(hit) / M
    idx = np.floor((fold(q) + np.pi) / TWOPI * bins).astype(int) % bins
    return len(set(idx.tolist())) / bins


def extract_momentum_distribution(
    params: ModelParams,
    drive: DriveParams,
    beta_sweep,
    levels: LevelScheme | None = None,
    method: str = "quadrature",
    continuum: bool = False,
    bins: int = 64,
) -> Extraction:
    """Reconstruct |eta(q)|^2 of the bound state from the spectrum-ratio sweep.

    Each allowed direction gives q = k-bar - K/2 for the folded pair momentum
    K = 2 k_P, and the ratio times the weight at the reference direction.
    That reference sits at q = 0 unless folding 2 k_P shifted K/2 by pi.
    """
    if levels is None:
        levels = build_levels(params, mode="approx", bs="tight")
    ell_K = grid_index(params.M, 2 * drive.kP)
    bi = levels.bound_index(ell_K)
    if bi is None:
        raise PhysicsError("no bound state in the pumped sector")
    state = levels.twos[bi - 1 - params.M]
    eta0 = float(abs(state.eta_bar(fold(drive.kP - state.K / 2))) ** 2)
    samples = emission_spectrum_ratio(params, drive, beta_sweep, levels, method, continuum=continuum)
    kept = [s for s in samples if s.allowed]
    q = np.array([s.q for s in kept])
    vals = np.array([s.ratio for s in kept]) * eta0
    beta = np.array([s.beta for s in kept])
    # coverage counted on the detected wavenumbers, which sit on the grid
    kbar = fold(q + state.K / 2)
    return Extraction(q, vals, beta, zone_coverage(params.M, kbar, continuum, bins), eta0)

"""Analytic one- and two-excitation eigenstates and the numerical oracle.

Two-excitation states are written as a centre-of-mass plane wave times a
relative wavefunction ``psi[x-1]`` for relative distance ``x = 1..N/2``.
On the periodic ring the relative coordinate is taken as the minimal image,
and ``psi`` is normalised so that the pair amplitudes ``A_{n1<n2}`` have unit
norm.  Momenta are in units of 1/a.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import (
    DEFAULT_MAX_DIM,
    ComplexRates,
    ModelParams,
    PhysicsError,
    SubspaceHamiltonian,
    bloch_wavenumber,
    build_hamiltonian,
    grid_index,
    zone_grid,
)


class BoundStateError(PhysicsError):
    """The bound-state formula does not apply (|alpha_K| >= 1 or U == 0)."""


class OracleError(PhysicsError):
    """Numerical diagonalisation failed or residuals exceed tolerance."""


class FitError(PhysicsError):
    """An eigenvector is not of the assumed scattering form."""


@dataclass(frozen=True)
class SingleExcState:
    ell: int
    ka: float
    amplitudes: np.ndarray
    detuning: complex  # E - omega0
    omega0: float

    @property
    def energy(self) -> complex:
        return self.omega0 + self.detuning


@dataclass(frozen=True)
class TwoExcState:
    M: int
    K: float
    kind: str  # "bound" or "scattering"
    psi: np.ndarray
    detuning: complex  # E - 2*omega0
    omega0: float
    p: complex | None = None
    alpha: complex | None = None
    tight: bool = False
    ell_K: int | None = None

    @property
    def energy(self) -> complex:
        return 2 * self.omega0 + self.detuning

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def eta_bar(self, q):
        """Relative-momentum amplitude; q is measured from K/2 of this state."""
        x = np.arange(1, len(self.psi) + 1)
        q = np.asarray(q, dtype=float)
        return (2.0 / np.sqrt(self.M)) * (np.cos(np.multiply.outer(q, x)) @ self.psi)

    def momentum_distribution(self, q):
        if abs(self.norm - 1.0) > 1e-9:
            raise ValueError(f"state not normalised (|psi| = {self.norm})")
        return np.abs(self.eta_bar(q)) ** 2

    def pair_vector(self, params: ModelParams, basis=None) -> np.ndarray:
        """Amplitudes over unordered pairs, ordered like ``basis``."""
        if basis is None:
            basis = build_hamiltonian(params, params.rates(), 2).basis
        vec = _relative_basis(params, self.K, basis) @ self.psi
        if params.boundary == "open":
            vec = vec / np.linalg.norm(vec)
        return vec


@dataclass(frozen=True)
class BranchingTable:
    K: float
    kind: str
    ks: np.ndarray
    b: np.ndarray
    total_rate: float

    @property
    def partial_rates(self) -> np.ndarray:
        return self.b * self.total_rate


# --- dispersion relations ---------------------------------------------------


def single_exc_detuning(rates: ComplexRates, ka):
    return -0.5j * rates.Gamma0 - 1j * rates.Gamma1 * np.cos(ka)


def scattering_detuning(rates: ComplexRates, K, p):
    return single_exc_detuning(rates, K / 2 + p) + single_exc_detuning(rates, K / 2 - p)


def bound_alpha(params: ModelParams, rates: ComplexRates, K) -> complex:
    if params.U == 0:
        raise BoundStateError("no bound state for U = 0")
    return -1j * rates.Gamma1 * np.cos(K / 2) / params.U


def bound_detuning(params: ModelParams, rates: ComplexRates, K):
    c2 = np.cos(K / 2) ** 2
    return -1j * rates.Gamma0 + (params.U**2 - rates.Gamma1**2 * c2) / params.U


def approx_detuning(params: ModelParams, kind: str) -> complex:
    """Energies with the Lamb shift and dipole-dipole corrections dropped."""
    g = params.gamma0
    if kind == "single":
        return -0.5j * g
    if kind == "bound":
        return params.U - 1j * g
    if kind == "scattering":
        return -1j * g
    raise ValueError(kind)


# --- analytic states --------------------------------------------------------


def single_exc_state(params: ModelParams, rates: ComplexRates, ell: int) -> SingleExcState:
    ka = bloch_wavenumber(params.M, ell)
    amps = np.exp(1j * ka * params.sites) / np.sqrt(params.M)
    return SingleExcState(
        ell=ell,
        ka=ka,
        amplitudes=amps,
        detuning=complex(single_exc_detuning(rates, ka)),
        omega0=params.omega0,
    )


def bound_state(params: ModelParams, rates: ComplexRates, K: float, tight: bool = False) -> TwoExcState:
    alpha = complex(bound_alpha(params, rates, K))
    if abs(alpha) >= 1:
        raise BoundStateError(f"|alpha_K| = {abs(alpha):.3g} >= 1 at Ka = {K:.4g}; U too small")
    x = np.arange(1, params.half + 1)
    if tight:
        psi = (x == 1).astype(complex)
    else:
        psi = alpha ** (x - 1)
        psi = psi / np.linalg.norm(psi)
    return TwoExcState(
        M=params.M,
        K=float(K),
        kind="bound",
        psi=psi,
        detuning=complex(bound_detuning(params, rates, K)),
        omega0=params.omega0,
        alpha=alpha,
        tight=tight,
        ell_K=grid_index(params.M, K),
    )


def _relative_basis(params: ModelParams, K: float, basis) -> np.ndarray:
    """Columns: normalised centre-of-mass plane waves at fixed relative distance x."""
    M, half = params.M, params.half
    B = np.zeros((len(basis), half), dtype=complex)
    for row, (n1, n2) in enumerate(basis):
        d = n2 - n1
        if d <= half:
            x, c = d, 0.5 * (n1 + n2)
        elif params.boundary == "periodic":
            x, c = M - d, 0.5 * (n1 + n2 + M)
        else:
            continue
        B[row, x - 1] = np.exp(1j * K * c) / np.sqrt(M)
    return B


def momentum_distribution(state: TwoExcState, q):
    return state.momentum_distribution(q)


def branching_table(
    params: ModelParams, rates: ComplexRates, state: TwoExcState, mode: str = "exact"
) -> BranchingTable:
    """Branching ratios of |K nu> -> |k> over the zone grid."""
    ks = zone_grid(params.M)
    w = np.abs(state.eta_bar(state.K / 2 - ks)) ** 2
    total = w.sum()
    if total <= 1e-300:
        raise PhysicsError("state carries no collective dipole weight")
    if mode == "exact":
        rate = -2.0 * state.detuning.imag
    elif mode == "approx":
        rate = 2.0 * params.gamma0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return BranchingTable(K=state.K, kind=state.kind, ks=ks, b=w / total, total_rate=float(rate))


def collective_lowering(params: ModelParams, mu: float, basis1, basis2) -> np.ndarray:
    """Matrix of (1/sqrt M) sum_n exp(-i mu n) sigma^-_n from pair space to site space."""
    idx1 = {b: i for i, b in enumerate(basis1)}
    D = np.zeros((len(basis1), len(basis2)), dtype=complex)
    for col, (n1, n2) in enumerate(basis2):
        D[idx1[(n2,)], col] += np.exp(-1j * mu * n1)
        D[idx1[(n1,)], col] += np.exp(-1j * mu * n2)
    return D / np.sqrt(params.M)


# --- numerical oracle -------------------------------------------------------


@dataclass(frozen=True)
class OracleSpectrum:
    eigenvalues: np.ndarray  # offset-free
    right: np.ndarray  # columns, unit norm
    left: np.ndarray  # columns, left.conj().T @ right == I
    residuals: np.ndarray  # ||H v - E v|| / ||H||
    offset: float


def diagonalize_oracle(
    h: SubspaceHamiltonian, max_dim: int = DEFAULT_MAX_DIM, tol: float = 1e-10
) -> OracleSpectrum:
    if h.dimension > max_dim:
        raise OracleError(f"dimension {h.dimension} exceeds oracle cap {max_dim}")
    H = h.matrix
    try:
        w, V = scipy.linalg.eig(H)
    except np.linalg.LinAlgError as exc:
        raise OracleError(f"eigensolver did not converge: {exc}") from exc
    order = np.lexsort((w.imag, w.real))
    w, V = w[order], V[:, order]
    V = V / np.linalg.norm(V, axis=0)
    hnorm = max(np.linalg.norm(H, 2), 1e-300)
    res = np.linalg.norm(H @ V - V * w, axis=0) / hnorm
    if res.max() > tol:
        raise OracleError(f"eigenvector residual {res.max():.3e} exceeds {tol:.1e}")
    W = np.linalg.inv(V).conj().T
    return OracleSpectrum(eigenvalues=w, right=V, left=W, residuals=res, offset=h.offset)


def bound_band_mask(params: ModelParams, eigenvalues) -> np.ndarray:
    """Bound band: eigenvalues sitting more than |U|/2 above the pair continuum."""
    return np.sign(params.U) * np.real(eigenvalues) > abs(params.U) / 2


def sector_hamiltonian(params: ModelParams, h2: SubspaceHamiltonian, K: float):
    """Project the pair Hamiltonian onto centre-of-mass momentum K.

    Returns (H_K, B, leakage) where ``leakage = ||H B - B H_K||`` certifies the
    sector is invariant.
    """
    if params.boundary != "periodic":
        raise PhysicsError("momentum sectors require the periodic boundary")
    B = _relative_basis(params, K, h2.basis)
    HK = B.conj().T @ h2.matrix @ B
    leakage = float(np.linalg.norm(h2.matrix @ B - B @ HK))
    return HK, B, leakage


def _fix_gauge(v: np.ndarray) -> np.ndarray:
    mags = np.abs(v)
    first = int(np.argmax(mags > 1e-6 * mags.max()))
    return v * (np.conj(v[first]) / mags[first])


def relative_momentum(rates: ComplexRates, K: float, detuning: complex) -> complex | None:
    """Solve E = E1(K/2+p) + E1(K/2-p) for p with Re(p) in [0, pi]."""
    J = -1j * rates.Gamma1 * np.cos(K / 2)
    if abs(J) < 1e-14:
        return None
    p = complex(np.arccos(complex((detuning + 1j * rates.Gamma0) / (2 * J))))
    if p.real < 0:
        p = -p
    return p


def sector_states(
    params: ModelParams, rates: ComplexRates, K: float, h2: SubspaceHamiltonian | None = None
) -> list[TwoExcState]:
    """Numerical eigenstates in the K sector: bound state first, then scattering by Re(p)."""
    if h2 is None:
        h2 = build_hamiltonian(params, rates, 2)
    HK, _, leakage = sector_hamiltonian(params, h2, K)
    if leakage > 1e-10 * max(np.linalg.norm(HK), 1.0):
        raise OracleError(f"K sector not invariant (leakage {leakage:.2e})")
    w, V = scipy.linalg.eig(HK)
    ell = grid_index(params.M, K)
    bound, scattering = [], []
    for e, v in zip(w, V.T):
        psi = _fix_gauge(v / np.linalg.norm(v))
        if bound_band_mask(params, e):
            bound.append(
                TwoExcState(params.M, float(K), "bound", psi, complex(e), params.omega0, ell_K=ell)
            )
        else:
            p = relative_momentum(rates, K, e)
            scattering.append(
                TwoExcState(params.M, float(K), "scattering", psi, complex(e), params.omega0, p=p, ell_K=ell)
            )
    scattering.sort(key=lambda s: (s.p.real if s.p is not None else 0.0, s.detuning.real))
    return bound + scattering


# --- scattering phase shifts ------------------------------------------------


@dataclass(frozen=True)
class PhaseShift:
    p: complex
    delta: float
    modulus: float  # |exp(i delta)| of the fitted ratio; 1 for lossless hopping
    residual: float


def extract_phase_shift(
    state: TwoExcState, rates: ComplexRates, tol: float = 1e-6
) -> PhaseShift:
    """Fit psi_x = A exp(ipx) + B exp(-ipx) on interior x, delta = arg(B/A)."""
    if state.kind != "scattering" or state.p is None:
        raise FitError("phase shifts are defined for scattering states only")
    xs = np.arange(2, len(state.psi))  # drop x = 1 and the ring seam x = N/2
    if len(xs) < 2:
        raise FitError(f"need M >= 7 for an interior fit, got M = {state.M}")
    p = state.p
    A = np.stack([np.exp(1j * p * xs), np.exp(-1j * p * xs)], axis=1)
    target = state.psi[xs - 1]
    coef, *_ = np.linalg.lstsq(A, target, rcond=None)
    residual = float(np.linalg.norm(A @ coef - target) / np.linalg.norm(state.psi))
    if residual > tol or abs(coef[0]) < 1e-12:
        raise FitError(f"scattering fit residual {residual:.2e} exceeds {tol:.1e}")
    ratio = coef[1] / coef[0]
    return PhaseShift(p=p, delta=float(np.angle(ratio)), modulus=float(abs(ratio)), residual=residual)


def phase_shift_table(params: ModelParams, rates: ComplexRates) -> list[dict]:
    """Phase shifts of every scattering state, delta unwrapped along p at fixed K."""
    h2 = build_hamiltonian(params, rates, 2)
    rows = []
    for ell, K in enumerate(zone_grid(params.M)):
        states = [s for s in sector_states(params, rates, K, h2) if s.kind == "scattering"]
        fits = [extract_phase_shift(s, rates) for s in states]
        deltas = np.unwrap([f.delta for f in fits]) if fits else []
        for band, (s, f, d) in enumerate(zip(states, fits, deltas)):
            rows.append(
                dict(
                    ell_K=ell,
                    band=band,
                    Ka=float(K),
                    p_re=f.p.real,
                    p_im=f.p.imag,
                    delta=float(d),
                    modulus=f.modulus,
                    re_E=s.detuning.real / params.gamma0,
                    im_E=s.detuning.imag / params.gamma0,
                    residual=f.residual,
                )
            )
    return rows


def hard_core_phase_shift(p):
    """U -> infinity limit of the phase shift, pi + 2p."""
    return np.pi + 2 * np.asarray(p)


def antiperiodic_pair_sums(rates: ComplexRates, M: int) -> np.ndarray:
    """Pair energies of two free fermions on the Jordan-Wigner-twisted ring.

    Hard-core bosons at U = 0 on an odd periodic ring map to fermions with
    antiperiodic momenta ka = -pi + 2*pi*l/M.
    """
    ks = -np.pi + 2 * np.pi * np.arange(M) / M
    e = single_exc_detuning(rates, ks)
    i, j = np.triu_indices(M, 1)
    return e[i] + e[j]

"""Lindblad dynamics in the few-excitation eigenbasis.

The density matrix is indexed by levels ``r`` in the order: vacuum, the M
spin waves ``k`` (grid order), then the two-excitation states grouped by
centre-of-mass momentum (bound state first, scattering states by Re p).

Coherences are stored in a frame rotating at ``n * omega0 + U * [bound]``,
so the remaining frequencies are of order gamma0 and a fixed-step RK4
integrator can resolve them.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .eigen import (
    BoundStateError,
    TwoExcState,
    approx_detuning,
    bound_state,
    build_hamiltonian,
    sector_states,
    single_exc_detuning,
    single_exc_state,
)
from .geometry import DetectorGeometry, detected_wavenumber, dipole_pattern
from .model import (
    ComplexRates,
    ConfigError,
    ModelParams,
    PhysicsError,
    RegimeWarning,
    fold,
    grid_index,
    snap_to_grid,
    zone_grid,
)
from .geometry import photon_transfer

MODES = ("exact", "approx")
BS_MODES = ("tight", "alpha", "numeric")


class StepSizeError(PhysicsError):
    pass


class TraceDriftError(PhysicsError):
    pass


# --- drive ------------------------------------------------------------------


@dataclass(frozen=True)
class DriveParams:
    """Weak incoherent pump.  Build with :func:`make_drive`."""

    pump_rate: float
    beta_exc: float
    kP: float
    kP_ell: int
    snap_distance: float
    Xi: float


def make_drive(params: ModelParams, pump_rate: float, beta_exc: float = 0.0) -> DriveParams:
    if pump_rate < 0:
        raise ConfigError("pump rate must be non-negative")
    xi = pump_rate / params.gamma0
    if xi >= 1:
        raise PhysicsError(f"Xi = {xi:.3g} >= 1: weak-drive truncation invalid")
    if xi > 0.1:
        warnings.warn(f"Xi = {xi:.3g} > 0.1: two-excitation truncation is marginal", RegimeWarning, stacklevel=2)
    ell, kP, dist = snap_to_grid(params.M, photon_transfer(params, beta_exc))
    return DriveParams(pump_rate=float(pump_rate), beta_exc=float(beta_exc), kP=kP, kP_ell=ell,
                       snap_distance=dist, Xi=xi)


def reference_elevation(params: ModelParams, drive: DriveParams) -> float:
    """Elevation in the y-z plane whose detected wavenumber equals k_P exactly."""
    s = drive.kP * params.lambda_ratio / (2 * np.pi)
    return float(np.arcsin(s))


# --- level scheme -----------------------------------------------------------


@dataclass(frozen=True)
class LevelScheme:
    params: ModelParams
    rates: ComplexRates
    mode: str
    bs: str
    labels: tuple
    kind: tuple
    n_exc: np.ndarray
    ka: np.ndarray
    ell: np.ndarray
    carrier: np.ndarray
    detuning: np.ndarray
    decay: np.ndarray
    feed: np.ndarray
    twos: tuple
    eta: np.ndarray  # (n_two, M): eta_bar of each pair state at K/2 - k
    branching: np.ndarray

    @property
    def D(self) -> int:
        return len(self.labels)

    @property
    def M(self) -> int:
        return self.params.M

    @property
    def singles(self) -> slice:
        return slice(1, 1 + self.M)

    @property
    def pairs(self) -> slice:
        return slice(1 + self.M, self.D)

    @property
    def freq(self) -> np.ndarray:
        return self.detuning.real - self.carrier

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def bound_index(self, ell_K: int) -> int | None:
        label = f"K{ell_K}:BS"
        return self.labels.index(label) if label in self.labels else None

    def sector(self, ell_K: int) -> list[int]:
        """Level indices of all pair states with centre-of-mass index ell_K."""
        prefix = f"K{ell_K}:"
        return [i for i, lab in enumerate(self.labels) if lab.startswith(prefix)]


def build_levels(
    params: ModelParams,
    rates: ComplexRates | None = None,
    mode: str = "approx",
    bs: str = "tight",
    include_scattering: bool = True,
) -> LevelScheme:
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    if bs not in BS_MODES:
        raise ConfigError(f"bs must be one of {BS_MODES}")
    if rates is None:
        rates = params.rates()
    M = params.M
    grid = zone_grid(M)

    twos: list[TwoExcState] = []
    labels = ["0"] + [f"k{l}" for l in range(M)]
    h2 = None
    if include_scattering or bs == "numeric":
        if params.boundary != "periodic":
            raise PhysicsError("numerical pair states require the periodic boundary")
        h2 = build_hamiltonian(params, rates, 2)
    for ell, K in enumerate(grid):
        numeric = sector_states(params, rates, K, h2) if h2 is not None else []
        bound = None
        if bs == "numeric":
            bound = next((s for s in numeric if s.kind == "bound"), None)
        else:
            try:
                bound = bound_state(params, rates, K, tight=(bs == "tight"))
            except BoundStateError:
                bound = None
        if bound is not None:
            twos.append(bound)
            labels.append(f"K{ell}:BS")
        if include_scattering:
            scat = [s for s in numeric if s.kind == "scattering"]
            if bound is None:
                # no bound state: keep every numerical state of the sector
                scat = [s for s in numeric if s.kind == "scattering" or bs != "numeric"]
            for j, s in enumerate(scat):
                twos.append(s)
                labels.append(f"K{ell}:p{j}")

    D = len(labels)
    n_exc = np.array([0] + [1] * M + [2] * len(twos))
    kinds = ("vac",) + ("single",) * M + tuple(s.kind for s in twos)
    ka = np.concatenate([[np.nan], grid, [s.K for s in twos]])
    ells = np.concatenate([[-1], np.arange(M), [s.ell_K for s in twos]]).astype(int)

    if mode == "exact":
        det1 = np.array([single_exc_state(params, rates, l).detuning for l in range(M)])
        det2 = np.array([s.detuning for s in twos], dtype=complex)
    else:
        det1 = np.full(M, approx_detuning(params, "single"))
        det2 = np.array([approx_detuning(params, s.kind) for s in twos], dtype=complex)
    detuning = np.concatenate([[0.0], det1, det2]).astype(complex)
    decay = -2.0 * detuning.imag
    carrier = np.array([params.U if k == "bound" else 0.0 for k in kinds])

    eta = np.array([s.eta_bar(s.K / 2 - grid) for s in twos]).reshape(len(twos), M)
    w = np.abs(eta) ** 2
    branching = w / w.sum(axis=1, keepdims=True)

    feed = np.zeros((D, D))
    feed[0, 1 : 1 + M] = decay[1 : 1 + M]
    feed[1 : 1 + M, 1 + M :] = (branching * decay[1 + M :, None]).T

    return LevelScheme(
        params=params, rates=rates, mode=mode, bs=bs, labels=tuple(labels), kind=kinds,
        n_exc=n_exc, ka=ka, ell=ells, carrier=carrier, detuning=detuning, decay=decay,
        feed=feed, twos=tuple(twos), eta=eta, branching=branching,
    )


def pump_matrix(levels: LevelScheme, drive: DriveParams) -> np.ndarray:
    """Population source terms Q as a linear map on the population vector."""
    M, P = levels.M, drive.pump_rate
    Q = np.zeros((levels.D, levels.D))
    Q[0, 0] -= P
    Q[1 + drive.kP_ell, 0] += P
    grid = zone_grid(M)
    off = 1 + M
    for l, k in enumerate(grid):
        ell_K = grid_index(M, k + drive.kP)
        for idx in levels.sector(ell_K):
            w = abs(levels.eta[idx - off, l]) ** 2
            Q[1 + l, 1 + l] -= P * w
            Q[idx, 1 + l] += P * w
    return Q


# --- density matrices -------------------------------------------------------


@dataclass(frozen=True)
class EigenbasisDensityMatrix:
    levels: LevelScheme
    rho: np.ndarray  # rotating frame
    t: float = 0.0

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    @property
    def populations(self) -> np.ndarray:
        return np.diagonal(self.rho).real.copy()

    def population(self, label: str) -> float:
        i = self.levels.index(label)
        return float(self.rho[i, i].real)

    def lab_frame(self) -> np.ndarray:
        """Coherences with the U carrier restored (omega0 carriers still removed)."""
        c = self.levels.carrier
        return self.rho * np.exp(-1j * np.subtract.outer(c, c) * self.t)

    def hermiticity_error(self) -> float:
        return float(np.abs(self.rho - self.rho.conj().T).max())


def pure_state(levels: LevelScheme, label: str) -> EigenbasisDensityMatrix:
    rho = np.zeros((levels.D, levels.D), dtype=complex)
    i = levels.index(label)
    rho[i, i] = 1.0
    return EigenbasisDensityMatrix(levels, rho, 0.0)


def vacuum(levels: LevelScheme) -> EigenbasisDensityMatrix:
    return pure_state(levels, "0")


def random_density_matrix(levels: LevelScheme, rng: np.random.Generator, rank: int | None = None):
    D = levels.D
    rank = D if rank is None else rank
    X = rng.normal(size=(D, rank)) + 1j * rng.normal(size=(D, rank))
    rho = X @ X.conj().T
    return EigenbasisDensityMatrix(levels, rho / np.trace(rho).real, 0.0)


# --- equations of motion ----------------------------------------------------


def _coherence_rates(levels: LevelScheme) -> np.ndarray:
    g = levels.decay
    f = levels.freq
    return 0.5 * np.add.outer(g, g) + 1j * np.subtract.outer(f, f)


def _population_generator(levels: LevelScheme, drive: DriveParams | None) -> np.ndarray:
    G = levels.feed.copy()
    if drive is not None and drive.pump_rate > 0:
        G = G + pump_matrix(levels, drive)
    return G


def lindblad_rhs(rho, levels: LevelScheme, drive: DriveParams | None = None) -> np.ndarray:
    """Time derivative of the rotating-frame density matrix."""
    R = rho.rho if isinstance(rho, EigenbasisDensityMatrix) else np.asarray(rho)
    L = _coherence_rates(levels)
    G = _population_generator(levels, drive)
    out = -L * R
    idx = np.diag_indices(levels.D)
    out[idx] += G @ R[idx].real
    return out


def max_rate(levels: LevelScheme, drive: DriveParams | None = None) -> float:
    L = _coherence_rates(levels)
    G = _population_generator(levels, drive)
    return float(max(np.abs(L).max(), np.abs(G).max()))


@dataclass(frozen=True)
class Trajectory:
    levels: LevelScheme
    times: np.ndarray
    rho: np.ndarray  # (T, D, D)

    def at(self, i: int) -> EigenbasisDensityMatrix:
        return EigenbasisDensityMatrix(self.levels, self.rho[i], float(self.times[i]))

    def population(self, label: str) -> np.ndarray:
        i = self.levels.index(label)
        return self.rho[:, i, i].real

    @property
    def populations(self) -> np.ndarray:
        return np.diagonal(self.rho, axis1=1, axis2=2).real


def integrate_master_equation(
    rho0: EigenbasisDensityMatrix,
    levels: LevelScheme | None = None,
    drive: DriveParams | None = None,
    t_end: float = 10.0,
    dt: float = 0.01,
    times=None,
    trace_tol: float = 1e-8,
    positivity_tol: float = 1e-9,
) -> Trajectory:
    """Fixed-step RK4; lands exactly on every sample time."""
    levels = rho0.levels if levels is None else levels
    rate = max_rate(levels, drive)
    if dt * rate >= 0.1:
        raise StepSizeError(f"dt * max rate = {dt * rate:.3g} >= 0.1")
    times = np.linspace(0.0, t_end, 101) if times is None else np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < rho0.t:
        raise ConfigError("sample times must be sorted and not precede the initial time")

    L = _coherence_rates(levels)
    G = _population_generator(levels, drive)
    idx = np.diag_indices(levels.D)

    def f(R):
        out = -L * R
        out[idx] += G @ R[idx].real
        return out

    R = rho0.rho.astype(complex).copy()
    tr0 = np.trace(R).real
    t = rho0.t
    out = np.empty((len(times), levels.D, levels.D), dtype=complex)
    for n, target in enumerate(times):
        span = target - t
        steps = int(np.ceil(span / dt - 1e-9)) if span > 0 else 0
        h = span / steps if steps else 0.0
        for j in range(steps):
            k1 = f(R)
            k2 = f(R + 0.5 * h * k1)
            k3 = f(R + 0.5 * h * k2)
            k4 = f(R + h * k3)
            R = R + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            pops = R[idx].real
            drift = abs(pops.sum() - tr0)
            if drift > trace_tol:
                raise TraceDriftError(f"trace drift {drift:.2e} at t = {t + (j + 1) * h:.4g}")
            if pops.min() < -positivity_tol:
                raise PhysicsError(f"negative population {pops.min():.2e} at t = {t + (j + 1) * h:.4g}")
        t = target
        out[n] = R
    return Trajectory(levels, times, out)


def spontaneous_emission_closed_form(rho0: EigenbasisDensityMatrix, t) -> np.ndarray:
    """Exact solution without drive; returns rho(t) stacked over ``t``.

    With approximate rates this reduces to the textbook results: pair
    populations decay as exp(-2 gamma0 t), spin waves are fed as
    2 b (exp(-gamma0 t) - exp(-2 gamma0 t)).
    """
    levels = rho0.levels
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float)) - rho0.t
    R0 = rho0.rho
    L = _coherence_rates(levels)
    out = R0[None, :, :] * np.exp(-L[None, :, :] * ts[:, None, None])

    g = levels.decay
    one, two = levels.singles, levels.pairs
    p0 = np.diagonal(R0).real
    gk = g[one][None, :, None]
    gK = g[two][None, None, :]
    tt = ts[:, None, None]
    gap = gK - gk
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = np.where(
            np.abs(gap) > 1e-12,
            (np.exp(-gk * tt) - np.exp(-gK * tt)) / gap,
            tt * np.exp(-gk * tt),
        )
    F = levels.feed[one, two][None, :, :]
    fed = (F * kernel * p0[two][None, None, :]).sum(axis=2)
    sidx = np.arange(one.start, one.stop)
    out[:, sidx, sidx] += fed
    total = np.trace(R0).real
    out[:, 0, 0] = total - (np.trace(out, axis1=1, axis2=2).real - out[:, 0, 0].real)
    return out[0] if scalar else out


# --- steady state -----------------------------------------------------------


@dataclass(frozen=True)
class Occupations:
    levels: LevelScheme
    values: np.ndarray  # length D

    @property
    def vacuum(self) -> float:
        return float(self.values[0])

    @property
    def singles(self) -> np.ndarray:
        return self.values[self.levels.singles]

    @property
    def pairs(self) -> np.ndarray:
        return self.values[self.levels.pairs]

    def __getitem__(self, label: str) -> float:
        return float(self.values[self.levels.index(label)])


def steady_state_occupations(
    levels: LevelScheme,
    drive: DriveParams,
    method: str = "closed",
    depletion: bool = True,
    t_end: float = 60.0,
    dt: float = 0.02,
) -> Occupations:
    """Weak-drive steady state.

    ``closed``: second-order expansion in the pump rate.  ``depletion=False``
    drops the O(Xi^2) loss of the pumped spin wave to the vacuum balance and
    to pair states, leaving the leading-order-only form.
    ``linear``: exact null vector of the population rate equations.
    ``ode``: long-time RK4 integration from the vacuum.
    """
    if drive.Xi >= 1:
        raise PhysicsError(f"Xi = {drive.Xi:.3g} out of range")
    M, D, P = levels.M, levels.D, drive.pump_rate
    if method == "closed":
        vals = np.zeros(D)
        g = levels.decay
        kp = 1 + drive.kP_ell
        first = P / g[kp]
        ell_K = grid_index(M, 2 * drive.kP)
        off = 1 + M
        loss = 0.0
        for idx in levels.sector(ell_K):
            w = abs(levels.eta[idx - off, drive.kP_ell]) ** 2
            vals[idx] = P * w * first / g[idx]
            loss += P * w
        fed = levels.feed[levels.singles, levels.pairs] @ vals[levels.pairs]
        vals[levels.singles] = fed / g[levels.singles]
        vals[kp] += first
        if depletion:
            vals[kp] -= first * (P + loss) / g[kp]
        vals[0] = 1.0 - vals[1:].sum()
        return Occupations(levels, vals)
    if method == "linear":
        G = _population_generator(levels, drive) - np.diag(levels.decay)
        A = G.copy()
        A[0, :] = 1.0
        rhs = np.zeros(D)
        rhs[0] = 1.0
        return Occupations(levels, np.linalg.solve(A, rhs))
    if method == "ode":
        traj = integrate_master_equation(vacuum(levels), levels, drive, t_end=t_end, dt=dt, times=[t_end])
        return Occupations(levels, traj.populations[-1])
    raise ValueError(f"unknown method {method!r}")


# --- two-time correlation ---------------------------------------------------


@dataclass(frozen=True)
class Branch:
    amplitude: float  # value at tau = 0, in units of xi^2
    freq: float  # carrier minus omega0
    rate: float  # envelope decay rate

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.amplitude * np.exp((-1j * self.freq - self.rate) * tau)


@dataclass(frozen=True)
class Correlator:
    bound: Branch | None
    scattering: tuple
    single: Branch | None
    allowed: bool
    kbar: float
    weight: float  # |w(r)|^2

    def __call__(self, tau, branch: str = "bound"):
        tau = np.asarray(tau, dtype=float)
        zero = np.zeros(tau.shape, dtype=complex)
        if branch == "bound":
            return self.bound(tau) if self.bound is not None else zero
        if branch == "scattering":
            return sum((b(tau) for b in self.scattering), zero)
        if branch == "single":
            return self.single(tau) if self.single is not None else zero
        if branch == "all":
            return self(tau, "bound") + self(tau, "scattering") + self(tau, "single")
        raise ValueError(branch)


def correlator_branches(
    levels: LevelScheme,
    drive: DriveParams,
    geometry: DetectorGeometry,
    occupations: Occupations | None = None,
    continuum: bool = False,
) -> Correlator:
    """Regression-theorem correlator <E-(t) E+(t+tau)> split into spectral branches.

    In the default idealised-lattice treatment the Bragg deltas must be met on
    the zone grid; otherwise every branch is zero and ``allowed`` is False.
    ``continuum=True`` treats the detected wavenumber as continuous (M -> inf).
    """
    params, rates, M = levels.params, levels.rates, levels.M
    if occupations is None:
        occupations = steady_state_occupations(levels, drive)
    weight, _ = dipole_pattern(geometry)
    kbar = float(detected_wavenumber(params, geometry.beta))
    K = 2 * drive.kP
    ell_K = grid_index(M, K)
    k_final = K - kbar
    on_grid = grid_index(M, kbar) is not None
    allowed = on_grid or continuum
    if not allowed:
        return Correlator(None, (), None, False, kbar, weight)

    def single_det(k):
        if levels.mode == "exact":
            return complex(single_exc_detuning(rates, k))
        return approx_detuning(params, "single")

    d_final = single_det(k_final)
    g_final = -2 * d_final.imag
    off = 1 + M
    bound, scattering = None, []
    for idx in levels.sector(ell_K):
        s = levels.twos[idx - off]
        eta2 = abs(s.eta_bar(s.K / 2 - k_final)) ** 2
        br = Branch(
            amplitude=float(weight * M * eta2 * occupations.values[idx]),
            freq=float(levels.detuning[idx].real - d_final.real),
            rate=float(0.5 * (levels.decay[idx] + g_final)),
        )
        if s.kind == "bound":
            bound = br
        else:
            scattering.append(br)
    single = None
    if on_grid:
        i = 1 + grid_index(M, kbar)
        single = Branch(
            amplitude=float(weight * M * occupations.values[i]),
            freq=float(levels.detuning[i].real),
            rate=float(0.5 * levels.decay[i]),
        )
    return Correlator(bound, tuple(scattering), single, True, kbar, weight)


def two_time_correlation(
    levels: LevelScheme,
    drive: DriveParams,
    geometry: DetectorGeometry,
    tau,
    branch: str = "bound",
    occupations: Occupations | None = None,
    continuum: bool = False,
):
    """Correlator values (units of xi^2, frame rotating at omega0)."""
    corr = correlator_branches(levels, drive, geometry, occupations, continuum)
    return corr(tau, branch)


def fit_carrier_and_rate(tau, values) -> tuple[float, float]:
    """Linear fits of unwrapped phase and log-modulus: returns (freq, rate)."""
    tau = np.asarray(tau, dtype=float)
    phase = np.unwrap(np.angle(values))
    freq = -np.polyfit(tau, phase, 1)[0]
    rate = -np.polyfit(tau, np.log(np.abs(values)), 1)[0]
    return float(freq), float(rate)

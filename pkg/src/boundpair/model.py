"""Chain parameters, complex collective rates and subspace Hamiltonians.

Energies throughout the package are stored relative to ``n * omega0`` where
``n`` is the excitation number of the subspace they belong to.  The optical
frequency is carried separately as an offset, so nothing at the ``gamma0``
scale is ever added to a number of order ``omega0``.

Sites are labelled ``n = -N/2, ..., N/2`` with ``M = N + 1`` odd.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

TWOPI = 2.0 * np.pi
BOUNDARIES = ("open", "periodic")
DEFAULT_MAX_DIM = 5000


class ConfigError(ValueError):
    """Invalid parameters or configuration (raised before any computation)."""


class PhysicsError(RuntimeError):
    """A physical precondition of a formula or solver is violated."""


class RegimeWarning(UserWarning):
    """Parameters outside the regime where the closed forms are accurate."""


@dataclass(frozen=True)
class ComplexRates:
    Gamma0: complex
    Gamma1: complex


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the atom chain.

    All frequencies (``omega0``, ``gamma0``, ``U``) share one unit, lengths
    (``lambda_at``, ``a``) another.  ``gamma1`` overrides the free-space
    nearest-neighbour rate when given.
    """

    M: int = 7
    omega0: float = 1e8
    gamma0: float = 1.0
    lambda_at: float = 0.5
    a: float = 1.0
    U: float = 50.0
    boundary: str = "periodic"
    gamma1: complex | None = None
    tight_threshold: float = 10.0

    def __post_init__(self):
        if isinstance(self.M, bool) or int(self.M) != self.M:
            raise ConfigError(f"M must be an integer, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        if self.M < 3 or self.M % 2 == 0:
            raise ConfigError(f"M must be odd and >= 3, got {self.M}")
        for name in ("omega0", "gamma0", "lambda_at", "a"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if not np.isfinite(self.U):
            raise ConfigError(f"U must be finite, got {self.U!r}")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.gamma1 is not None:
            object.__setattr__(self, "gamma1", complex(self.gamma1))
        if self.lambda_at / self.a >= 1.0:
            warnings.warn(
                f"lambda_at/a = {self.lambda_at / self.a:.3g} >= 1: outside the extended-sample "
                "regime, nearest-neighbour coupling is a poor approximation",
                RegimeWarning,
                stacklevel=3,
            )
        if abs(self.U) / self.gamma0 < self.tight_threshold:
            warnings.warn(
                f"|U|/gamma0 = {abs(self.U) / self.gamma0:.3g} below {self.tight_threshold}: "
                "tight bound-state formulas are inaccurate",
                RegimeWarning,
                stacklevel=3,
            )

    @property
    def N(self) -> int:
        return self.M - 1

    @property
    def half(self) -> int:
        return self.N // 2

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.half, self.half + 1)

    @property
    def lambda_ratio(self) -> float:
        return self.lambda_at / self.a

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def rates(self) -> ComplexRates:
        return complex_rates(self)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["gamma1"] is not None:
            d["gamma1"] = [d["gamma1"].real, d["gamma1"].imag]
        return d

    def digest(self) -> str:
        """Short stable hash identifying this parameter set."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def free_space_gamma1(params: ModelParams) -> complex:
    """Nearest-neighbour rate for dipoles perpendicular to the chain in free space."""
    ratio = params.lambda_at / params.a
    return -(3j * params.gamma0 * ratio / (4 * np.pi)) * np.exp(TWOPI * 1j / ratio)


def complex_rates(params: ModelParams) -> ComplexRates:
    # Re(Gamma0) is the decay rate; Im(Gamma0)/2 = gamma0/pi is the Lamb shift.
    gamma0 = complex(params.gamma0, 2.0 * params.gamma0 / np.pi)
    gamma1 = params.gamma1 if params.gamma1 is not None else free_space_gamma1(params)
    return ComplexRates(Gamma0=gamma0, Gamma1=complex(gamma1))


# --- Brillouin zone helpers -------------------------------------------------


def fold(x):
    """Map wavenumbers (in units of 1/a) into [-pi, pi)."""
    return np.mod(np.asarray(x, dtype=float) + np.pi, TWOPI) - np.pi


def zone_grid(M: int) -> np.ndarray:
    """Bloch wavenumbers ka = 2*pi*(ell - N/2)/M, ell = 0..M-1, of the periodic ring."""
    return TWOPI * (np.arange(M) - (M - 1) // 2) / M


def bloch_wavenumber(M: int, ell: int) -> float:
    if not 0 <= ell < M:
        raise IndexError(f"ell={ell} outside 0..{M - 1}")
    return float(zone_grid(M)[ell])


def grid_index(M: int, ka: float, tol: float = 1e-9) -> int | None:
    """Index of the grid wavenumber equal to ``ka`` modulo 2*pi, or None."""
    j = fold(ka) * M / TWOPI
    jr = np.round(j)
    if abs(j - jr) * TWOPI / M > tol:
        return None
    return int((jr + (M - 1) // 2) % M)


def snap_to_grid(M: int, ka: float) -> tuple[int, float, float]:
    """Nearest grid wavenumber: returns (ell, ka_on_grid, distance)."""
    j = fold(ka) * M / TWOPI
    jr = np.round(j)
    ell = int((jr + (M - 1) // 2) % M)
    ka_grid = bloch_wavenumber(M, ell)
    return ell, ka_grid, float(abs(fold(ka - ka_grid)))


# --- Hamiltonians -----------------------------------------------------------


@dataclass(frozen=True)
class SubspaceHamiltonian:
    """Effective non-Hermitian Hamiltonian restricted to ``n_exc`` excitations.

    ``matrix`` excludes the constant ``offset = n_exc * omega0`` on its
    diagonal; ``full_matrix()`` adds it back.
    """

    n_exc: int
    matrix: np.ndarray
    offset: float
    basis: tuple
    boundary: str
    index: dict = field(repr=False, compare=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def full_matrix(self) -> np.ndarray:
        return self.matrix + self.offset * np.eye(self.dimension)


def bonds(params: ModelParams) -> list[tuple[int, int]]:
    """Nearest-neighbour bonds as pairs of site labels."""
    s = params.sites
    out = [(int(s[i]), int(s[i + 1])) for i in range(params.M - 1)]
    if params.boundary == "periodic":
        out.append((int(s[-1]), int(s[0])))
    return out


def subspace_dimension(M: int, n_exc: int) -> int:
    return M if n_exc == 1 else M * (M - 1) // 2


def build_hamiltonian(
    params: ModelParams, rates: ComplexRates, n_exc: int, max_dim: int = DEFAULT_MAX_DIM
) -> SubspaceHamiltonian:
    if n_exc not in (1, 2):
        raise ConfigError(f"n_exc must be 1 or 2, got {n_exc!r}")
    dim = subspace_dimension(params.M, n_exc)
    if dim > max_dim:
        raise ConfigError(f"subspace dimension {dim} exceeds cap {max_dim}")

    hop = -0.5j * rates.Gamma1
    onsite = -0.5j * rates.Gamma0
    neighbours: dict[int, list[int]] = {int(n): [] for n in params.sites}
    bond_set = set()
    for i, j in bonds(params):
        neighbours[i].append(j)
        neighbours[j].append(i)
        bond_set.add(frozenset((i, j)))

    if n_exc == 1:
        basis = tuple((int(n),) for n in params.sites)
    else:
        basis = tuple(combinations((int(n) for n in params.sites), 2))
    index = {b: i for i, b in enumerate(basis)}

    H = np.zeros((dim, dim), dtype=complex)
    for col, occ in enumerate(basis):
        H[col, col] = n_exc * onsite
        if n_exc == 2 and frozenset(occ) in bond_set:
            H[col, col] += params.U
        for slot, site in enumerate(occ):
            others = occ[:slot] + occ[slot + 1 :]
            for nb in neighbours[site]:
                if nb in others:
                    continue  # hard-core
                row = index[tuple(sorted(others + (nb,)))]
                H[row, col] += hop
    return SubspaceHamiltonian(
        n_exc=n_exc,
        matrix=H,
        offset=n_exc * params.omega0,
        basis=basis,
        boundary=params.boundary,
        index=index,
    )

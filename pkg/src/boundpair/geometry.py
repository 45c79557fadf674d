"""Detector geometry and the single-dipole far-field weight.

The chain lies along y and the dipoles along x.  A detector direction is
given by its elevation ``beta`` out of the x-z plane (``beta = 0`` is normal
to the chain) and an azimuth ``phi`` about the chain measured from z towards
x, so ``phi = 0`` is the y-z plane.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import TWOPI, ConfigError, ModelParams, RegimeWarning, fold

DIPOLE_X = (1.0, 0.0, 0.0)


@dataclass(frozen=True)
class DetectorGeometry:
    beta: float
    phi: float = 0.0
    r: float = 1e6
    dipole: tuple = DIPOLE_X

    def __post_init__(self):
        if not -np.pi / 2 - 1e-12 <= self.beta <= np.pi / 2 + 1e-12:
            raise ConfigError(f"beta must lie in [-pi/2, pi/2], got {self.beta}")
        if self.r < 0:
            raise ConfigError(f"distance must be non-negative, got {self.r}")

    @property
    def direction(self) -> np.ndarray:
        cb = np.cos(self.beta)
        return np.array([cb * np.sin(self.phi), np.sin(self.beta), cb * np.cos(self.phi)])


def dipole_pattern(geometry: DetectorGeometry) -> tuple[float, np.ndarray]:
    """Return (|w|^2, w) with w = (d - (d.n) n) / r."""
    if geometry.r <= 0:
        raise ConfigError("dipole pattern undefined at zero distance")
    d = np.asarray(geometry.dipole, dtype=float)
    n = geometry.direction
    w = (d - np.dot(d, n) * n) / geometry.r
    return float(np.dot(w, w)), w


def check_far_field(params: ModelParams, geometry: DetectorGeometry, factor: float = 100.0) -> bool:
    ok = geometry.r >= factor * params.M * params.a
    if not ok:
        warnings.warn(
            f"r = {geometry.r:.3g} is not >> M*a = {params.M * params.a:.3g}; "
            "retardation linearisation may fail",
            RegimeWarning,
            stacklevel=2,
        )
    return ok


def photon_transfer(params: ModelParams, beta):
    """Wavenumber handed to a photon detected at elevation beta (not folded)."""
    return TWOPI * np.sin(beta) / params.lambda_ratio


def detected_wavenumber(params: ModelParams, beta):
    return fold(photon_transfer(params, beta))

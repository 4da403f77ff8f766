"""Sampled 1-D transverse plane and the unitary position/momentum transforms.

Lattice conventions
-------------------
Index ``N/2`` is the origin in both domains::

    x_j = (j - N/2) * dx
    q_k = 2*pi * (k - N/2) / (N * dx)

The transform is the centered, symmetric (``1/sqrt(N)``) DFT::

    F[f]_k = N**-0.5 * sum_j f_j exp(-i q_k x_j)

so field values are amplitudes in sqrt(photons) per lattice mode in either
domain and total power is preserved exactly.  Fields may carry leading batch
axes (one row per shot); the lattice is always the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .exceptions import DomainMismatchError, ParameterError

Domain = Literal["position", "momentum"]
Ordering = Literal["P", "Wigner"]

DOMAINS = ("position", "momentum")
ORDERINGS = ("P", "Wigner")


@dataclass(frozen=True)
class TransverseGrid:
    """Uniform 1-D transverse lattice.

    Parameters
    ----------
    n_points : int
        Number of samples; a power of two (hence even).
    dx : float
        Sample spacing in meters.
    wavelength : float
        Optical wavelength in meters.
    """

    n_points: int
    dx: float
    wavelength: float

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 2 or (n & (n - 1)) != 0:
            raise ParameterError(f"n_points must be a power of two >= 2, got {n!r}")
        if not self.dx > 0:
            raise ParameterError(f"dx must be positive, got {self.dx!r}")
        if not self.wavelength > 0:
            raise ParameterError(f"wavelength must be positive, got {self.wavelength!r}")

    @property
    def center(self) -> int:
        return self.n_points // 2

    @property
    def dq(self) -> float:
        """Momentum spacing 2*pi/(N*dx) in rad/m."""
        return 2.0 * np.pi / (self.n_points * self.dx)

    @property
    def extent(self) -> float:
        return self.n_points * self.dx

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.center) * self.dx

    @property
    def q(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.center) * self.dq

    def reflection_index(self) -> np.ndarray:
        """Index map j -> N - j (mod N), i.e. x -> -x and q -> -q.

        Index 0 (the Nyquist edge) is its own image.
        """
        return (-np.arange(self.n_points)) % self.n_points

    def fourier_plane(self, focal_length: float) -> "TransverseGrid":
        """Lattice of the back focal plane of a lens of focal length ``f``.

        Pixel k sits at ``q_k * wavelength * f / (2*pi)``, so the spacing is
        ``wavelength * f / (N * dx)``.
        """
        if not focal_length > 0:
            raise ParameterError(f"focal length must be positive, got {focal_length!r}")
        dx_det = self.wavelength * focal_length / (self.n_points * self.dx)
        return TransverseGrid(self.n_points, dx_det, self.wavelength)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex amplitudes on a lattice, tagged by domain and ordering.

    ``values`` has shape ``(..., grid.n_points)``; leading axes index
    independent realizations.
    """

    grid: TransverseGrid
    values: np.ndarray
    domain: Domain = "position"
    ordering: Ordering = "P"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", values)
        if values.ndim == 0 or values.shape[-1] != self.grid.n_points:
            raise ParameterError(
                f"field has {values.shape[-1] if values.ndim else 0} samples, "
                f"grid expects {self.grid.n_points}"
            )
        if self.domain not in DOMAINS:
            raise ParameterError(f"unknown domain {self.domain!r}")
        if self.ordering not in ORDERINGS:
            raise ParameterError(f"unknown ordering {self.ordering!r}")

    @property
    def batch_shape(self) -> tuple:
        return self.values.shape[:-1]

    def power(self) -> np.ndarray:
        """Total power sum |values|^2 per realization."""
        return np.sum(np.abs(self.values) ** 2, axis=-1)

    def with_values(self, values, **changes) -> "ComplexField":
        return replace(self, values=values, **changes)


def centered_dft(values: np.ndarray) -> np.ndarray:
    """Unitary centered DFT along the last axis."""
    shifted = np.fft.ifftshift(values, axes=-1)
    return np.fft.fftshift(np.fft.fft(shifted, axis=-1, norm="ortho"), axes=-1)


def centered_idft(values: np.ndarray) -> np.ndarray:
    """Inverse of :func:`centered_dft`."""
    shifted = np.fft.ifftshift(values, axes=-1)
    return np.fft.fftshift(np.fft.ifft(shifted, axis=-1, norm="ortho"), axes=-1)


def to_momentum(field: ComplexField) -> ComplexField:
    """Transform a position-domain field to its momentum modes."""
    if field.domain != "position":
        raise DomainMismatchError(f"to_momentum expects a position field, got {field.domain}")
    return field.with_values(centered_dft(field.values), domain="momentum")


def to_position(field: ComplexField) -> ComplexField:
    """Inverse of :func:`to_momentum`."""
    if field.domain != "momentum":
        raise DomainMismatchError(f"to_position expects a momentum field, got {field.domain}")
    return field.with_values(centered_idft(field.values), domain="position")


def dft_matrix(grid: TransverseGrid) -> np.ndarray:
    """Explicit N x N matrix of the centered unitary DFT (rows k, columns j).

    O(N^2) memory; used by brute-force oracles that must not share the FFT
    code path.
    """
    return np.exp(-1j * np.outer(grid.q, grid.x)) / np.sqrt(grid.n_points)

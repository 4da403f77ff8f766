"""Arm impulse responses: f-f Fourier arm, 2f-2f imaging arm, identity.

Fourier-arm discretization
--------------------------
The f-f lens maps ``b(x')`` to ``c(x) ~ int dx' exp(-2 pi i x x' / (lambda f)) T(x') b(x')``.
With field values stored as sqrt(photons) per lattice cell on both the source
lattice (spacing ``dx``) and the back focal plane (spacing
``lambda f / (N dx)``), the sampled kernel collapses to ``-i`` times the
unitary centered DFT::

    c_k = KAPPA * (-i) * F[T b]_k,    KAPPA = 1

i.e. the continuum prefactor ``1/(lambda f)`` (per transverse dimension) is
exactly absorbed by the two lattice-cell normalizations.  The same constant
is used by every closed form in :mod:`ghostcorr.oracles`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .exceptions import ConfigurationError, DomainMismatchError, ParameterError
from .lattice import ComplexField, TransverseGrid, centered_dft, dft_matrix

KAPPA = 1.0

ArmKind = Literal["FourierArm", "Imaging2f", "Identity"]


@dataclass(frozen=True, eq=False)
class ObjectMask:
    """Complex transmission T(x) sampled on ``grid``; |T| <= 1."""

    grid: TransverseGrid
    transmission: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transmission, dtype=np.complex128)
        if t.shape != (self.grid.n_points,):
            raise ParameterError(f"mask has shape {t.shape}, grid needs ({self.grid.n_points},)")
        if np.any(np.abs(t) > 1.0 + 1e-12):
            raise ParameterError("object transmission exceeds unity")
        object.__setattr__(self, "transmission", t)

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.transmission) ** 2))


@dataclass(frozen=True)
class ImagingArm:
    """Declarative description of one arm.

    ``FourierArm``: object (optional) then a lens at one focal length from
    object and detector.  ``Imaging2f``: lens at 2f from source and detector,
    no object.  ``Identity``: detector directly in the near field.
    """

    kind: ArmKind = "Identity"
    focal_length: Optional[float] = None
    object: Optional[ObjectMask] = None

    def __post_init__(self):
        if self.kind not in ("FourierArm", "Imaging2f", "Identity"):
            raise ConfigurationError(f"unknown arm kind {self.kind!r}")
        if self.kind != "Identity":
            if self.focal_length is None or not self.focal_length > 0:
                raise ConfigurationError(f"{self.kind} needs a positive focal length")
        if self.object is not None and self.kind != "FourierArm":
            raise ConfigurationError(f"an object can only be placed in a FourierArm, not {self.kind}")

    def detection_grid(self, grid: TransverseGrid) -> TransverseGrid:
        if self.kind == "FourierArm":
            return grid.fourier_plane(self.focal_length)
        return grid

    def transmission(self, grid: TransverseGrid) -> np.ndarray:
        if self.object is None:
            return np.ones(grid.n_points, dtype=np.complex128)
        if self.object.grid != grid:
            raise ConfigurationError("object mask and field live on different grids")
        return self.object.transmission


def propagate(field: ComplexField, arm: ImagingArm) -> ComplexField:
    """Field at the detection plane of ``arm``.

    Linear in ``field``; the statistical ordering tag is carried through
    unchanged.
    """
    if field.domain != "position":
        raise DomainMismatchError(f"propagate expects a position field, got {field.domain}")
    grid = field.grid
    if arm.kind == "Identity":
        return field
    if arm.kind == "FourierArm":
        values = -1j * KAPPA * centered_dft(arm.transmission(grid) * field.values)
        return field.with_values(values, grid=arm.detection_grid(grid))
    x = grid.x
    phase = np.exp(-1j * np.pi * x**2 / (grid.wavelength * arm.focal_length))
    return field.with_values(field.values[..., grid.reflection_index()] * phase)


def impulse_response(arm: ImagingArm, grid: TransverseGrid) -> np.ndarray:
    """Explicit kernel matrix H with ``c = H @ b`` (rows: detector pixels).

    Built without FFTs so that oracles using it are independent of
    :func:`propagate`.
    """
    n = grid.n_points
    if arm.kind == "Identity":
        return np.eye(n, dtype=np.complex128)
    if arm.kind == "FourierArm":
        return -1j * KAPPA * dft_matrix(grid) * arm.transmission(grid)[None, :]
    H = np.zeros((n, n), dtype=np.complex128)
    phase = np.exp(-1j * np.pi * grid.x**2 / (grid.wavelength * arm.focal_length))
    H[np.arange(n), grid.reflection_index()] = phase
    return H


def vacuum_offset(arm: ImagingArm, grid: TransverseGrid) -> np.ndarray:
    """Per-pixel symmetric-ordering offset of a Wigner field after ``arm``.

    A Wigner vacuum of variance 1/2 per source mode contributes
    ``0.5 * sum_j |H_kj|^2`` to detector pixel k.  Unitary arms give 1/2; an
    absorbing object lowers it, which is exactly what the (omitted) loss
    vacuum would restore.
    """
    if arm.kind != "FourierArm" or arm.object is None:
        return np.full(grid.n_points, 0.5)
    mean_t2 = np.mean(np.abs(arm.object.transmission) ** 2)
    return np.full(grid.n_points, 0.5 * mean_t2)


def _slit_pixels(grid: TransverseGrid, center: float, width: float) -> np.ndarray:
    """Lattice indices of a slit: ``round(width/dx)`` pixels nearest ``center``."""
    m = int(round(width / grid.dx))
    if m < 1:
        raise ParameterError(f"slit width {width:g} m is below one lattice cell")
    c = center / grid.dx + grid.center
    start = int(np.ceil(c - m / 2.0 - 1e-9))
    return np.arange(start, start + m)


def double_slit(grid: TransverseGrid, slit_width: float, separation: float) -> ObjectMask:
    """Two unit-transmission slits of width ``w`` centred at ``+-d/2``.

    Each slit covers exactly ``round(w/dx)`` lattice points and the pair is
    mirror symmetric about x = 0.
    """
    w, d = slit_width, separation
    if not w > 0 or not d > 0:
        raise ParameterError("slit width and separation must be positive")
    if not w < d:
        raise ParameterError(f"slits overlap: width {w:g} >= separation {d:g}")
    if not d + w < grid.extent:
        raise ParameterError(f"double slit (d + w = {d + w:g} m) exceeds grid extent {grid.extent:g} m")
    right = _slit_pixels(grid, d / 2.0, w)
    left = 2 * grid.center - right
    if left.max() >= right.min():
        raise ParameterError("slits overlap on the lattice")
    if left.min() < 0 or right.max() >= grid.n_points:
        raise ParameterError("double slit exceeds the lattice")
    t = np.zeros(grid.n_points, dtype=np.complex128)
    t[right] = 1.0
    t[left] = 1.0
    return ObjectMask(grid, t)


def single_slit(grid: TransverseGrid, slit_width: float) -> ObjectMask:
    """One unit-transmission slit of width ``w`` centred on the origin."""
    if not 0 < slit_width < grid.extent:
        raise ParameterError(f"slit width {slit_width:g} m outside (0, {grid.extent:g})")
    idx = _slit_pixels(grid, 0.0, slit_width)
    t = np.zeros(grid.n_points, dtype=np.complex128)
    t[idx] = 1.0
    return ObjectMask(grid, t)


def diffraction_amplitude(mask: ObjectMask, q=None) -> np.ndarray:
    """Lattice transcription of ``T~(q) = int dx/(2 pi) exp(-i q x) T(x)``.

    Evaluated on the momentum lattice by default, or at arbitrary ``q``
    (any shape) by direct summation; the result is periodic in q with period
    ``N * dq``.
    """
    grid = mask.grid
    t = mask.transmission
    if q is None:
        return grid.dx * np.sqrt(grid.n_points) / (2.0 * np.pi) * centered_dft(t)
    q = np.asarray(q, dtype=float)
    nz = np.flatnonzero(t)
    phase = np.exp(-1j * np.multiply.outer(q, grid.x[nz]))
    return grid.dx / (2.0 * np.pi) * (phase @ t[nz])

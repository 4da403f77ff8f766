"""Stochastic input beams: thermal light, vacuum, beam splitter, PDC pair.

Thermal light is sampled in the Glauber P representation (a positive Gaussian
P-function exists, so normally ordered moments are plain sample moments).
Down-converted light has no positive P-function and is sampled in the Wigner
representation; symmetric-ordering offsets are removed downstream in
:mod:`ghostcorr.detection`.

All samplers return momentum-domain fields and accept either a
``numpy.random.Generator`` (optionally with ``size`` for a batch) or a
:class:`ghostcorr.rng.ShotBlock`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import CompatibilityError, ParameterError
from .lattice import ComplexField, Ordering, TransverseGrid
from .rng import batch_size, complex_normal

_UNITARITY_TOL = 1e-12


@dataclass(frozen=True)
class ThermalSpectrum:
    """Gaussian mean-photon-number spectrum ``n_max * exp(-q^2 / (2 delta_q^2))``.

    The transverse coherence length is taken as ``l_coh = 2*pi / delta_q``.
    """

    n_max: float
    delta_q: float

    def __post_init__(self):
        if not self.n_max >= 0:
            raise ParameterError(f"n_max must be >= 0, got {self.n_max!r}")
        if not self.delta_q > 0:
            raise ParameterError(f"delta_q must be positive, got {self.delta_q!r}")

    @classmethod
    def from_coherence_length(cls, n_max: float, l_coh: float) -> "ThermalSpectrum":
        return cls(n_max, 2.0 * np.pi / l_coh)

    @property
    def l_coh(self) -> float:
        return 2.0 * np.pi / self.delta_q

    def mean_photons(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return self.n_max * np.exp(-(q**2) / (2.0 * self.delta_q**2))


@dataclass(frozen=True)
class PdcGain:
    """Real Bogoliubov gains ``U = cosh(gbar)``, ``V = sinh(gbar)``.

    ``gbar(q) = g * exp(-q^2 / (2 delta_q^2))``; |U|^2 - |V|^2 = 1 holds by
    construction and the mean photon number per mode is ``V(q)^2``.
    ``g = 0`` is admitted as the vacuum limit.
    """

    g: float
    delta_q: float

    def __post_init__(self):
        if not self.g >= 0:
            raise ParameterError(f"gain g must be >= 0, got {self.g!r}")
        if not self.delta_q > 0:
            raise ParameterError(f"delta_q must be positive, got {self.delta_q!r}")

    @classmethod
    def from_peak_photons(cls, n_peak: float, delta_q: float) -> "PdcGain":
        """Gain whose peak photon number per mode is ``n_peak``."""
        return cls(float(np.arcsinh(np.sqrt(n_peak))), delta_q)

    def reduced_gain(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return self.g * np.exp(-(q**2) / (2.0 * self.delta_q**2))

    def U(self, q) -> np.ndarray:
        return np.cosh(self.reduced_gain(q))

    def V(self, q) -> np.ndarray:
        return np.sinh(self.reduced_gain(q))

    def mean_photons(self, q) -> np.ndarray:
        return self.V(q) ** 2

    def pair_amplitude(self, q) -> np.ndarray:
        """U(q) V(q), the signal-idler pair correlation per mode."""
        gbar = self.reduced_gain(q)
        return 0.5 * np.sinh(2.0 * gbar)


@dataclass(frozen=True)
class BeamSplitter:
    """Lossless splitter; default is the balanced ``r = 1/sqrt(2)``, ``t = i/sqrt(2)``.

    ``r * conj(t)`` must be purely imaginary so that the two output arms
    commute.
    """

    r: complex = 1.0 / np.sqrt(2.0)
    t: complex = 1j / np.sqrt(2.0)

    def __post_init__(self):
        object.__setattr__(self, "r", complex(self.r))
        object.__setattr__(self, "t", complex(self.t))
        for problem in splitter_violations(self.r, self.t):
            raise ParameterError(problem)

    @property
    def rt2(self) -> float:
        """|r t|^2."""
        return abs(self.r * self.t) ** 2


def splitter_violations(r: complex, t: complex) -> list[str]:
    """Human-readable list of broken splitter invariants."""
    out = []
    norm = abs(r) ** 2 + abs(t) ** 2
    if abs(norm - 1.0) > _UNITARITY_TOL:
        out.append(f"|r|^2 + |t|^2 = {norm:.15g}, must be 1")
    cross = r * np.conj(t) + t * np.conj(r)
    if abs(cross) > _UNITARITY_TOL:
        out.append(f"r conj(t) + t conj(r) = {cross:.3g}, must vanish")
    return out


def sample_thermal(
    grid: TransverseGrid,
    spec: ThermalSpectrum,
    ordering: Ordering,
    rng,
    size=None,
) -> ComplexField:
    """Draw a thermal field in the momentum domain.

    Each mode q_k is an independent circular complex Gaussian with
    ``E|a_k|^2 = n(q_k)`` (P ordering) or ``n(q_k) + 1/2`` (Wigner).

    Parameters
    ----------
    grid : TransverseGrid
    spec : ThermalSpectrum
    ordering : {"P", "Wigner"}
    rng : numpy.random.Generator or ShotBlock
        Source of randomness, role ``"thermal"``.
    size : int, optional
        Batch length when ``rng`` is a plain generator.

    Returns
    -------
    ComplexField
        Momentum-domain field tagged with ``ordering``.
    """
    variance = spec.mean_photons(grid.q)
    if ordering == "Wigner":
        variance = variance + 0.5
    elif ordering != "P":
        raise ParameterError(f"unknown ordering {ordering!r}")
    z = complex_normal(rng, grid.n_points, role="thermal", size=size)
    return ComplexField(grid, z * np.sqrt(variance), "momentum", ordering)


def sample_vacuum(grid: TransverseGrid, ordering: Ordering, rng, size=None) -> ComplexField:
    """Vacuum: zero in P ordering, variance-1/2 white noise in Wigner ordering."""
    if ordering == "P":
        n = batch_size(rng, size)
        shape = (grid.n_points,) if n is None else (n, grid.n_points)
        return ComplexField(grid, np.zeros(shape, dtype=np.complex128), "momentum", "P")
    if ordering != "Wigner":
        raise ParameterError(f"unknown ordering {ordering!r}")
    z = complex_normal(rng, grid.n_points, role="vacuum", size=size)
    return ComplexField(grid, z * np.sqrt(0.5), "momentum", "Wigner")


def split(a: ComplexField, v: ComplexField, bs: BeamSplitter) -> tuple[ComplexField, ComplexField]:
    """Beam-splitter outputs ``b1 = r a + t v``, ``b2 = t a + r v``."""
    if a.grid != v.grid:
        raise CompatibilityError("splitter inputs live on different grids")
    if a.domain != v.domain:
        raise CompatibilityError(f"splitter inputs in {a.domain} and {v.domain} domains")
    if a.ordering != v.ordering:
        raise CompatibilityError(f"splitter inputs with {a.ordering} and {v.ordering} ordering")
    b1 = a.with_values(bs.r * a.values + bs.t * v.values)
    b2 = a.with_values(bs.t * a.values + bs.r * v.values)
    return b1, b2


def sample_pdc_pair(grid: TransverseGrid, gain: PdcGain, rng, size=None) -> tuple[ComplexField, ComplexField]:
    """Signal and idler after the crystal, Wigner sampled, momentum domain.

    Two independent Wigner vacua ``a1``, ``a2`` enter; the outputs are
    ``b1(q) = U a1(q) + V conj(a2(-q))`` and ``b2(q) = U a2(q) + V conj(a1(-q))``.
    ``-q`` is the lattice reflection k -> N - k.
    """
    n = grid.n_points
    a1 = complex_normal(rng, n, role="pdc1", size=size) * np.sqrt(0.5)
    a2 = complex_normal(rng, n, role="pdc2", size=size) * np.sqrt(0.5)
    refl = grid.reflection_index()
    U = gain.U(grid.q)
    V = gain.V(grid.q)
    b1 = U * a1 + V * np.conj(a2[..., refl])
    b2 = U * a2 + V * np.conj(a1[..., refl])
    return (
        ComplexField(grid, b1, "momentum", "Wigner"),
        ComplexField(grid, b2, "momentum", "Wigner"),
    )

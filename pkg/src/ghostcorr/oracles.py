"""Closed-form ground truth for every Monte-Carlo observable.

All formulas are lattice transcriptions that share the Fourier-arm constant
:data:`ghostcorr.optics.KAPPA` with the propagator, so MC-vs-oracle
comparisons carry no convention factors.  With ``dq = 2 pi / (N dx)`` and
``T~`` from :func:`ghostcorr.optics.diffraction_amplitude`:

* thermal f-f, point detector at ``q1 = 2 pi x1 / (lambda f)``::

      G(x2) = |rt|^2 * (KAPPA dq)^2 * |n(q2) T~(q1 - q2)|^2

* PDC f-f::

      G(x2) = (KAPPA dq)^2 * |U(q2) V(q2) T~(q1 + q2)|^2

* 2f imaging arm, exact and in the short-coherence limit::

      G(x2) = |rt|^2 (2 pi)^2 / N * |sum_m (dq / 2 pi) n(q_m) T~(q1 - q_m) exp(i q_m x2)|^2
            ~ |rt|^2 / N * n(q1)^2 * |T(-x2)|^2

where ``q2 = 2 pi x2 / (lambda f)`` on the detection lattice.  The
brute-force routines :func:`quadrature_G_thermal` and
:func:`quadrature_G_pdc` evaluate the general double sums over explicit
kernel matrices instead and serve as independent checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
import numpy as np

from .exceptions import ParameterError, TruncationError
from .lattice import TransverseGrid
from .optics import KAPPA, ImagingArm, ObjectMask, diffraction_amplitude, impulse_response
from .sources import PdcGain, ThermalSpectrum

FOCK_MAX = 200
FOCK_TAIL_TOL = 1e-9


@dataclass(frozen=True)
class GeometrySpec:
    """Wavelength, focal length and splitter factor ``|rt|^2``."""

    wavelength: float
    focal_length: float
    rt2: float = 0.25

    def __post_init__(self):
        if not self.wavelength > 0 or not self.focal_length > 0:
            raise ParameterError("wavelength and focal length must be positive")
        if not 0 < self.rt2 <= 0.25 + 1e-15:
            raise ParameterError(f"|rt|^2 must lie in (0, 1/4], got {self.rt2!r}")

    def to_momentum(self, x) -> np.ndarray:
        """Detection-plane position -> transverse wave vector, ``2 pi x / (lambda f)``."""
        return 2.0 * np.pi * np.asarray(x, dtype=float) / (self.wavelength * self.focal_length)


def _toeplitz_from_lags(grid: TransverseGrid, weights: np.ndarray, sign: float) -> np.ndarray:
    """Matrix M_jj' = (1/N) sum_k w_k exp(sign * i q_k (x_j - x_j')), built from its 2N - 1 lags."""
    n = grid.n_points
    lags = np.arange(-(n - 1), n) * grid.dx
    per_lag = np.exp(sign * 1j * np.outer(lags, grid.q)) @ weights / n
    j = np.arange(n)
    return per_lag[(j[:, None] - j[None, :]) + n - 1]


def thermal_second_order(spec: ThermalSpectrum, grid: TransverseGrid) -> np.ndarray:
    """Γ_jj' = <a*(x_j) a(x_j')> = (1/N) sum_k n(q_k) exp(-i q_k (x_j - x_j'))."""
    return _toeplitz_from_lags(grid, spec.mean_photons(grid.q), -1.0)


def pdc_cross_correlation(gain: PdcGain, grid: TransverseGrid) -> np.ndarray:
    """<b1(x_j) b2(x_j')> = (1/N) sum_k U(q_k) V(q_k) exp(i q_k (x_j - x_j'))."""
    return _toeplitz_from_lags(grid, gain.pair_amplitude(grid.q), 1.0)


def analytic_G_thermal_ff(spec: ThermalSpectrum, mask: ObjectMask, geom: GeometrySpec, x1: float) -> np.ndarray:
    """Ghost diffraction with split thermal light, point detector at ``x1``.

    Returns G over the f-f detection lattice of ``mask.grid``.
    """
    grid = mask.grid
    q1 = float(geom.to_momentum(x1))
    q2 = grid.q
    t = diffraction_amplitude(mask, q1 - q2)
    return geom.rt2 * (KAPPA * grid.dq) ** 2 * np.abs(spec.mean_photons(q2) * t) ** 2


def analytic_G_pdc_ff(gain: PdcGain, mask: ObjectMask, geom: GeometrySpec, x1: float) -> np.ndarray:
    """Ghost diffraction with a down-converted pair; note ``q1 + q2`` and no |rt|^2."""
    grid = mask.grid
    q1 = float(geom.to_momentum(x1))
    q2 = grid.q
    t = diffraction_amplitude(mask, q1 + q2)
    return (KAPPA * grid.dq) ** 2 * np.abs(gain.pair_amplitude(q2) * t) ** 2


def analytic_G_ff_bucket(weights: np.ndarray, mask: ObjectMask, scale: float, pdc: bool) -> np.ndarray:
    """Bucket (sum over all arm-1 pixels) version of the f-f closed forms.

    ``weights`` is n(q) (thermal) or U V (PDC) on the lattice; ``scale`` the
    prefactor (``|rt|^2`` or 1).
    """
    grid = mask.grid
    n = grid.n_points
    t = diffraction_amplitude(mask)
    k = np.arange(n)
    sign = 1 if pdc else -1
    idx = (k[:, None] + sign * (k[None, :] - grid.center)) % n
    return scale * (KAPPA * grid.dq) ** 2 * np.abs(weights) ** 2 * np.sum(np.abs(t[idx]) ** 2, axis=0)


@dataclass(frozen=True)
class ImageOracle:
    exact: np.ndarray
    approx: np.ndarray


def _image_2f(weights: np.ndarray, weight_q1: float, mask: ObjectMask, q1: float, scale: float) -> ImageOracle:
    grid = mask.grid
    q = grid.q
    x2 = grid.x
    t = diffraction_amplitude(mask, q1 - q)
    integrand = (grid.dq / (2.0 * np.pi)) * weights * t
    amp = np.exp(1j * np.outer(x2, q)) @ integrand
    exact = scale * (2.0 * np.pi) ** 2 / grid.n_points * np.abs(amp) ** 2
    t_reflected = mask.transmission[grid.reflection_index()]
    approx = scale / grid.n_points * weight_q1**2 * np.abs(t_reflected) ** 2
    return ImageOracle(exact, approx)


def analytic_G_thermal_2f(spec: ThermalSpectrum, mask: ObjectMask, geom: GeometrySpec, x1: float) -> ImageOracle:
    """Ghost image with split thermal light (object in the f-f arm, 2f imaging arm).

    ``exact`` is the periodic trapezoid sum over the momentum lattice;
    ``approx`` the short-coherence limit ``n(q1)^2 |T(-x2)|^2``.
    """
    q1 = float(geom.to_momentum(x1))
    n = spec.mean_photons(mask.grid.q)
    return _image_2f(n, float(spec.mean_photons(q1)), mask, q1, geom.rt2)


def analytic_G_pdc_2f(gain: PdcGain, mask: ObjectMask, geom: GeometrySpec, x1: float) -> ImageOracle:
    """PDC counterpart of :func:`analytic_G_thermal_2f` with U V replacing n."""
    q1 = float(geom.to_momentum(x1))
    uv = gain.pair_amplitude(mask.grid.q)
    return _image_2f(uv, float(gain.pair_amplitude(q1)), mask, q1, 1.0)


def quadrature_G_thermal(
    spec: ThermalSpectrum,
    arm1: ImagingArm,
    arm2: ImagingArm,
    grid: TransverseGrid,
    rt2: float,
) -> np.ndarray:
    """Brute force ``|rt|^2 |sum_jj' conj(h1(k1, j)) h2(k2, j') Γ_jj'|^2`` for every (k1, k2)."""
    h1 = impulse_response(arm1, grid)
    h2 = impulse_response(arm2, grid)
    gamma = thermal_second_order(spec, grid)
    amp = np.conj(h1) @ gamma @ h2.T
    return rt2 * np.abs(amp) ** 2


def quadrature_G_pdc(gain: PdcGain, arm1: ImagingArm, arm2: ImagingArm, grid: TransverseGrid) -> np.ndarray:
    """Brute force ``|sum_jj' h1(k1, j) h2(k2, j') <b1(x_j) b2(x_j')>|^2`` for every (k1, k2)."""
    h1 = impulse_response(arm1, grid)
    h2 = impulse_response(arm2, grid)
    cross = pdc_cross_correlation(gain, grid)
    amp = h1 @ cross @ h2.T
    return np.abs(amp) ** 2


@dataclass(frozen=True)
class VisibilityBackgrounds:
    """Correlation signal of each source over a common ``<n>^2`` background."""

    mean_photons: np.ndarray
    thermal_signal: np.ndarray
    pdc_signal: np.ndarray
    background: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        """(<n> + <n>^2) / <n>^2."""
        return self.pdc_signal / self.thermal_signal

    @property
    def thermal_snr(self) -> np.ndarray:
        return self.thermal_signal / self.background

    @property
    def pdc_snr(self) -> np.ndarray:
        return self.pdc_signal / self.background

    @property
    def advantage(self) -> np.ndarray:
        """PDC over thermal signal-to-background; equals 1 + 1/<n>."""
        return self.pdc_snr / self.thermal_snr


def visibility_backgrounds(mean_photons) -> VisibilityBackgrounds:
    """Predicted correlation signals for equal photon number per mode.

    Thermal pairs correlate as ``<n>^2``; down-converted pairs as
    ``|UV|^2 = <n> + <n>^2``.  Both sit on the uncorrelated background
    ``<I1><I2> ~ <n>^2``.
    """
    n = np.asarray(mean_photons, dtype=float)
    if np.any(n <= 0):
        raise ParameterError("mean photon number must be positive")
    return VisibilityBackgrounds(n, n**2, n + n**2, n**2)


@dataclass(frozen=True)
class FockMoments:
    mean_photons: float
    n_mean: float
    n_var: float
    wigner_mean: float
    wigner_var: float
    tail_mass: float


def _ladder(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), k=1)


def _symmetrized(word: str, a: np.ndarray) -> np.ndarray:
    """Average over all distinct orderings of the letters of ``word`` ('c' = creation, 'a' = annihilation)."""
    ops = {"a": a, "c": a.conj().T}
    orders = set(itertools.permutations(word))
    total = np.zeros_like(a)
    for order in orders:
        m = np.eye(a.shape[0])
        for letter in order:
            m = m @ ops[letter]
        total = total + m
    return total / len(orders)


def fock_thermal_moments(mean_photons: float, n_max_fock: int) -> FockMoments:
    """Photon-number and symmetric-ordered moments of a truncated thermal state.

    Weights ``<n>^m / (1 + <n>)^(m + 1)`` for m <= n_max_fock; operators act
    on a Fock space of dimension ``n_max_fock + 3`` so the quartic
    symmetrized products are exact on the populated levels.
    """
    if not isinstance(n_max_fock, (int, np.integer)) or not 0 <= n_max_fock <= FOCK_MAX:
        raise ParameterError(f"n_max_fock must be an integer in [0, {FOCK_MAX}], got {n_max_fock!r}")
    nbar = float(mean_photons)
    if nbar < 0:
        raise ParameterError("mean photon number must be >= 0")
    ratio = nbar / (1.0 + nbar)
    tail = ratio ** (n_max_fock + 1)
    if tail > FOCK_TAIL_TOL:
        raise TruncationError(
            f"<n> = {nbar:g} leaves tail mass {tail:.3g} above n = {n_max_fock}; need <= {FOCK_TAIL_TOL:g}"
        )
    m = np.arange(n_max_fock + 1)
    p = ratio**m / (1.0 + nbar)
    p = p / p.sum()
    dim = n_max_fock + 3
    rho = np.zeros((dim, dim))
    rho[m, m] = p
    a = _ladder(dim)
    number = a.T @ a
    n_mean = float(np.trace(rho @ number))
    n_var = float(np.trace(rho @ number @ number)) - n_mean**2
    w1 = float(np.trace(rho @ _symmetrized("ca", a)))
    w2 = float(np.trace(rho @ _symmetrized("ccaa", a)))
    return FockMoments(nbar, n_mean, n_var, w1, w2 - w1**2, tail)


def fock_ordering_oracle(n_max_fock: int, mean_photons=(0.0, 0.1, 1.0, 3.0)) -> list[FockMoments]:
    """Table of :func:`fock_thermal_moments` over several mean photon numbers."""
    return [fock_thermal_moments(n, n_max_fock) for n in mean_photons]

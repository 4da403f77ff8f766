"""Intensity extraction, detector models and mergeable correlation statistics.

Ordering rules
--------------
* P-sampled fields: ``|c|^2`` is the normally ordered intensity.
* Wigner-sampled fields: subtract the per-pixel vacuum offset (see
  :func:`ghostcorr.optics.vacuum_offset`).  Cross-arm covariances need no
  further correction because the two arms commute.  Same-arm photon-number
  variances over a region of M orthonormal pixels are inflated by M/4; the
  accumulator carries that offset and removes it in
  :func:`normalized_correlation`.  This holds for unitary arms only, so
  same-arm Wigner variances are never formed behind an absorbing object.

Per-shot Wigner intensities may be negative and are never clamped, except
inside :func:`poisson_photocount`.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Literal, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    CompatibilityError,
    DomainMismatchError,
    InsufficientDataError,
    ParameterError,
    UndefinedCorrelationError,
)
from .lattice import ComplexField
from .rng import ShotBlock


@dataclass(frozen=True)
class DetectorSpec:
    """Arm-1 detector (point pixel or bucket) plus photodetection model.

    Arm 2 is always a full pixel array.
    """

    arm1: Literal["point", "bucket"] = "point"
    point_index: Optional[int] = None
    efficiency: float = 1.0
    photocounting: Literal["off", "poisson"] = "off"

    def __post_init__(self):
        if self.arm1 not in ("point", "bucket"):
            raise ParameterError(f"arm1 detector must be 'point' or 'bucket', got {self.arm1!r}")
        if not 0.0 < self.efficiency <= 1.0:
            raise ParameterError(f"efficiency must lie in (0, 1], got {self.efficiency!r}")
        if self.photocounting not in ("off", "poisson"):
            raise ParameterError(f"photocounting must be 'off' or 'poisson', got {self.photocounting!r}")

    def resolve_point(self, n_points: int) -> int:
        idx = n_points // 2 if self.point_index is None else int(self.point_index)
        if not 0 <= idx < n_points:
            raise ParameterError(f"point detector index {idx} outside lattice of {n_points}")
        return idx

    def arm1_reading(self, intensity1: np.ndarray) -> np.ndarray:
        """Scalar arm-1 reading per shot from the arm-1 intensity pattern."""
        if self.arm1 == "bucket":
            return np.sum(intensity1, axis=-1)
        return intensity1[..., self.resolve_point(intensity1.shape[-1])]


def intensity(field: ComplexField, vacuum_offset=0.0) -> np.ndarray:
    """Photons per pixel, ordering corrected.

    ``vacuum_offset`` is ignored for P-ordered fields.
    """
    if field.domain != "position":
        raise DomainMismatchError("intensity is read in a position-domain (detection) plane")
    power = np.abs(field.values) ** 2
    if field.ordering == "Wigner":
        return power - np.asarray(vacuum_offset, dtype=float)
    return power


def poisson_photocount(n_expected, efficiency: float, rng, role: str = "count1") -> np.ndarray:
    """Poisson counts with mean ``efficiency * max(n_expected, 0)``.

    Negative expectations (possible per shot after removing Wigner offsets)
    are clamped to zero here and only here.
    """
    lam = efficiency * np.clip(np.asarray(n_expected, dtype=float), 0.0, None)
    if isinstance(rng, ShotBlock):
        return rng.poisson(role, lam)
    return rng.poisson(lam)


@dataclass
class CorrelationAccumulator:
    """Running sums for G(x2) and for the pixel-pair photon statistics.

    Two accumulators combine with :meth:`merge`; ``n_shots`` and every sum
    add.  ``variance_offset`` is the same-arm Wigner variance inflation per
    arm for the pixel channel (0 for P-sampled fields).
    """

    n_points: int
    n_shots: int = 0
    sum_I1: float = 0.0
    sum_I2: np.ndarray = None
    sum_I1I2: np.ndarray = None
    n_pixel_shots: int = 0
    sum_N1: float = 0.0
    sum_N2: float = 0.0
    sum_N1sq: float = 0.0
    sum_N2sq: float = 0.0
    sum_N1N2: float = 0.0
    sum_Nminus_sq: float = 0.0
    variance_offset: float = 0.0

    def __post_init__(self):
        if self.sum_I2 is None:
            self.sum_I2 = np.zeros(self.n_points)
        if self.sum_I1I2 is None:
            self.sum_I1I2 = np.zeros(self.n_points)

    def merge(self, other: "CorrelationAccumulator") -> "CorrelationAccumulator":
        if other.n_points != self.n_points:
            raise CompatibilityError("cannot merge accumulators of different lattice size")
        if self.n_pixel_shots and other.n_pixel_shots and self.variance_offset != other.variance_offset:
            raise CompatibilityError("cannot merge pixel channels with different ordering offsets")
        out = CorrelationAccumulator(self.n_points)
        for f in fields(self):
            if f.name in ("n_points", "variance_offset"):
                continue
            setattr(out, f.name, getattr(self, f.name) + getattr(other, f.name))
        out.variance_offset = self.variance_offset if self.n_pixel_shots else other.variance_offset
        return out

    def copy(self) -> "CorrelationAccumulator":
        out = CorrelationAccumulator(self.n_points)
        for f in fields(self):
            value = getattr(self, f.name)
            setattr(out, f.name, value.copy() if isinstance(value, np.ndarray) else value)
        return out

    def to_dict(self) -> dict:
        return {
            f.name: (getattr(self, f.name).tolist() if isinstance(getattr(self, f.name), np.ndarray) else getattr(self, f.name))
            for f in fields(self)
        }


def merge_all(accumulators: Sequence[CorrelationAccumulator]) -> CorrelationAccumulator:
    """Pairwise (tree) merge in the given order; reproducible bit for bit."""
    items = list(accumulators)
    if not items:
        raise InsufficientDataError("no accumulators to merge")
    while len(items) > 1:
        nxt = [items[i].merge(items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def record_shot(acc: CorrelationAccumulator, I1_reading, I2) -> CorrelationAccumulator:
    """Add one shot (or a batch of shots) to the G channel.

    ``I1_reading`` is a scalar per shot; ``I2`` is the arm-2 pixel array with
    the shot index on the leading axis when batched.
    """
    I1 = np.atleast_1d(np.asarray(I1_reading, dtype=float))
    I2 = np.asarray(I2, dtype=float)
    if I2.ndim == 1:
        I2 = I2[None, :]
    if I2.shape[-1] != acc.n_points:
        raise CompatibilityError(f"I2 has {I2.shape[-1]} pixels, accumulator expects {acc.n_points}")
    if I1.shape[0] != I2.shape[0]:
        raise CompatibilityError(f"{I1.shape[0]} arm-1 readings for {I2.shape[0]} arm-2 frames")
    acc.n_shots += I1.shape[0]
    acc.sum_I1 += float(np.sum(I1))
    acc.sum_I2 += np.sum(I2, axis=0)
    acc.sum_I1I2 += np.sum(I1[:, None] * I2, axis=0)
    return acc


@dataclass(frozen=True)
class GEstimate:
    G: np.ndarray
    mean_I1: float
    mean_I2: np.ndarray
    visibility: np.ndarray
    n_shots: int


def finalize_G(acc: CorrelationAccumulator) -> GEstimate:
    """Fluctuation correlation ``G = <I1 I2> - <I1><I2>`` and visibility ``G / <I1 I2>``."""
    n = acc.n_shots
    if n < 2:
        raise InsufficientDataError(f"G needs at least 2 shots, got {n}")
    mean_I1 = acc.sum_I1 / n
    mean_I2 = acc.sum_I2 / n
    mean_I1I2 = acc.sum_I1I2 / n
    G = mean_I1I2 - mean_I1 * mean_I2
    visibility = np.zeros_like(G)
    ok = mean_I1I2 > 0
    visibility[ok] = G[ok] / mean_I1I2[ok]
    return GEstimate(G, mean_I1, mean_I2, visibility, n)


@dataclass(frozen=True)
class PixelCounts:
    N1: np.ndarray
    N2: np.ndarray

    @property
    def N_minus(self) -> np.ndarray:
        return self.N1 - self.N2


def region_index(region, n_points: int) -> np.ndarray:
    if isinstance(region, slice):
        idx = np.arange(n_points)[region]
    else:
        idx = np.atleast_1d(np.asarray(region, dtype=np.int64))
    if idx.size == 0:
        raise ParameterError("pixel region is empty")
    if idx.min() < 0 or idx.max() >= n_points:
        raise ParameterError(f"pixel region {idx.min()}..{idx.max()} outside lattice of {n_points}")
    return idx


def region_counts(I1: np.ndarray, I2: np.ndarray, region, region2=None) -> PixelCounts:
    """Sum detected intensities (or counts) over matching pixel regions.

    ``region`` may be a slice, an index sequence or a single index;
    ``region2`` defaults to ``region``.
    """
    n = np.shape(I1)[-1]
    if np.shape(I2)[-1] != n:
        raise CompatibilityError("pixel statistics need equally sized detection lattices")
    r1 = region_index(region, n)
    r2 = region_index(region if region2 is None else region2, n)
    if r1.size != r2.size:
        raise ParameterError("pixel regions differ in size")
    N1 = np.sum(np.asarray(I1, dtype=float)[..., r1], axis=-1)
    N2 = np.sum(np.asarray(I2, dtype=float)[..., r2], axis=-1)
    return PixelCounts(N1, N2)


def pixel_statistics(
    b1: ComplexField,
    b2: ComplexField,
    region,
    region2=None,
    offset1=0.5,
    offset2=0.5,
) -> PixelCounts:
    """Photon numbers ``N_i = sum_region I_i`` in matching pixel regions.

    ``region2`` defaults to ``region``; pass the mirrored region to pair
    symmetric far-field pixels.  Offsets apply to Wigner fields only.
    """
    if b1.grid.n_points != b2.grid.n_points:
        raise CompatibilityError("pixel statistics need fields on equally sized lattices")
    if b1.ordering != b2.ordering:
        raise CompatibilityError("pixel statistics need equally ordered fields")
    return region_counts(intensity(b1, offset1), intensity(b2, offset2), region, region2)


def record_pixels(acc: CorrelationAccumulator, counts: PixelCounts, variance_offset: float = 0.0) -> CorrelationAccumulator:
    N1 = np.atleast_1d(counts.N1).astype(float)
    N2 = np.atleast_1d(counts.N2).astype(float)
    if acc.n_pixel_shots and acc.variance_offset != variance_offset:
        raise CompatibilityError("variance offset changed between shots")
    acc.variance_offset = variance_offset
    acc.n_pixel_shots += N1.shape[0]
    acc.sum_N1 += float(np.sum(N1))
    acc.sum_N2 += float(np.sum(N2))
    acc.sum_N1sq += float(np.sum(N1 * N1))
    acc.sum_N2sq += float(np.sum(N2 * N2))
    acc.sum_N1N2 += float(np.sum(N1 * N2))
    dm = N1 - N2
    acc.sum_Nminus_sq += float(np.sum(dm * dm))
    return acc


@dataclass(frozen=True)
class CorrelationStats:
    C: float
    C_from_mean: float
    nminus_ratio: float
    mean_N1: float
    mean_N2: float
    var_N1: float
    var_N2: float
    cov_N1N2: float
    var_Nminus: float
    n_shots: int


def normalized_correlation(acc: CorrelationAccumulator) -> CorrelationStats:
    """C = cov(N1, N2) / sqrt(var N1 var N2) plus the shot-noise ratio.

    Also reports ``1 - <N1>/var(N1)``, which equals C for a balanced
    splitter, and ``var(N_-) / (<N1> + <N2>)`` (1 at the shot-noise level).
    """
    n = acc.n_pixel_shots
    if n < 2:
        raise InsufficientDataError(f"pixel statistics need at least 2 shots, got {n}")
    m1 = acc.sum_N1 / n
    m2 = acc.sum_N2 / n
    off = acc.variance_offset
    v1 = acc.sum_N1sq / n - m1 * m1 - off
    v2 = acc.sum_N2sq / n - m2 * m2 - off
    c12 = acc.sum_N1N2 / n - m1 * m2
    vm = acc.sum_Nminus_sq / n - (m1 - m2) ** 2 - 2.0 * off
    if not (v1 > 0 and v2 > 0):
        raise UndefinedCorrelationError(f"photon-number variances must be positive (got {v1:g}, {v2:g})")
    total = m1 + m2
    return CorrelationStats(
        C=c12 / np.sqrt(v1 * v2),
        C_from_mean=1.0 - m1 / v1,
        nminus_ratio=vm / total if total > 0 else float("nan"),
        mean_N1=m1,
        mean_N2=m2,
        var_N1=v1,
        var_N2=v2,
        cov_N1N2=c12,
        var_Nminus=vm,
        n_shots=n,
    )


class IntensityCorrelator(BaseEstimator):
    """Streaming estimator of the intensity-fluctuation correlation G(x2).

    ``partial_fit`` consumes batches of shots (arm-1 readings and arm-2
    frames) and may be called any number of times; ``fit`` starts afresh.

    Parameters
    ----------
    min_shots : int, default=2
        Shots required before the fitted attributes are formed.

    Attributes
    ----------
    G_ : ndarray of shape (n_pixels,)
    visibility_ : ndarray of shape (n_pixels,)
    mean_I1_ : float
    mean_I2_ : ndarray of shape (n_pixels,)
    n_shots_ : int
    accumulator_ : CorrelationAccumulator
    """

    def __init__(self, min_shots: int = 2):
        self.min_shots = min_shots

    def fit(self, I1, I2):
        for attr in ("accumulator_", "G_", "visibility_", "mean_I1_", "mean_I2_", "n_shots_"):
            self.__dict__.pop(attr, None)
        return self.partial_fit(I1, I2)

    def partial_fit(self, I1, I2):
        I2 = check_array(I2, ensure_2d=True, dtype=np.float64, ensure_all_finite=True)
        I1 = check_array(np.reshape(I1, (-1, 1)), dtype=np.float64, ensure_all_finite=True)[:, 0]
        if not hasattr(self, "accumulator_"):
            self.accumulator_ = CorrelationAccumulator(I2.shape[1])
        record_shot(self.accumulator_, I1, I2)
        self._refresh()
        return self

    def merge(self, other: "IntensityCorrelator") -> "IntensityCorrelator":
        check_is_fitted(other, "accumulator_")
        if not hasattr(self, "accumulator_"):
            self.accumulator_ = other.accumulator_.copy()
        else:
            self.accumulator_ = self.accumulator_.merge(other.accumulator_)
        self._refresh()
        return self

    def _refresh(self):
        acc = self.accumulator_
        self.n_shots_ = acc.n_shots
        if acc.n_shots >= max(self.min_shots, 2):
            est = finalize_G(acc)
            self.G_ = est.G
            self.visibility_ = est.visibility
            self.mean_I1_ = est.mean_I1
            self.mean_I2_ = est.mean_I2

    def transform(self, I2=None):
        """Return the current G estimate (``I2`` is accepted for pipeline use and ignored)."""
        check_is_fitted(self, "G_")
        return self.G_

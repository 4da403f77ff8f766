"""Flat ``key = value`` experiment configuration and its validation.

File format
-----------
One ``key = value`` pair per line; ``#`` starts a comment; blank lines are
ignored.  Keys are dotted and grouped by section::

    experiment          thermal-ff | thermal-2f | pdc-ff | pdc-2f | statistics
    grid.n_points       power of two
    grid.dx             lattice spacing [m]
    grid.wavelength     [m]
    source.n_max        thermal peak photons per mode
    source.ordering     P | Wigner (thermal only; PDC is always Wigner)
    source.g            PDC peak gain (or source.n_peak = sinh(g)^2)
    source.delta_q      bandwidth [rad/m] (or source.l_coh = 2 pi / delta_q [m])
    splitter.r          complex, e.g. 0.7071067811865476
    splitter.t          complex, e.g. 0.7071067811865476j
    geometry.f          focal length [m]
    object.kind         none | double-slit | slit | file
    object.width        slit width [m]
    object.separation   slit centre separation [m] (double-slit)
    object.path         transmission file, one (complex) value per line or .npy
    detector.arm1       point | bucket
    detector.point_index  arm-1 pixel (default N/2, i.e. x1 = 0)
    detector.photocounting  off | poisson
    detector.efficiency (0, 1]
    detector.region     pixel region for photon statistics: "i", "i:j" or "i,j,k"
    detector.plane      near | far (statistics experiment)
    statistics.source   thermal | pdc (statistics experiment)
    run.shots, run.master_seed, run.threads, run.deterministic, run.block_size
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..exceptions import ConfigurationError, ParameterError
from ..lattice import TransverseGrid
from ..optics import double_slit
from ..sources import splitter_violations

EXPERIMENTS = ("thermal-ff", "thermal-2f", "pdc-ff", "pdc-2f", "statistics")
OBJECT_KINDS = ("none", "double-slit", "slit", "file")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _parse_complex(text: str) -> complex:
    return complex(text.strip().replace(" ", ""))


_PARSERS = {str: str.strip, int: _parse_int, float: float, complex: _parse_complex, bool: _parse_bool}

# file key -> (attribute, type)
KEYS = {
    "experiment": ("experiment", str),
    "grid.n_points": ("n_points", int),
    "grid.dx": ("dx", float),
    "grid.wavelength": ("wavelength", float),
    "source.n_max": ("n_max", float),
    "source.ordering": ("ordering", str),
    "source.g": ("g", float),
    "source.n_peak": ("n_peak", float),
    "source.delta_q": ("delta_q", float),
    "source.l_coh": ("l_coh", float),
    "splitter.r": ("r", complex),
    "splitter.t": ("t", complex),
    "geometry.f": ("focal_length", float),
    "object.kind": ("object_kind", str),
    "object.width": ("object_width", float),
    "object.separation": ("object_separation", float),
    "object.path": ("object_path", str),
    "detector.arm1": ("arm1", str),
    "detector.point_index": ("point_index", int),
    "detector.photocounting": ("photocounting", str),
    "detector.efficiency": ("efficiency", float),
    "detector.region": ("region", str),
    "detector.plane": ("plane", str),
    "statistics.source": ("stats_source", str),
    "run.shots": ("shots", int),
    "run.master_seed": ("master_seed", int),
    "run.threads": ("threads", int),
    "run.deterministic": ("deterministic", bool),
    "run.block_size": ("block_size", int),
}
ATTR_TO_KEY = {attr: key for key, (attr, _) in KEYS.items()}


@dataclass(frozen=True)
class Violation:
    """One broken invariant, with a machine-readable ``code``."""

    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Every parameter of a run; defaults reproduce the thermal f-f double slit."""

    experiment: str = "thermal-ff"
    n_points: int = 512
    dx: float = 4e-6
    wavelength: float = 702e-9
    n_max: Optional[float] = None
    ordering: str = "P"
    g: Optional[float] = None
    n_peak: Optional[float] = None
    delta_q: Optional[float] = None
    l_coh: Optional[float] = None
    r: complex = complex(1.0 / math.sqrt(2.0))
    t: complex = 1j / math.sqrt(2.0)
    focal_length: float = 0.05
    object_kind: str = "none"
    object_width: Optional[float] = None
    object_separation: Optional[float] = None
    object_path: Optional[str] = None
    arm1: str = "point"
    point_index: Optional[int] = None
    photocounting: str = "off"
    efficiency: float = 1.0
    region: Optional[str] = None
    plane: str = "near"
    stats_source: str = "thermal"
    shots: int = 10000
    master_seed: int = 0
    threads: int = 1
    deterministic: bool = False
    block_size: int = 256
    base_dir: str = field(default=".", compare=False)

    @property
    def source_kind(self) -> str:
        if self.experiment == "statistics":
            return self.stats_source
        return self.experiment.split("-")[0]

    @property
    def source_ordering(self) -> str:
        return "Wigner" if self.source_kind == "pdc" else self.ordering

    def bandwidth(self) -> float:
        """delta_q, from either ``source.delta_q`` or ``source.l_coh``."""
        if self.delta_q is not None:
            return float(self.delta_q)
        if self.l_coh is not None:
            return 2.0 * math.pi / float(self.l_coh)
        raise ConfigurationError("source bandwidth missing: set source.delta_q or source.l_coh")

    def gain(self) -> float:
        if self.g is not None:
            return float(self.g)
        if self.n_peak is not None:
            return float(np.arcsinh(np.sqrt(self.n_peak)))
        raise ConfigurationError("PDC gain missing: set source.g or source.n_peak")

    def resolve_path(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_flat(self) -> dict[str, Any]:
        """Dotted-key mapping; parsing it back reproduces this config."""
        out: dict[str, Any] = {}
        for f in fields(self):
            if f.name not in ATTR_TO_KEY:
                continue
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, complex):
                value = repr(value)
            out[ATTR_TO_KEY[f.name]] = value
        return out

    def to_text(self) -> str:
        lines = [f"{key} = {_format_value(value)}" for key, value in self.to_flat().items()]
        return "\n".join(lines) + "\n"


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_pairs(text: str) -> tuple[dict[str, str], list[Violation]]:
    """Split config text into raw key/value strings, collecting syntax problems."""
    pairs: dict[str, str] = {}
    problems: list[Violation] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(Violation("SYNTAX", f"line {lineno}: expected 'key = value', got {raw.strip()!r}"))
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in pairs:
            problems.append(Violation("DUPLICATE_KEY", f"line {lineno}: {key} given twice"))
        pairs[key] = value
    return pairs, problems


def from_flat(pairs: dict[str, Any], base_dir: str = ".") -> tuple[ExperimentConfig, list[Violation]]:
    """Typed config from a key/value mapping; unparsable entries become violations."""
    values: dict[str, Any] = {}
    problems: list[Violation] = []
    for key, raw in pairs.items():
        if key not in KEYS:
            problems.append(Violation("UNKNOWN_KEY", f"unknown key {key!r}"))
            continue
        attr, kind = KEYS[key]
        try:
            if isinstance(raw, str):
                values[attr] = _PARSERS[kind](raw)
            elif kind is complex:
                values[attr] = complex(raw) if not isinstance(raw, str) else _parse_complex(raw)
            elif kind is int and isinstance(raw, float):
                values[attr] = _parse_int(repr(raw))
            else:
                values[attr] = kind(raw)
        except (TypeError, ValueError) as exc:
            problems.append(Violation("BAD_VALUE", f"{key}: {exc}"))
    return ExperimentConfig(base_dir=base_dir, **values), problems


def parse_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    """Parse config text; raises ConfigurationError on syntax or type errors."""
    pairs, problems = parse_pairs(text)
    config, more = from_flat(pairs, base_dir)
    problems += more
    if problems:
        raise ConfigurationError("; ".join(str(p) for p in problems))
    return config


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=str(path.parent))


def parse_region(spec: Optional[str], n_points: int):
    """Pixel region from ``"i"``, ``"i:j"`` or ``"i,j,k"``; defaults to the centre pixel."""
    if spec is None or not str(spec).strip():
        return np.array([n_points // 2])
    text = str(spec).strip()
    if ":" in text:
        lo, hi = (int(part) for part in text.split(":", 1))
        return np.arange(lo, hi)
    return np.array([int(part) for part in text.split(",")])


def validate(config: ExperimentConfig) -> list[Violation]:
    """Every violated invariant; an empty list means :func:`run` would start.

    Never raises.
    """
    out: list[Violation] = []

    def bad(code, message):
        out.append(Violation(code, message))

    try:
        _validate_into(config, bad)
    except Exception as exc:  # validation must never throw
        bad("INTERNAL", f"{type(exc).__name__}: {exc}")
    return out


def _validate_into(c: ExperimentConfig, bad) -> None:
    if c.experiment not in EXPERIMENTS:
        bad("UNKNOWN_EXPERIMENT", f"experiment must be one of {', '.join(EXPERIMENTS)}, got {c.experiment!r}")
        return
    n = c.n_points
    grid_ok = True
    if not isinstance(n, int) or n < 2 or n & (n - 1):
        bad("GRID_NOT_POWER_OF_TWO", f"grid.n_points must be a power of two >= 2, got {n!r}")
        grid_ok = False
    if not c.dx > 0:
        bad("GRID_SPACING_NONPOSITIVE", f"grid.dx must be positive, got {c.dx!r}")
        grid_ok = False
    if not c.wavelength > 0:
        bad("WAVELENGTH_NONPOSITIVE", f"grid.wavelength must be positive, got {c.wavelength!r}")
    if not c.focal_length > 0:
        bad("FOCAL_LENGTH_NONPOSITIVE", f"geometry.f must be positive, got {c.focal_length!r}")

    source = c.source_kind
    if c.experiment == "statistics" and source not in ("thermal", "pdc"):
        bad("UNKNOWN_SOURCE", f"statistics.source must be thermal or pdc, got {c.stats_source!r}")
        return
    if c.delta_q is None and c.l_coh is None:
        bad("SOURCE_BANDWIDTH_MISSING", "set source.delta_q or source.l_coh")
    elif c.delta_q is not None and c.l_coh is not None:
        bad("SOURCE_BANDWIDTH_AMBIGUOUS", "set only one of source.delta_q and source.l_coh")
    elif not (c.delta_q if c.delta_q is not None else c.l_coh) > 0:
        bad("SOURCE_BANDWIDTH_NONPOSITIVE", "source bandwidth must be positive")
    if source == "thermal":
        if c.n_max is None:
            bad("SOURCE_PHOTONS_MISSING", "thermal source needs source.n_max")
        elif not c.n_max >= 0:
            bad("SOURCE_PHOTONS_NEGATIVE", f"source.n_max must be >= 0, got {c.n_max!r}")
        if c.ordering not in ("P", "Wigner"):
            bad("UNKNOWN_ORDERING", f"source.ordering must be P or Wigner, got {c.ordering!r}")
    else:
        if c.g is None and c.n_peak is None:
            bad("SOURCE_GAIN_MISSING", "PDC source needs source.g or source.n_peak")
        elif c.g is not None and c.n_peak is not None:
            bad("SOURCE_GAIN_AMBIGUOUS", "set only one of source.g and source.n_peak")
        elif not (c.g if c.g is not None else c.n_peak) >= 0:
            bad("SOURCE_GAIN_NEGATIVE", "PDC gain must be >= 0")

    if source == "thermal" or c.experiment == "statistics":
        for problem in splitter_violations(complex(c.r), complex(c.t)):
            code = "SPLITTER_NOT_UNITARY" if problem.startswith("|r|") else "SPLITTER_ARMS_NOT_COMMUTING"
            bad(code, problem)

    if c.object_kind not in OBJECT_KINDS:
        bad("UNKNOWN_OBJECT", f"object.kind must be one of {', '.join(OBJECT_KINDS)}, got {c.object_kind!r}")
    elif c.experiment == "statistics" and c.object_kind != "none":
        bad("OBJECT_NOT_ALLOWED", "the statistics experiment uses lossless arms; set object.kind = none")
    elif grid_ok:
        _validate_object(c, bad)

    if c.arm1 not in ("point", "bucket"):
        bad("UNKNOWN_DETECTOR", f"detector.arm1 must be point or bucket, got {c.arm1!r}")
    if c.point_index is not None and grid_ok and not 0 <= c.point_index < n:
        bad("DETECTOR_INDEX_OUT_OF_RANGE", f"detector.point_index {c.point_index} outside 0..{n - 1}")
    if not 0 < c.efficiency <= 1:
        bad("EFFICIENCY_OUT_OF_RANGE", f"detector.efficiency must lie in (0, 1], got {c.efficiency!r}")
    if c.photocounting not in ("off", "poisson"):
        bad("UNKNOWN_PHOTOCOUNTING", f"detector.photocounting must be off or poisson, got {c.photocounting!r}")
    elif c.photocounting == "poisson" and c.source_ordering != "P":
        bad(
            "PHOTOCOUNTING_REQUIRES_P_ORDERING",
            "Poisson photocounting needs nonnegative P-sampled intensities; Wigner samples are not intensities",
        )
    if c.plane not in ("near", "far"):
        bad("UNKNOWN_PLANE", f"detector.plane must be near or far, got {c.plane!r}")
    if grid_ok:
        try:
            region = parse_region(c.region, n)
        except ValueError as exc:
            bad("BAD_REGION", f"detector.region: {exc}")
        else:
            if region.size == 0:
                bad("BAD_REGION", "detector.region is empty")
            elif region.min() < 0 or region.max() >= n:
                bad("REGION_OUT_OF_RANGE", f"detector.region spans {region.min()}..{region.max()}, lattice 0..{n - 1}")
            elif c.experiment == "statistics" and c.plane == "far" and source == "pdc" and np.any(region == 0):
                bad("REGION_OUT_OF_RANGE", "pixel 0 has no symmetric partner on the lattice")

    if not c.shots >= 2:
        bad("INSUFFICIENT_SHOTS", f"run.shots must be >= 2 to estimate a covariance, got {c.shots!r}")
    if not 0 <= c.master_seed < 2**64:
        bad("SEED_OUT_OF_RANGE", f"run.master_seed must fit in 64 unsigned bits, got {c.master_seed!r}")
    if not c.threads >= 1:
        bad("THREADS_NONPOSITIVE", f"run.threads must be >= 1, got {c.threads!r}")
    if not c.block_size >= 1:
        bad("BLOCK_SIZE_NONPOSITIVE", f"run.block_size must be >= 1, got {c.block_size!r}")


def _validate_object(c: ExperimentConfig, bad) -> None:
    extent = c.n_points * c.dx
    kind = c.object_kind
    if kind == "double-slit":
        w, d = c.object_width, c.object_separation
        if w is None or d is None:
            bad("OBJECT_PARAMETER_MISSING", "double slit needs object.width and object.separation")
            return
        if not (w > 0 and d > 0):
            bad("OBJECT_PARAMETER_NONPOSITIVE", "slit width and separation must be positive")
            return
        if d + w >= extent or d >= extent:
            bad("OBJECT_EXCEEDS_GRID", f"d + w = {d + w:g} m does not fit in the grid extent {extent:g} m")
            return
        if w >= d:
            bad("OBJECT_OVERLAP", f"slit width {w:g} m >= separation {d:g} m")
            return
        if round(w / c.dx) < 1:
            bad("OBJECT_BELOW_RESOLUTION", f"slit width {w:g} m is below one lattice cell {c.dx:g} m")
            return
        try:
            double_slit(TransverseGrid(c.n_points, c.dx, 1.0), w, d)
        except ParameterError as exc:
            bad("OBJECT_EXCEEDS_GRID" if "exceeds" in str(exc) else "OBJECT_OVERLAP", str(exc))
    elif kind == "slit":
        w = c.object_width
        if w is None:
            bad("OBJECT_PARAMETER_MISSING", "slit needs object.width")
        elif not w > 0:
            bad("OBJECT_PARAMETER_NONPOSITIVE", "slit width must be positive")
        elif w >= extent:
            bad("OBJECT_EXCEEDS_GRID", f"slit width {w:g} m does not fit in the grid extent {extent:g} m")
        elif round(w / c.dx) < 1:
            bad("OBJECT_BELOW_RESOLUTION", f"slit width {w:g} m is below one lattice cell {c.dx:g} m")
    elif kind == "file":
        if not c.object_path:
            bad("OBJECT_PARAMETER_MISSING", "object.kind = file needs object.path")
            return
        path = c.resolve_path(c.object_path)
        if not path.is_file():
            bad("OBJECT_FILE_MISSING", f"object file {str(path)!r} not found")
            return
        try:
            t = load_mask_values(path)
        except (OSError, ValueError) as exc:
            bad("OBJECT_FILE_UNREADABLE", f"{path}: {exc}")
            return
        if t.shape != (c.n_points,):
            bad("OBJECT_SHAPE_MISMATCH", f"object file holds {t.size} values, grid has {c.n_points}")
        elif np.any(np.abs(t) > 1 + 1e-12):
            bad("OBJECT_TRANSMISSION_EXCEEDS_UNITY", "object transmission exceeds unity")


def load_mask_values(path) -> np.ndarray:
    """Transmission values from ``.npy`` or from text (one real or complex number per line)."""
    path = Path(path)
    if path.suffix == ".npy":
        values = np.load(path, allow_pickle=False)
    else:
        values = np.loadtxt(path, dtype=np.complex128, comments="#", ndmin=1)
    return np.asarray(values, dtype=np.complex128).ravel()


def require_valid(config: ExperimentConfig) -> None:
    """Raise ConfigurationError listing every violation code."""
    problems = validate(config)
    if problems:
        raise ConfigurationError("invalid configuration: " + "; ".join(str(p) for p in problems))


__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "KEYS",
    "Violation",
    "from_flat",
    "load_config",
    "load_mask_values",
    "parse_config",
    "parse_region",
    "require_valid",
    "validate",
]

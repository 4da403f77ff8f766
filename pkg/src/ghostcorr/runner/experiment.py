"""Shot-parallel Monte-Carlo driver.

Shots are processed in fixed blocks of ``run.block_size``.  Each block draws
from its own counter-based streams (shot index, role), so its accumulator does
not depend on which worker ran it.  In deterministic mode block accumulators
are merged in block order by a fixed pairwise tree, which makes the output
independent of the thread count bit for bit; otherwise they are merged in
completion order.
"""

from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .. import __version__
from ..detection import (
    CorrelationAccumulator,
    DetectorSpec,
    GEstimate,
    finalize_G,
    intensity,
    merge_all,
    normalized_correlation,
    poisson_photocount,
    record_pixels,
    record_shot,
    region_counts,
)
from ..exceptions import ConfigurationError, InsufficientDataError, UndefinedCorrelationError
from ..lattice import TransverseGrid, to_position
from ..optics import ImagingArm, ObjectMask, double_slit, propagate, single_slit, vacuum_offset
from ..oracles import (
    GeometrySpec,
    analytic_G_ff_bucket,
    analytic_G_pdc_2f,
    analytic_G_pdc_ff,
    analytic_G_thermal_2f,
    analytic_G_thermal_ff,
    quadrature_G_pdc,
    quadrature_G_thermal,
)
from ..rng import ShotBlock, ShotStreams
from ..sources import BeamSplitter, PdcGain, ThermalSpectrum, sample_pdc_pair, sample_thermal, sample_vacuum, split
from .config import ExperimentConfig, from_flat, load_mask_values, parse_region, validate


@dataclass(frozen=True)
class Plan:
    """Physical objects resolved from a validated config."""

    config: ExperimentConfig
    grid: TransverseGrid
    arm1: ImagingArm
    arm2: ImagingArm
    mask: Optional[ObjectMask]
    splitter: BeamSplitter
    spectrum: Optional[ThermalSpectrum]
    gain: Optional[PdcGain]
    detector: DetectorSpec
    region1: np.ndarray
    region2: np.ndarray
    offset1: np.ndarray
    offset2: np.ndarray

    @property
    def statistics(self) -> bool:
        return self.config.experiment == "statistics"

    @property
    def ordering(self) -> str:
        return self.config.source_ordering

    @property
    def detection_grid(self) -> TransverseGrid:
        return self.arm2.detection_grid(self.grid)

    @property
    def variance_offset(self) -> float:
        """Same-arm Wigner variance inflation of the region photon number."""
        if self.ordering != "Wigner":
            return 0.0
        return self.config.efficiency**2 * self.region1.size / 4.0


def build_mask(config: ExperimentConfig, grid: TransverseGrid) -> Optional[ObjectMask]:
    kind = config.object_kind
    if kind == "double-slit":
        return double_slit(grid, config.object_width, config.object_separation)
    if kind == "slit":
        return single_slit(grid, config.object_width)
    if kind == "file":
        return ObjectMask(grid, load_mask_values(config.resolve_path(config.object_path)))
    return None


def build_plan(config: ExperimentConfig) -> Plan:
    """Resolve a config into grids, arms and sources; raises on any violation."""
    if config.shots < 2:
        raise InsufficientDataError(f"run.shots = {config.shots}: a covariance needs at least 2 shots")
    problems = validate(config)
    if problems:
        raise ConfigurationError("invalid configuration: " + "; ".join(str(p) for p in problems))
    c = config
    grid = TransverseGrid(c.n_points, c.dx, c.wavelength)
    mask = build_mask(c, grid)
    f = c.focal_length
    if c.experiment == "statistics":
        kind = "Identity" if c.plane == "near" else "FourierArm"
        arm1 = ImagingArm(kind, None if kind == "Identity" else f)
        arm2 = arm1
    else:
        arm1 = ImagingArm("FourierArm", f, mask)
        arm2 = ImagingArm("FourierArm" if c.experiment.endswith("-ff") else "Imaging2f", f)
    spectrum = gain = None
    if c.source_kind == "thermal":
        spectrum = ThermalSpectrum(c.n_max, c.bandwidth())
    else:
        gain = PdcGain(c.gain(), c.bandwidth())
    region1 = parse_region(c.region, c.n_points)
    pair_far_pdc = c.experiment == "statistics" and c.plane == "far" and c.source_kind == "pdc"
    region2 = grid.reflection_index()[region1] if pair_far_pdc else region1
    return Plan(
        config=c,
        grid=grid,
        arm1=arm1,
        arm2=arm2,
        mask=mask,
        splitter=BeamSplitter(c.r, c.t),
        spectrum=spectrum,
        gain=gain,
        detector=DetectorSpec(c.arm1, c.point_index, c.efficiency, c.photocounting),
        region1=region1,
        region2=region2,
        offset1=vacuum_offset(arm1, grid),
        offset2=vacuum_offset(arm2, grid),
    )


def _detect(plan: Plan, I: np.ndarray, block: ShotBlock, role: str) -> np.ndarray:
    eta = plan.detector.efficiency
    if plan.detector.photocounting == "poisson":
        return poisson_photocount(I, eta, block, role).astype(float)
    return eta * I


def simulate_block(plan: Plan, block: ShotBlock) -> CorrelationAccumulator:
    """Run every shot of ``block`` and return its private accumulator."""
    grid = plan.grid
    if plan.spectrum is not None:
        a = sample_thermal(grid, plan.spectrum, plan.ordering, block)
        v = sample_vacuum(grid, plan.ordering, block)
        b1, b2 = split(a, v, plan.splitter)
    else:
        b1, b2 = sample_pdc_pair(grid, plan.gain, block)
    c1 = propagate(to_position(b1), plan.arm1)
    c2 = propagate(to_position(b2), plan.arm2)
    I1 = _detect(plan, intensity(c1, plan.offset1), block, "count1")
    I2 = _detect(plan, intensity(c2, plan.offset2), block, "count2")
    acc = CorrelationAccumulator(grid.n_points)
    if plan.statistics:
        counts = region_counts(I1, I2, plan.region1, plan.region2)
        record_shot(acc, counts.N1, I2)
        record_pixels(acc, counts, plan.variance_offset)
    else:
        record_shot(acc, plan.detector.arm1_reading(I1), I2)
    return acc


def shot_blocks(n_shots: int, block_size: int) -> list[tuple[int, int]]:
    return [(start, min(start + block_size, n_shots)) for start in range(0, n_shots, block_size)]


def accumulate(plan: Plan) -> CorrelationAccumulator:
    """All shots of the run, merged per the determinism policy."""
    c = plan.config
    blocks = shot_blocks(c.shots, c.block_size)
    local = threading.local()

    def work(index: int) -> tuple[int, CorrelationAccumulator]:
        streams = getattr(local, "streams", None)
        if streams is None:
            streams = local.streams = ShotStreams(c.master_seed)
        lo, hi = blocks[index]
        return index, simulate_block(plan, ShotBlock(streams, np.arange(lo, hi)))

    if c.threads == 1:
        results = [work(i)[1] for i in range(len(blocks))]
        return merge_all(results)
    with ThreadPoolExecutor(max_workers=c.threads) as pool:
        futures = [pool.submit(work, i) for i in range(len(blocks))]
        if c.deterministic:
            ordered = [None] * len(blocks)
            for fut in futures:
                index, acc = fut.result()
                ordered[index] = acc
            return merge_all(ordered)
        total = None
        for fut in as_completed(futures):
            _, acc = fut.result()
            total = acc if total is None else total.merge(acc)
        return total


@dataclass(frozen=True)
class OracleOutput:
    G: np.ndarray
    approx: Optional[np.ndarray] = None
    image: Optional[np.ndarray] = None


def evaluate_oracle(plan: Plan) -> OracleOutput:
    """Closed-form G over the arm-2 detection lattice for this plan."""
    c = plan.config
    grid = plan.grid
    eta2 = c.efficiency**2
    rt2 = abs(plan.splitter.r * plan.splitter.t) ** 2
    if plan.statistics:
        if plan.spectrum is not None:
            full = quadrature_G_thermal(plan.spectrum, plan.arm1, plan.arm2, grid, rt2)
        else:
            full = quadrature_G_pdc(plan.gain, plan.arm1, plan.arm2, grid)
        return OracleOutput(eta2 * full[plan.region1].sum(axis=0))
    mask = plan.mask if plan.mask is not None else ObjectMask(grid, np.ones(grid.n_points))
    geom = GeometrySpec(c.wavelength, c.focal_length, rt2 if plan.spectrum is not None else 0.25)
    thermal = plan.spectrum is not None
    image = np.abs(mask.transmission[grid.reflection_index()]) ** 2
    if c.arm1 == "bucket":
        if c.experiment.endswith("-ff"):
            weights = plan.spectrum.mean_photons(grid.q) if thermal else plan.gain.pair_amplitude(grid.q)
            G = analytic_G_ff_bucket(weights, mask, rt2 if thermal else 1.0, pdc=not thermal)
            return OracleOutput(eta2 * G)
        arm1 = ImagingArm("FourierArm", c.focal_length, mask)
        if thermal:
            full = quadrature_G_thermal(plan.spectrum, arm1, plan.arm2, grid, rt2)
        else:
            full = quadrature_G_pdc(plan.gain, arm1, plan.arm2, grid)
        return OracleOutput(eta2 * full.sum(axis=0), image=image)
    x1 = plan.arm1.detection_grid(grid).x[plan.detector.resolve_point(grid.n_points)]
    if c.experiment.endswith("-ff"):
        if thermal:
            G = analytic_G_thermal_ff(plan.spectrum, mask, geom, x1)
        else:
            G = analytic_G_pdc_ff(plan.gain, mask, geom, x1)
        return OracleOutput(eta2 * G)
    if thermal:
        img = analytic_G_thermal_2f(plan.spectrum, mask, geom, x1)
    else:
        img = analytic_G_pdc_2f(plan.gain, mask, geom, x1)
    return OracleOutput(eta2 * img.exact, eta2 * img.approx, image)


def normalized_l2(estimate, reference) -> float:
    """||estimate - reference|| / ||reference||."""
    reference = np.asarray(reference, dtype=float)
    norm = np.linalg.norm(reference)
    if norm == 0:
        return float("nan")
    return float(np.linalg.norm(np.asarray(estimate, dtype=float) - reference) / norm)


def peak_normalized_l2(estimate, reference) -> float:
    """Shape error after scaling both curves to unit peak.

    The peak level of ``estimate`` is its mean over the pixels where
    ``reference`` is maximal, which avoids the upward bias of taking the
    maximum of a noisy curve.
    """
    reference = np.asarray(reference, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    top = reference.max()
    if top <= 0:
        return float("nan")
    plateau = reference >= top * (1.0 - 1e-9)
    level = estimate[plateau].mean()
    if level == 0:
        return float("nan")
    return normalized_l2(estimate / level, reference / top)


@dataclass
class RunOutput:
    config: ExperimentConfig
    x2_index: np.ndarray
    x2_meters: np.ndarray
    estimate: GEstimate
    oracle: OracleOutput
    stats: dict
    accumulator: CorrelationAccumulator
    manifest: dict = field(default_factory=dict)

    @property
    def G_mc(self) -> np.ndarray:
        return self.estimate.G

    @property
    def G_oracle(self) -> np.ndarray:
        return self.oracle.G


def summarize(plan: Plan, acc: CorrelationAccumulator, est: GEstimate, oracle: OracleOutput) -> dict:
    peak = int(np.argmax(oracle.G))
    stats = {
        "n_shots": est.n_shots,
        "mean_I1": est.mean_I1,
        "mean_I2_total": float(np.sum(est.mean_I2)),
        "mean_I2_at_peak": float(est.mean_I2[peak]),
        "G_mc_at_peak": float(est.G[peak]),
        "G_oracle_at_peak": float(oracle.G[peak]),
        "visibility_at_peak": float(est.visibility[peak]),
        "peak_index": peak,
        "l2_error": normalized_l2(est.G, oracle.G),
    }
    if oracle.image is not None:
        stats["image_l2"] = peak_normalized_l2(est.G, oracle.image)
        stats["oracle_image_l2"] = peak_normalized_l2(oracle.G, oracle.image)
    if oracle.approx is not None:
        stats["oracle_approx_l2"] = peak_normalized_l2(oracle.G, oracle.approx)
    C = ratio = float("nan")
    if plan.statistics:
        try:
            corr = normalized_correlation(acc)
        except UndefinedCorrelationError:
            corr = None
        if corr is not None:
            C, ratio = corr.C, corr.nminus_ratio
            stats.update(
                C_from_mean=corr.C_from_mean,
                mean_N1=corr.mean_N1,
                mean_N2=corr.mean_N2,
                var_N1=corr.var_N1,
                var_N2=corr.var_N2,
                cov_N1N2=corr.cov_N1N2,
                var_Nminus=corr.var_Nminus,
            )
    stats["C"] = C
    stats["Nminus_ratio"] = ratio
    return stats


def manifest_for(config: ExperimentConfig, wall_time: float) -> dict:
    flat = config.to_flat()
    if config.object_path:
        flat["object.path"] = str(config.resolve_path(config.object_path).resolve())
    return {
        "code_version": __version__,
        "config": flat,
        "experiment": config.experiment,
        "master_seed": config.master_seed,
        "shots": config.shots,
        "threads": config.threads,
        "deterministic": config.deterministic,
        "wall_time_s": wall_time,
    }


def run(config: ExperimentConfig, out_dir=None) -> RunOutput:
    """Simulate, finalize, evaluate the oracle and optionally write outputs."""
    start = time.perf_counter()
    plan = build_plan(config)
    acc = accumulate(plan)
    est = finalize_G(acc)
    oracle = evaluate_oracle(plan)
    stats = summarize(plan, acc, est, oracle)
    det = plan.detection_grid
    out = RunOutput(
        config=config,
        x2_index=np.arange(det.n_points),
        x2_meters=det.x,
        estimate=est,
        oracle=oracle,
        stats=stats,
        accumulator=acc,
    )
    out.manifest = manifest_for(config, time.perf_counter() - start)
    if out_dir is not None:
        write_outputs(out, out_dir)
    return out


FLOAT_FMT = "%.16e"


def format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FMT % float(value)


def write_g_csv(path, output: RunOutput) -> None:
    c = output.config
    lines = [
        "# ghostcorr intensity-fluctuation correlation",
        f"# experiment: {c.experiment}; shots: {output.estimate.n_shots}; master_seed: {c.master_seed}",
        "# x2_index,x2_meters,G_mc,G_oracle,visibility",
    ]
    for k in range(len(output.x2_index)):
        row = (
            output.x2_index[k],
            output.x2_meters[k],
            output.estimate.G[k],
            output.oracle.G[k],
            output.estimate.visibility[k],
        )
        lines.append(",".join(format_number(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_stats_csv(path, output: RunOutput) -> None:
    lines = ["# ghostcorr run statistics", "# name,value"]
    lines += [f"{name},{format_number(value)}" for name, value in output.stats.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def write_outputs(output: RunOutput, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_g_csv(out_dir / "G.csv", output)
    write_stats_csv(out_dir / "stats.csv", output)
    (out_dir / "manifest.json").write_text(json.dumps(output.manifest, indent=2, sort_keys=True) + "\n")
    return out_dir


def read_csv(path) -> np.ndarray:
    """Numeric body of a G.csv or oracle.csv file."""
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


def read_stats(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        name, value = line.split(",", 1)
        out[name] = float(value)
    return out


def config_from_manifest(path) -> ExperimentConfig:
    """Rebuild the run config from a manifest.json."""
    data = json.loads(Path(path).read_text())
    config, problems = from_flat(data["config"], base_dir=str(Path(path).parent))
    if problems:
        raise ConfigurationError("; ".join(str(p) for p in problems))
    return config


class GhostImagingExperiment(BaseEstimator):
    """Estimator-style wrapper around :func:`run`.

    ``fit`` runs the Monte-Carlo experiment described by ``config`` (with the
    optional overrides); ``score`` is ``1 - l2_error`` against the oracle.

    Parameters
    ----------
    config : ExperimentConfig
    shots, master_seed, threads : int, optional
        Override the corresponding ``run.*`` entries.
    deterministic : bool, optional
    """

    def __init__(self, config=None, shots=None, master_seed=None, threads=None, deterministic=None):
        self.config = config
        self.shots = shots
        self.master_seed = master_seed
        self.threads = threads
        self.deterministic = deterministic

    def _resolved_config(self) -> ExperimentConfig:
        base = self.config if self.config is not None else ExperimentConfig()
        return base.with_overrides(
            shots=self.shots,
            master_seed=self.master_seed,
            threads=self.threads,
            deterministic=self.deterministic,
        )

    def fit(self, X=None, y=None):
        out = run(self._resolved_config())
        self.output_ = out
        self.G_ = out.G_mc
        self.G_oracle_ = out.G_oracle
        self.visibility_ = out.estimate.visibility
        self.stats_ = out.stats
        self.n_shots_ = out.estimate.n_shots
        return self

    def predict(self, X=None):
        """Oracle G over the arm-2 lattice (no simulation needed)."""
        return evaluate_oracle(build_plan(self._resolved_config())).G

    def score(self, X=None, y=None) -> float:
        check_is_fitted(self, "stats_")
        return 1.0 - self.stats_["l2_error"]

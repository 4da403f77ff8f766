"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are also
collected in an "acceptance criteria" section of the terminal summary.
"""

import time
from importlib import resources

import numpy as np
import pytest

from ghostcorr.detection import merge_all, normalized_correlation
from ghostcorr.lattice import TransverseGrid, to_position
from ghostcorr.optics import ImagingArm, double_slit
from ghostcorr.oracles import (
    GeometrySpec,
    analytic_G_pdc_ff,
    analytic_G_thermal_ff,
    quadrature_G_pdc,
    quadrature_G_thermal,
    thermal_second_order,
    visibility_backgrounds,
)
from ghostcorr.rng import ShotBlock, ShotStreams
from ghostcorr.runner.config import load_config
from ghostcorr.runner.experiment import build_plan, run, shot_blocks, simulate_block
from ghostcorr.sources import PdcGain, ThermalSpectrum, sample_thermal

pytestmark = pytest.mark.slow

CENTER = 256


def preset(name, **changes):
    return load_config(resources.files("ghostcorr") / "presets" / f"{name}.cfg").with_overrides(**changes)


def fringe_lag(reference, shifted, max_lag=20):
    """Lag (in cells) maximizing the cross-correlation of two mean-removed patterns."""
    a = reference - reference.mean()
    b = shifted - shifted.mean()
    lags = np.arange(-max_lag, max_lag + 1)
    return int(lags[np.argmax([np.sum(np.roll(a, lag) * b) for lag in lags])])


def batched_correlation(config, n_batches=20):
    """C over the whole run and its standard error from batch means."""
    plan = build_plan(config)
    streams = ShotStreams(config.master_seed)
    blocks = shot_blocks(config.shots, config.block_size)
    accs = [simulate_block(plan, ShotBlock(streams, np.arange(lo, hi))) for lo, hi in blocks]
    groups = np.array_split(np.arange(len(accs)), n_batches)
    per_batch = [normalized_correlation(merge_all([accs[i] for i in g])).C for g in groups]
    total = normalized_correlation(merge_all(accs))
    return total, float(np.std(per_batch, ddof=1) / np.sqrt(n_batches))


# -- 1. ghost diffraction with split thermal light ---------------------------


def test_criterion_1_ghost_diffraction_1e4(verdict):
    start = time.perf_counter()
    out = run(preset("ghost-diffraction-wide"))
    wall = time.perf_counter() - start
    err = out.stats["l2_error"]
    verdict(1, "thermal-ff double slit, 1e4 shots, L2 < 0.15", err < 0.15, f"L2 = {err:.4f}")
    verdict(1, "runtime < 60 s single-threaded at N=512, 1e4 shots", wall < 60.0, f"{wall:.1f} s")


def test_criterion_1_ghost_diffraction_1e5(verdict):
    err = run(preset("ghost-diffraction-wide", shots=100_000)).stats["l2_error"]
    verdict(1, "thermal-ff double slit, 1e5 shots, L2 < 0.05", err < 0.05, f"L2 = {err:.4f}")


@pytest.mark.xfail(strict=True, reason="narrow double-slit geometry needs ~3e5 shots for L2 < 0.15; see ledger")
def test_narrow_double_slit_fringes_at_1e4():
    out = run(preset("double-slit-thermal-ff"))
    assert out.stats["l2_error"] < 0.15


# -- 2. ghost image ----------------------------------------------------------


def test_criterion_2_ghost_image(verdict):
    sharp = run(preset("ghost-image-2f"))
    blurred = run(preset("ghost-image-2f-coherent"))
    c = sharp.config
    ratio = c.l_coh / c.object_width
    e_sharp = sharp.stats["image_l2"]
    e_blur = blurred.stats["image_l2"]
    verdict(
        2,
        f"thermal-2f image at l_coh/l_o = {ratio:.2f} <= 0.2, peak-normalized L2 < 0.10",
        ratio <= 0.2 and e_sharp < 0.10,
        f"L2 = {e_sharp:.4f}",
    )
    degraded = blurred.config.l_coh / blurred.config.object_width
    verdict(
        2,
        f"image degrades >= 3x at l_coh/l_o = {degraded:.0f}",
        np.isclose(degraded, 2.0) and e_blur >= 3 * e_sharp,
        f"L2 = {e_blur:.4f}, factor {e_blur / e_sharp:.2f}",
    )


# -- 3. fringe-parity duality ------------------------------------------------


def test_criterion_3_fringe_parity(verdict):
    delta = 5
    window = slice(CENTER - 80, CENTER + 80)
    lags = {}
    for name in ("double-slit-thermal-ff", "double-slit-pdc-ff"):
        # the fringe period is ~9 cells; 1e5 shots keep the envelope from aliasing +5 onto -4
        base = preset(name, shots=100_000)
        g0 = run(base).G_mc
        g1 = run(base.with_overrides(point_index=CENTER + delta, master_seed=base.master_seed + 1)).G_mc
        lags[name] = fringe_lag(g0[window], g1[window])
    ok = abs(lags["double-slit-thermal-ff"] - delta) <= 1 and abs(lags["double-slit-pdc-ff"] + delta) <= 1
    verdict(
        3,
        f"x1 offset of {delta} cells shifts thermal fringes by +{delta}, PDC by -{delta}",
        ok,
        f"thermal lag {lags['double-slit-thermal-ff']:+d}, PDC lag {lags['double-slit-pdc-ff']:+d}",
    )


# -- 4. and 5. shot-noise level and normalized correlation --------------------


@pytest.fixture(scope="module")
def thermal_pixel_runs():
    near = batched_correlation(preset("shot-noise-thermal"))
    far = batched_correlation(preset("shot-noise-thermal", plane="far", focal_length=0.05))
    return {"near": near, "far": far}


def test_criterion_4_shot_noise_level(verdict, thermal_pixel_runs):
    stats, _ = thermal_pixel_runs["near"]
    r = stats.nminus_ratio
    verdict(4, "split thermal + photocounting, <dN-^2>/(<N1>+<N2>) = 1.00 +- 0.05", abs(r - 1) <= 0.05, f"ratio = {r:.4f}")


def test_criterion_5_normalized_correlation(verdict, thermal_pixel_runs):
    stats, sigma = thermal_pixel_runs["near"]
    m = stats.mean_N1
    expected = m / (1 + m)
    verdict(
        5,
        "single pixel, C = <N1>/(1+<N1>) within 3 sigma",
        abs(stats.C - expected) <= 3 * sigma and abs(m - 1500) < 5,
        f"<N1> = {m:.1f}, C = {stats.C:.6f}, expected {expected:.6f}, sigma {sigma:.1e}",
    )


def test_criterion_5_fourier_plane(verdict, thermal_pixel_runs):
    near, s_near = thermal_pixel_runs["near"]
    far, s_far = thermal_pixel_runs["far"]
    m = far.mean_N1
    expected = m / (1 + m)
    ok = abs(far.C - expected) <= 3 * s_far and abs(far.C - near.C) <= 3 * np.hypot(s_near, s_far) + abs(
        expected - near.mean_N1 / (1 + near.mean_N1)
    )
    verdict(
        5,
        "correlation level reproduced at the Fourier plane",
        ok,
        f"far C = {far.C:.6f} at <N1> = {m:.0f} (expected {expected:.6f}), near C = {near.C:.6f}",
    )


def test_criterion_5_classical_bound(verdict, thermal_pixel_runs):
    values = [s.C for s, _ in thermal_pixel_runs.values()]
    for seed, (n_max, region, plane) in enumerate([(1.0, "128", "near"), (50.0, "120:136", "near"), (5.0, "100:110", "far"), (500.0, "128", "far")]):
        config = preset("shot-noise-thermal", n_max=n_max, region=region, plane=plane, shots=5000, master_seed=seed)
        values.append(normalized_correlation(run(config).accumulator).C)
    verdict(5, "C <= 1 in every classical run", max(values) <= 1.0, f"{len(values)} runs, max C = {max(values):.6f}")


# -- 6. PDC sub-shot-noise ---------------------------------------------------


def test_criterion_6_pdc_sub_shot_noise(verdict):
    out = run(preset("pdc-subshot"))
    r = out.stats["Nminus_ratio"]
    verdict(6, "PDC symmetric far-field pixels, g = 2, 1e4 shots, ratio < 0.1", r < 0.1, f"ratio = {r:.2e}, C = {out.stats['C']:.5f}")


# -- 7. visibility scaling ---------------------------------------------------


def test_criterion_7_background_ratio(verdict):
    n = np.array([0.1, 1.0, 750.0, 1500.0])
    vb = visibility_backgrounds(n)
    exact = np.array_equal(vb.ratio, (n + n**2) / n**2) and np.allclose(vb.ratio, 1 + 1 / n, rtol=1e-15)
    verdict(7, "background ratio (<n>+<n>^2)/<n>^2 = 1 + 1/<n>", exact, f"ratios {np.array2string(vb.ratio, precision=6)}")
    adv = float(visibility_backgrounds(0.1).advantage)
    verdict(7, "PDC signal-to-background at <n> = 0.1 is 11x thermal +- 1%", abs(adv / 11 - 1) <= 0.01, f"advantage = {adv:.6f}")


def test_criterion_7_mc_visibility(verdict):
    values = {}
    for name in ("double-slit-thermal-ff", "double-slit-pdc-ff"):
        values[name] = run(preset(name)).stats["visibility_at_peak"]
    ok = all(0.025 <= v <= 0.1 for v in values.values())
    verdict(
        7,
        "MC visibility 0.05 within a factor of 2 for thermal and PDC at <n> ~ 750-1500",
        ok,
        ", ".join(f"{k.split('-')[1]} V = {v:.4f}" for k, v in values.items()),
    )


# -- 8. Gaussian moment factorization ----------------------------------------


def test_criterion_8_gaussian_factorization(verdict):
    grid = TransverseGrid(32, 4e-6, 702e-9)
    spec = ThermalSpectrum(10.0, grid.dq)
    # quadruples drawn within one coherence length, where the moment is O(1)
    picker = np.random.default_rng(2024)
    quads = picker.integers(4, 28, size=(12, 1)) + picker.integers(-4, 5, size=(12, 4))
    rng = np.random.default_rng(8)
    sums = np.zeros(len(quads), complex)
    n_samples = 0
    for _ in range(10):
        a = to_position(sample_thermal(grid, spec, "P", rng, size=100_000)).values
        for i, (x, xp, xpp, xppp) in enumerate(quads):
            sums[i] += np.sum(np.conj(a[:, x]) * np.conj(a[:, xp]) * a[:, xpp] * a[:, xppp])
        n_samples += a.shape[0]
    mc = sums / n_samples
    gamma = thermal_second_order(spec, grid)
    fact = np.array([gamma[x, xppp] * gamma[xp, xpp] + gamma[x, xpp] * gamma[xp, xppp] for x, xp, xpp, xppp in quads])
    err = np.abs(mc - fact) / np.abs(fact)
    verdict(8, "fourth moment vs factorized form, N=32, 1e6 samples, rel. error < 5%", err.max() < 0.05, f"max rel. error {err.max():.4f}")


# -- 9. oracle self-consistency ----------------------------------------------


def test_criterion_9_oracle_consistency(verdict):
    grid = TransverseGrid(64, 4e-6, 702e-9)
    f = 0.05
    mask = double_slit(grid, 12e-6, 40e-6)
    geom = GeometrySpec(grid.wavelength, f)
    det = grid.fourier_plane(f)
    arms = ImagingArm("FourierArm", f, mask), ImagingArm("FourierArm", f)
    spec = ThermalSpectrum(7.0, 8 * grid.dq)
    gain = PdcGain(1.2, 8 * grid.dq)
    brute_th = quadrature_G_thermal(spec, *arms, grid, geom.rt2)
    brute_pdc = quadrature_G_pdc(gain, *arms, grid)
    err_th = err_pdc = 0.0
    for k1 in range(64):
        th = analytic_G_thermal_ff(spec, mask, geom, det.x[k1])
        pdc = analytic_G_pdc_ff(gain, mask, geom, det.x[k1])
        err_th = max(err_th, np.linalg.norm(th - brute_th[k1]) / np.linalg.norm(brute_th[k1]))
        err_pdc = max(err_pdc, np.linalg.norm(pdc - brute_pdc[k1]) / np.linalg.norm(brute_pdc[k1]))
    verdict(9, "thermal closed form vs brute-force quadrature, N=64, < 1e-6", err_th < 1e-6, f"max rel. error {err_th:.1e}")
    verdict(9, "PDC closed form vs brute-force quadrature, N=64, < 1e-6", err_pdc < 1e-6, f"max rel. error {err_pdc:.1e}")


# -- 10. determinism and parallel consistency --------------------------------


def test_criterion_10_determinism(verdict, tmp_path):
    config = preset("double-slit-thermal-ff", shots=3000, deterministic=True, threads=4)
    run(config, out_dir=tmp_path / "a")
    run(config, out_dir=tmp_path / "b")
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in ("G.csv", "stats.csv"))
    verdict(10, "deterministic mode gives byte-identical G.csv and stats.csv", same, "2 runs compared")

    one = run(preset("double-slit-thermal-ff", shots=3000, threads=1)).accumulator
    eight = run(preset("double-slit-thermal-ff", shots=3000, threads=8)).accumulator
    drift = max(
        float(np.max(np.abs(np.asarray(getattr(one, n)) - np.asarray(getattr(eight, n)))) / float(np.max(np.abs(getattr(one, n)))))
        for n in ("sum_I1", "sum_I2", "sum_I1I2")
    )
    verdict(10, "1-thread vs 8-thread sums agree to <= 1e-10 relative", drift <= 1e-10, f"max drift {drift:.1e}")

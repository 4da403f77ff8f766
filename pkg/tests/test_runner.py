import json
from importlib import resources

import numpy as np
import pytest
from sklearn.base import clone

from ghostcorr.exceptions import ConfigurationError, InsufficientDataError
from ghostcorr.runner import cli
from ghostcorr.runner.config import (
    ExperimentConfig,
    load_config,
    parse_config,
    parse_pairs,
    parse_region,
    from_flat,
    validate,
)
from ghostcorr.runner.experiment import (
    GhostImagingExperiment,
    build_plan,
    config_from_manifest,
    evaluate_oracle,
    normalized_l2,
    peak_normalized_l2,
    read_csv,
    read_stats,
    run,
)

SMALL = """
experiment = thermal-ff
grid.n_points = 64
grid.dx = 4e-6
grid.wavelength = 702e-9
source.n_max = 100
source.l_coh = 16e-6
geometry.f = 0.05
object.kind = double-slit
object.width = 16e-6
object.separation = 48e-6
run.shots = 600
run.master_seed = 99
run.block_size = 64
"""


def small(**changes) -> ExperimentConfig:
    return parse_config(SMALL).with_overrides(**changes)


def codes(config):
    return {v.code for v in validate(config)}


def preset(name):
    return resources.files("ghostcorr") / "presets" / name


class TestConfigParsing:
    def test_defaults_and_types(self):
        c = small()
        assert c.n_points == 64 and isinstance(c.n_points, int)
        assert c.l_coh == 16e-6 and c.bandwidth() == pytest.approx(2 * np.pi / 16e-6)
        assert c.object_kind == "double-slit"

    def test_syntax_problems(self):
        pairs, problems = parse_pairs("grid.dx 4e-6\ngrid.dx = 1\ngrid.dx = 2\n")
        assert [p.code for p in problems] == ["SYNTAX", "DUPLICATE_KEY"]

    def test_unknown_key_and_bad_value(self):
        _, problems = from_flat({"grid.bogus": "1", "grid.n_points": "many"})
        assert {p.code for p in problems} == {"UNKNOWN_KEY", "BAD_VALUE"}
        with pytest.raises(ConfigurationError):
            parse_config("grid.n_points = many")

    def test_comments(self):
        c = parse_config("# header\nexperiment = pdc-ff  # trailing\n\nsource.g = 1.5\n")
        assert c.experiment == "pdc-ff" and c.g == 1.5

    def test_text_round_trip(self):
        c = small(r=0.6 + 0j, t=0.8j, deterministic=True)
        assert parse_config(c.to_text()) == c

    def test_region(self):
        assert parse_region(None, 64) == 32
        assert list(np.atleast_1d(parse_region("3:7", 64))) == [3, 4, 5, 6]
        assert list(parse_region("1,4,9", 64)) == [1, 4, 9]


class TestValidate:
    def test_valid_double_slit_preset(self):
        assert validate(load_config(preset("double-slit-thermal-ff.cfg"))) == []

    def test_all_presets_valid(self):
        for entry in (resources.files("ghostcorr") / "presets").iterdir():
            assert validate(load_config(entry)) == [], entry.name

    def test_splitter_not_unitary(self):
        # |r|^2 + |t|^2 = 1.1
        assert "SPLITTER_NOT_UNITARY" in codes(small(r=complex(np.sqrt(0.6)), t=1j * np.sqrt(0.5)))

    def test_splitter_phase(self):
        assert "SPLITTER_ARMS_NOT_COMMUTING" in codes(small(r=complex(np.sqrt(0.5)), t=complex(np.sqrt(0.5))))

    def test_object_exceeds_grid(self):
        assert "OBJECT_EXCEEDS_GRID" in codes(small(object_separation=300e-6))

    @pytest.mark.parametrize(
        "changes, code",
        [
            (dict(experiment="thermal-3f"), "UNKNOWN_EXPERIMENT"),
            (dict(n_points=100), "GRID_NOT_POWER_OF_TWO"),
            (dict(dx=0.0), "GRID_SPACING_NONPOSITIVE"),
            (dict(focal_length=-1.0), "FOCAL_LENGTH_NONPOSITIVE"),
            (dict(n_max=-1.0), "SOURCE_PHOTONS_NEGATIVE"),
            (dict(delta_q=1e5), "SOURCE_BANDWIDTH_AMBIGUOUS"),
            (dict(object_width=64e-6), "OBJECT_OVERLAP"),
            (dict(object_kind="star"), "UNKNOWN_OBJECT"),
            (dict(point_index=64), "DETECTOR_INDEX_OUT_OF_RANGE"),
            (dict(efficiency=1.5), "EFFICIENCY_OUT_OF_RANGE"),
            (dict(photocounting="poisson", ordering="Wigner"), "PHOTOCOUNTING_REQUIRES_P_ORDERING"),
            (dict(shots=0), "INSUFFICIENT_SHOTS"),
            (dict(master_seed=-1), "SEED_OUT_OF_RANGE"),
            (dict(threads=0), "THREADS_NONPOSITIVE"),
        ],
    )
    def test_codes(self, changes, code):
        assert code in codes(small(**changes))

    def test_pdc_gain_codes(self):
        base = dict(experiment="pdc-ff", n_max=None)
        assert "SOURCE_GAIN_MISSING" in codes(small(**base))
        assert "SOURCE_GAIN_NEGATIVE" in codes(small(g=-1.0, **base))
        assert "SOURCE_GAIN_AMBIGUOUS" in codes(small(g=1.0, n_peak=3.0, **base))
        assert validate(small(g=0.0, **base)) == []

    def test_mask_file(self, tmp_path):
        t = np.zeros(64)
        t[20:30] = 1.0
        np.save(tmp_path / "mask.npy", t)
        good = small(object_kind="file", object_path="mask.npy", base_dir=str(tmp_path))
        assert validate(good) == []
        assert "OBJECT_FILE_MISSING" in codes(small(object_kind="file", object_path="nope.npy", base_dir=str(tmp_path)))
        np.savetxt(tmp_path / "short.txt", t[:10])
        assert "OBJECT_SHAPE_MISMATCH" in codes(small(object_kind="file", object_path="short.txt", base_dir=str(tmp_path)))
        np.savetxt(tmp_path / "hot.txt", 2 * t)
        assert "OBJECT_TRANSMISSION_EXCEEDS_UNITY" in codes(small(object_kind="file", object_path="hot.txt", base_dir=str(tmp_path)))

    def test_never_throws(self):
        weird = ExperimentConfig(experiment="pdc-2f", n_points=0, dx=-1.0, g=None, object_kind="slit")
        assert len(validate(weird)) >= 2

    def test_build_plan_rejects(self):
        with pytest.raises(ConfigurationError):
            build_plan(small(n_points=100))


class TestRun:
    def test_single_shot_rejected(self):
        with pytest.raises(InsufficientDataError):
            run(small(shots=1))

    def test_outputs(self, tmp_path):
        out = run(small(), out_dir=tmp_path)
        body = read_csv(tmp_path / "G.csv")
        assert body.shape == (64, 5)
        np.testing.assert_array_equal(body[:, 0], np.arange(64))
        np.testing.assert_allclose(body[:, 2], out.G_mc, rtol=1e-15)
        header = [line for line in (tmp_path / "G.csv").read_text().splitlines() if line.startswith("#")]
        assert header[-1] == "# x2_index,x2_meters,G_mc,G_oracle,visibility"
        value = (tmp_path / "G.csv").read_text().splitlines()[3].split(",")[1]
        assert len(value.split("e")[0].replace("-", "").replace(".", "")) == 17
        stats = read_stats(tmp_path / "stats.csv")
        assert {"C", "Nminus_ratio", "mean_I1", "mean_I2_total", "l2_error"} <= set(stats)
        assert stats["n_shots"] == 600
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert {"code_version", "config", "master_seed", "wall_time_s"} <= set(manifest)

    def test_manifest_round_trip(self, tmp_path):
        config = small(r=0.6 + 0j, t=0.8j, point_index=30, deterministic=True)
        run(config, out_dir=tmp_path)
        assert config_from_manifest(tmp_path / "manifest.json") == config

    def test_manifest_round_trip_with_mask_file(self, tmp_path):
        t = np.zeros(64)
        t[20:30] = 0.5
        (tmp_path / "in").mkdir()
        np.savetxt(tmp_path / "in" / "mask.txt", t)
        config = small(object_kind="file", object_path="mask.txt", base_dir=str(tmp_path / "in"), shots=50)
        run(config, out_dir=tmp_path / "out")
        back = config_from_manifest(tmp_path / "out" / "manifest.json")
        np.testing.assert_array_equal(build_plan(back).mask.transmission, build_plan(config).mask.transmission)

    def test_deterministic_files_identical(self, tmp_path):
        config = small(deterministic=True, threads=3)
        run(config, out_dir=tmp_path / "a")
        run(config, out_dir=tmp_path / "b")
        for name in ("G.csv", "stats.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_thread_count_independence(self):
        one = run(small(threads=1)).accumulator
        many = run(small(threads=8)).accumulator
        for name in ("sum_I1", "sum_I2", "sum_I1I2"):
            a, b = np.asarray(getattr(one, name)), np.asarray(getattr(many, name))
            assert np.all(np.abs(a - b) <= 1e-10 * np.abs(a).max())

    def test_seed_changes_result(self):
        assert not np.array_equal(run(small()).G_mc, run(small(master_seed=100)).G_mc)

    def test_block_size_does_not_change_shots(self):
        a = run(small(block_size=64, deterministic=True)).G_mc
        b = run(small(block_size=7, deterministic=True)).G_mc
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9 * np.abs(a).max())

    @pytest.mark.parametrize("experiment", ["thermal-2f", "pdc-ff", "pdc-2f"])
    def test_other_experiments(self, experiment):
        extra = dict(g=1.0, n_max=None) if experiment.startswith("pdc") else {}
        out = run(small(experiment=experiment, shots=200, **extra))
        assert np.all(np.isfinite(out.G_mc)) and np.all(out.G_oracle >= 0)
        if experiment.endswith("2f"):
            assert "oracle_approx_l2" in out.stats

    def test_bucket(self):
        out = run(small(arm1="bucket", shots=2000))
        assert out.stats["l2_error"] < 1.0

    def test_statistics_experiment(self):
        config = small(
            experiment="statistics",
            object_kind="none",
            object_width=None,
            object_separation=None,
            photocounting="poisson",
            region="32",
            shots=2000,
        )
        out = run(config)
        assert 0.9 < out.stats["C"] <= 1.0
        assert np.isfinite(out.stats["Nminus_ratio"])

    def test_non_statistics_have_nan_c(self):
        assert np.isnan(run(small(shots=20)).stats["C"])

    def test_pdc_shift_opposite_to_thermal(self):
        base = dict(shots=2)
        th0 = evaluate_oracle(build_plan(small(**base))).G
        th1 = evaluate_oracle(build_plan(small(point_index=34, **base))).G
        pd = dict(experiment="pdc-ff", g=1.0, n_max=None, **base)
        pd0 = evaluate_oracle(build_plan(small(**pd))).G
        pd1 = evaluate_oracle(build_plan(small(point_index=34, **pd))).G

        def centroid(G):
            return np.sum(np.arange(64) * G) / np.sum(G)

        assert centroid(th1) > centroid(th0)
        assert centroid(pd1) < centroid(pd0)


class TestMetrics:
    def test_l2(self):
        assert normalized_l2([1, 1], [1, 1]) == 0
        assert np.isnan(normalized_l2([1], [0]))
        assert peak_normalized_l2(np.array([0, 2, 2, 0.0]), np.array([0, 1, 1, 0.0])) == 0


class TestCli:
    def test_validate_ok(self, capsys):
        assert cli.main(["validate", "--config", str(preset("double-slit-thermal-ff.cfg"))]) == 0
        assert capsys.readouterr().out.strip() == "OK"

    def test_validate_codes(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text(SMALL.replace("grid.n_points = 64", "grid.n_points = 60") + "splitter.r = 0.9\n")
        assert cli.main(["validate", "--config", str(path)]) == 1
        out = capsys.readouterr().out
        assert "GRID_NOT_POWER_OF_TWO:" in out and "SPLITTER_NOT_UNITARY:" in out

    def test_validate_unreadable(self, tmp_path, capsys):
        assert cli.main(["validate", "--config", str(tmp_path / "missing.cfg")]) == 2

    def test_run_with_overrides(self, tmp_path, capsys):
        path = tmp_path / "small.cfg"
        path.write_text(SMALL)
        args = ["run", "--config", str(path), "--shots", "40", "--seed", "5", "--threads", "2", "--deterministic", "--out-dir", str(tmp_path / "out")]
        assert cli.main(args) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["shots"] == 40 and manifest["master_seed"] == 5 and manifest["threads"] == 2
        assert manifest["deterministic"] is True

    def test_run_error_exit(self, tmp_path, capsys):
        path = tmp_path / "small.cfg"
        path.write_text(SMALL)
        assert cli.main(["run", "--config", str(path), "--shots", "1", "--out-dir", str(tmp_path)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_oracle_stdout_and_file(self, tmp_path, capsys):
        path = tmp_path / "small.cfg"
        path.write_text(SMALL)
        assert cli.main(["oracle", "--config", str(path)]) == 0
        lines = [ln for ln in capsys.readouterr().out.splitlines() if not ln.startswith("#")]
        assert len(lines) == 64
        assert cli.main(["oracle", "--config", str(path), "--out-dir", str(tmp_path)]) == 0
        body = read_csv(tmp_path / "oracle.csv")
        np.testing.assert_allclose(body[:, 2], evaluate_oracle(build_plan(parse_config(SMALL))).G, rtol=1e-15)


class TestEstimator:
    def test_fit_predict_score(self):
        est = GhostImagingExperiment(config=small(), shots=300)
        np.testing.assert_allclose(est.predict(), evaluate_oracle(build_plan(small())).G)
        est.fit()
        assert est.n_shots_ == 300
        assert est.score() == pytest.approx(1 - est.stats_["l2_error"])

    def test_clone(self):
        est = GhostImagingExperiment(config=small(), shots=10, master_seed=3)
        params = clone(est).get_params()
        assert params["shots"] == 10 and params["master_seed"] == 3

import json
import shutil

import pytest

from beacon_amc.cli import EXIT_CHECKSUM, EXIT_FORMAT, EXIT_OK, main

SMALL_CONFIG = {
    "dataset": {"frames_per_scheme_per_snr": 10, "snr_grid": [-10, 0, 10, 20], "seed": 5},
    "backbone": {"epochs": 6, "seed": 6},
    "exit": {"epochs": 30, "seed": 7},
    "lbap": {"max_epochs": 30, "seed": 8},
}


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """Run the full CLI pipeline once at a small scale."""
    out = tmp_path_factory.mktemp("pipeline")
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(SMALL_CONFIG))
    base = ["--config", str(cfg_path), "--out", str(out), "--exit-point", "1"]
    for command in ("gen-data", "train-backbone", "train-exit", "train-lbap"):
        assert main(base + [command]) == EXIT_OK, command
    return out, cfg_path


def _run(pipeline_dir, *extra):
    out, cfg_path = pipeline_dir
    return main(["--config", str(cfg_path), "--out", str(out), "--exit-point", "1", *extra])


class TestPipelineCommands:
    def test_artifacts_exist(self, pipeline_dir):
        out, _ = pipeline_dir
        for name in ("dataset.bin", "backbone.ck", "backbone.manifest", "model_ee1.ck", "model_ee1.manifest", "lbap_ee1.ck"):
            assert (out / name).exists(), name

    def test_manifests_carry_provenance(self, pipeline_dir):
        out, _ = pipeline_dir
        manifest = json.loads((out / "manifest_gen-data.json").read_text())
        assert "config_hash" in manifest
        assert manifest["seeds"]["dataset"] == 5
        assert "dataset.bin" in manifest["outputs"]

    @pytest.mark.parametrize(
        "args,artifact",
        [
            (["--criterion", "entropy", "sweep"], "sweep_entropy_ee1.csv"),
            (["--criterion", "beacon", "sweep"], "sweep_beacon_ee1.csv"),
            (["bins"], "bins_ee1.csv"),
            (["budget"], "budget_ee1.csv"),
            (["min-cost"], "mincost_ee1.csv"),
            (["invocation"], "invocation_ee1.csv"),
            (["--criterion", "margin", "snr-report"], "snr_margin_ee1.csv"),
            (["calibration"], "calibration_ee1.csv"),
        ],
    )
    def test_report_commands(self, pipeline_dir, args, artifact):
        out, _ = pipeline_dir
        assert _run(pipeline_dir, *args) == EXIT_OK
        path = out / artifact
        assert path.exists()
        text = path.read_text()
        assert text.startswith("# config_hash=")
        assert "threshold_calibration=validation" in text

    def test_sweep_csv_layout(self, pipeline_dir):
        out, _ = pipeline_dir
        lines = [l for l in (out / "sweep_entropy_ee1.csv").read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "percentile,threshold,forward_fraction,avg_macs,accuracy"
        assert len(lines) == 1 + 21

    def test_score_dump_layout(self, pipeline_dir):
        out, _ = pipeline_dir
        lines = [l for l in (out / "scores_entropy_ee1.csv").read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "sample_id,split,snr_db,label,yhat_e,yhat_f,score_kind,score"
        assert len(lines) == 1 + 40  # test split of the small config

    def test_gradcheck_command(self, pipeline_dir, capsys):
        assert _run(pipeline_dir, "gradcheck") == EXIT_OK
        assert "all gradient checks passed" in capsys.readouterr().out


class TestErrorCodes:
    def test_corrupt_dataset_checksum(self, pipeline_dir, tmp_path):
        out, cfg_path = pipeline_dir
        broken = tmp_path / "broken"
        broken.mkdir()
        raw = bytearray((out / "dataset.bin").read_bytes())
        raw[60] ^= 0xFF
        (broken / "dataset.bin").write_text("")  # placeholder, replaced below
        (broken / "dataset.bin").write_bytes(bytes(raw))
        code = main(["--config", str(cfg_path), "--out", str(broken), "train-backbone"])
        assert code == EXIT_CHECKSUM

    def test_not_a_dataset(self, pipeline_dir, tmp_path):
        _, cfg_path = pipeline_dir
        broken = tmp_path / "broken2"
        broken.mkdir()
        (broken / "dataset.bin").write_bytes(b"definitely not a dataset file")
        code = main(["--config", str(cfg_path), "--out", str(broken), "train-backbone"])
        assert code == EXIT_FORMAT

    def test_missing_model(self, pipeline_dir, tmp_path):
        out, cfg_path = pipeline_dir
        empty = tmp_path / "empty"
        empty.mkdir()
        shutil.copy(out / "dataset.bin", empty / "dataset.bin")
        code = main(["--config", str(cfg_path), "--out", str(empty), "bins"])
        assert code == 1


class TestDeterminism:
    def test_gen_data_bit_identical(self, tmp_path):
        cfg = {"dataset": {"frames_per_scheme_per_snr": 3, "snr_grid": [0, 10], "seed": 9}}
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps(cfg))
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["--config", str(cfg_path), "--out", str(out), "gen-data"]) == EXIT_OK
            outs.append((out / "dataset.bin").read_bytes())
        assert outs[0] == outs[1]

import json
import subprocess
import sys

import pytest
import torch
import yaml

from emotranscap import cli
from emotranscap.config import PipelineConfig, env_overrides, from_dict, load_config
from emotranscap.errors import ConfigError, ValidationError

SMALL = {
    "seed": 5,
    "dataset": {"utterances": 8},
    "mtetr": {"res_blocks": 1, "planes": 64, "epochs": 1, "holdout": 0.25},
}


def write_cfg(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_defaults_and_dump_roundtrip():
    cfg = PipelineConfig()
    again = from_dict(yaml.safe_load(cfg.dump()))
    assert again == cfg and again.digest() == cfg.digest()


def test_precedence(tmp_path):
    path = write_cfg(tmp_path, {"seed": 1, "parallelism": 2, "vad": {"aggressiveness": 1}})
    env = {"EMOTRANS_VAD_AGGRESSIVENESS": "3", "EMOTRANS_SEED": "9", "OTHER": "x"}
    cfg = load_config(path, environ=env, overrides={"seed": 4})
    assert (cfg.seed, cfg.parallelism, cfg.vad.aggressiveness) == (4, 2, 3)
    assert env_overrides({"EMOTRANS_DATASET_LANGUAGES": "[en]"}) == {"dataset": {"languages": ["en"]}}


@pytest.mark.parametrize(
    "data",
    [
        {"vad": {"aggressiveness": 2}},  # no seed
        {"seed": 1, "bogus": 1},
        {"seed": 1, "vad": {"nope": 1}},
        {"seed": 1, "parallelism": 0},
        {"seed": 1, "dataset": {"languages": ["fr"]}},
        {"seed": "one"},
    ],
)
def test_bad_configs(tmp_path, data):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, data), environ={})


def test_config_error_is_validation_error():
    assert issubclass(ConfigError, ValidationError)
    with pytest.raises(ConfigError):
        env_overrides({"EMOTRANS_NOSECTION_X": "1"})


def test_usage_exit_codes(capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["no-such-command"]) == cli.EXIT_USAGE
    assert cli.main(["plan", "--seed", "x"]) == cli.EXIT_USAGE


def test_empty_manifest_is_validation_failure(tmp_path):
    run_dir = tmp_path / "run"
    run_dir.mkdir()
    (run_dir / "manifests.jsonl").write_text("")
    for command in ("preprocess", "train-mtetr", "annotate", "evaluate", "stats"):
        assert cli.main([command, "--run-dir", str(run_dir), "--offline"]) == cli.EXIT_VALIDATION


def test_client_failure_exit_code(tmp_path):
    path = write_cfg(tmp_path, {
        "seed": 1,
        "dataset": {"utterances": 1},
        "clients": {"text_endpoint": "http://127.0.0.1:9/v1", "text_timeout_s": 1.0},
    })
    assert cli.main(["build-dataset", "--config", str(path), "--run-dir", str(tmp_path / "r")]) == cli.EXIT_CLIENT


def test_dump_config_and_global_flags(tmp_path, capsys):
    path = write_cfg(tmp_path, SMALL)
    assert cli.main(["--seed", "77", "dump-config", "--config", str(path)]) == 0
    dumped = yaml.safe_load(capsys.readouterr().out)
    assert dumped["seed"] == 77 and dumped["dataset"]["utterances"] == 8


def _build(tmp_path, name, parallelism):
    path = write_cfg(tmp_path, SMALL)
    run_dir = tmp_path / name
    rc = cli.main(["build-dataset", "--config", str(path), "--run-dir", str(run_dir),
                   "--offline", "--parallelism", str(parallelism)])
    assert rc == 0
    return run_dir


def test_build_is_deterministic_across_parallelism(tmp_path):
    a = _build(tmp_path, "a", 1)
    b = _build(tmp_path, "b", 3)
    assert (a / "manifests.jsonl").read_text() == (b / "manifests.jsonl").read_text()
    wavs = sorted(p.relative_to(a) for p in a.rglob("*.wav"))
    assert wavs and wavs == sorted(p.relative_to(b) for p in b.rglob("*.wav"))
    for rel in wavs:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_offline_pipeline_subprocess(tmp_path):
    path = write_cfg(tmp_path, SMALL)
    run_dir = tmp_path / "run"
    base = [sys.executable, "-m", "emotranscap.cli"]
    for command in ("plan", "build-dataset", "preprocess", "train-mtetr", "annotate", "evaluate", "stats"):
        proc = subprocess.run(
            base + [command, "--config", str(path), "--run-dir", str(run_dir), "--offline"],
            capture_output=True, text=True, timeout=600,
        )
        assert proc.returncode == 0, proc.stderr
    metrics = json.loads((run_dir / "reports" / "metrics.json").read_text())
    text = (run_dir / "reports" / "metrics.txt").read_text()
    for key in ("Acc_ETC", "Acc_ETT", "EES", "FEA", "EER"):
        assert key in text
    assert "config_sha256" in json.loads((run_dir / "run_metadata.json").read_text())
    assert metrics
    for fig in ("timeline.png", "confusion.png", "metrics_by_k.png"):
        assert (run_dir / "reports" / fig).stat().st_size > 0
    assert (run_dir / "stats" / "stats.tsv").exists()

    # retraining in this process (torch RNG already used by other tests) reproduces the subprocess run
    torch.rand(10)
    again = write_cfg(tmp_path, {**SMALL, "paths": {"checkpoint": "again/mtetr.pt"}}, "again.yaml")
    assert cli.main(["train-mtetr", "--config", str(again), "--run-dir", str(run_dir), "--offline"]) == 0
    assert (run_dir / "again" / "loss_log.tsv").read_text() == (run_dir / "checkpoints" / "loss_log.tsv").read_text()

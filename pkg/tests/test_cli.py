import json
from pathlib import Path

import pytest

from vata import cli

CHAIN = [
    "synth", "cluster", "sample", "score", "fit-enrm", "train-mtnnl",
    "predict", "validate", "map", "report",
]

ARTIFACTS = [
    "features.csv", "comparisons.jsonl", "comfort.csv", "latent-truth.json",
    "cluster-report.json", "sample.json", "coverage.json",
    "scores.csv", "scores-diagnostics.json",
    "enrm-models.json", "enrm-report.json", "enrm-weights.json",
    "enrm-correlations.json",
    "mtnnl-bundle.json", "mtnnl-history.csv", "gradient-check.json",
    "predictions.csv", "validation.json", "map.geojson", "report.json",
]


def small_config(tmp_path, seed=7):
    cfg = {
        "seed": seed,
        "synth": {
            "n_images": 150,
            "pairs_per_indicator": 300,
            "vpi_noise_sd": 0.15,
            "vata_noise_sd": 0.15,
            "comfort_points": 43,
            "embedding_dim": 4,
        },
        "cluster": {"k": 5, "restarts": 4},
        "sample": {"n_per_class": 20, "grid_bins": 12},
        "score": {"repeats": 3},
        "enrm": {"alpha_grid": [0.003, 0.03]},
        "mtnnl": {
            "hidden_f": [16, 8],
            "hidden_g": [12, 6],
            "epochs": 25,
            "learning_rate": 3e-3,
        },
        "validate": {"alphas": [0.5, 0.3, 0.1]},
        "map": {"edge_m": 196.0},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def run_chain(config_path, workdir):
    for command in CHAIN:
        code = cli.main(["--config", str(config_path), "--workdir", str(workdir), command])
        assert code == 0, f"{command} failed"


@pytest.fixture(scope="module")
def chain_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("chain")
    config = small_config(tmp)
    workdir = tmp / "out"
    run_chain(config, workdir)
    return workdir, config


def test_full_chain_produces_all_artifacts(chain_dir):
    workdir, _ = chain_dir
    for name in ARTIFACTS:
        assert (workdir / name).exists(), f"missing {name}"


def test_report_has_versioned_schema(chain_dir):
    workdir, _ = chain_dir
    report = json.loads((workdir / "report.json").read_text())
    assert report["schema_version"] == 1
    assert "enrm-report" in report["stages"]


def test_score_rerun_byte_identical(chain_dir):
    workdir, config = chain_dir
    before = (workdir / "scores.csv").read_bytes()
    code = cli.main(["--config", str(config), "--workdir", str(workdir), "score"])
    assert code == 0
    assert (workdir / "scores.csv").read_bytes() == before


def test_missing_seed_is_config_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"synth": {}}))
    code = cli.main(["--config", str(path), "--workdir", str(tmp_path), "synth"])
    assert code == 2


def test_predict_requires_embedding_block(chain_dir, tmp_path):
    workdir, config = chain_dir
    # build a feature file without the embedding columns
    other = tmp_path / "no-embed"
    other.mkdir()
    cfg = json.loads(Path(config).read_text())
    cfg["synth"]["embedding_dim"] = 0
    cfg_path = tmp_path / "no-embed.json"
    cfg_path.write_text(json.dumps(cfg))
    assert cli.main(["--config", str(cfg_path), "--workdir", str(other), "synth"]) == 0

    code = cli.main([
        "--config", str(config), "--workdir", str(workdir),
        "predict", "--features", str(other / "features.csv"),
    ])
    assert code == 3


def test_validate_ranks_models(chain_dir):
    workdir, _ = chain_dir
    validation_report = json.loads((workdir / "validation.json").read_text())
    models = [row["model"] for row in validation_report["multivariate"]]
    assert set(models) == {"vata+hsna", "hsna", "heart", "solar"}
    adj = [row["adjusted_r2"] for row in validation_report["multivariate"]]
    assert adj == sorted(adj, reverse=True)


def test_map_is_valid_geojson(chain_dir):
    workdir, _ = chain_dir
    doc = json.loads((workdir / "map.geojson").read_text())
    assert doc["type"] == "FeatureCollection"
    assert doc["features"]
    for feature in doc["features"]:
        ring = feature["geometry"]["coordinates"][0]
        assert len(ring) == 7 and ring[0] == ring[-1]
        assert feature["properties"]["band"] in {"low", "medium", "high"}

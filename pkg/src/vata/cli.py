"""Pipeline orchestrator.

Every stage is a subcommand reading one JSON config file (seeds are
mandatory there: no silent nondeterminism) and exchanging data through the
documented file formats in a working directory. Exit codes: 0 success,
2 config error, 3 data error, 4 numeric error. Failures print a single
machine-parseable JSON line to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import (
    elastic_net,
    hexmap,
    network,
    rating,
    sampling,
    schema,
    service,
    stats,
    storage,
    synth,
    validation,
)
from .errors import ConfigError, DataError, VataError
from .records import IndicatorScores

REPORT_SCHEMA_VERSION = 1


def _load_config(path: str) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if "seed" not in cfg:
        raise ConfigError("config must set a top-level 'seed'")
    return cfg


def _stage(cfg: dict, name: str) -> dict:
    return dict(cfg.get(name, {}))


def _d1_matrix(features, require_embedding: bool):
    X52 = np.vstack([f.interpretable_52 for f in features])
    has_emb = features[0].embedding is not None
    if require_embedding and not has_emb:
        raise DataError(
            "features file has no embedding block; this model needs the dense "
            "embedding columns (emb_0000...)"
        )
    if has_emb:
        return np.hstack([X52, np.array([f.embedding for f in features])])
    return X52


# --- subcommands ------------------------------------------------------------------


def cmd_synth(cfg: dict, workdir: Path) -> None:
    s = _stage(cfg, "synth")
    scfg = synth.SynthConfig(
        n_images=s.get("n_images", 500),
        n_clusters=s.get("n_clusters", 5),
        seed=cfg["seed"],
        rater_noise_beta=s.get("rater_noise_beta", 1.0),
        vpi_noise_sd=s.get("vpi_noise_sd", 0.2),
        vata_noise_sd=s.get("vata_noise_sd", 0.2),
        sparsity=s.get("sparsity", 0.5),
        embedding_dim=s.get("embedding_dim", 8),
    )
    pop = synth.generate_population(scfg)
    storage.write_features(pop.images, pop.features, workdir / "features.csv")

    pairs = s.get("pairs_per_indicator", 3168)
    comparisons = []
    for indicator in schema.INDICATORS:
        comparisons.extend(
            synth.simulate_comparisons(
                pop.latent_scores, indicator, pairs,
                beta=scfg.rater_noise_beta, seed=cfg["seed"],
            )
        )
    storage.write_comparisons(comparisons, workdir / "comparisons.jsonl")

    coeffs = synth.ComfortCoeffs(**s.get("comfort_coeffs", {
        "intercept": 5.5, "vata": 0.9, "heart_rate": -0.4,
        "solar": -0.5, "noise": -0.2, "altitude": 0.1,
    }))
    points = synth.generate_comfort_path(
        {r.image_id: r.vata for r in pop.latent_scores},
        s.get("comfort_points", 43),
        coeffs,
        noise_sd=s.get("comfort_noise_sd", 0.3),
        seed=cfg["seed"] + 1,
    )
    storage.save_comfort(points, workdir / "comfort.csv")

    storage.write_json(
        {
            "latent_scores": {
                r.image_id: {"vata": r.vata, "vpi": r.vpi} for r in pop.latent_scores
            },
            "cluster_labels": {
                img.image_id: int(label)
                for img, label in zip(pop.images, pop.truth.cluster_labels)
            },
            "stage1_weights": pop.truth.stage1_weights.tolist(),
            "stage2_if_weights": pop.truth.stage2_if_weights.tolist(),
            "stage2_vpi_weights": pop.truth.stage2_vpi_weights.tolist(),
        },
        workdir / "latent-truth.json",
    )


def cmd_cluster(cfg: dict, workdir: Path) -> None:
    s = _stage(cfg, "cluster")
    features = storage.load_features(workdir / "features.csv")
    X = np.array(
        [[f.segmentation[c] for c in schema.segmentation_classes()] for f in features]
    )
    model = sampling.kmeans(
        X,
        k=s.get("k", 5),
        seed=cfg["seed"],
        max_iter=s.get("max_iter", 100),
        tol=s.get("tol", 1e-7),
        restarts=s.get("restarts", 10),
    )
    labels = {f.image_id: int(l) for f, l in zip(features, model.labels)}
    storage.set_cluster_labels(workdir / "features.csv", labels)
    storage.write_json(
        {
            "k": model.k,
            "inertia": model.inertia,
            "n_iter": model.n_iter,
            "repairs": model.repairs,
            "cluster_sizes": {
                str(j): int(np.sum(model.labels == j)) for j in range(model.k)
            },
        },
        workdir / "cluster-report.json",
    )


def cmd_sample(cfg: dict, workdir: Path) -> None:
    s = _stage(cfg, "sample")
    images = storage.load_images(workdir / "features.csv")
    labels = {i.image_id: i.cluster_label for i in images}
    if any(l is None for l in labels.values()):
        raise DataError("features.csv has no cluster labels; run `cluster` first")
    chosen = sampling.stratified_sample(labels, s.get("n_per_class", 100), cfg["seed"])
    storage.write_json({"sample_ids": chosen}, workdir / "sample.json")

    features = storage.load_features(workdir / "features.csv")
    X = np.vstack([f.interpretable_52 for f in features])
    report = sampling.coverage_report(
        [f.image_id for f in features], X, chosen,
        grid_bins=s.get("grid_bins", 20),
        n_components=s.get("n_components", 2),
    )
    storage.write_json(report.to_dict(), workdir / "coverage.json")


def _score_index(workdir: Path, comparisons) -> list[str]:
    """Sample ids when they cover the log's references, else all images."""
    referenced = {c.left_id for c in comparisons} | {c.right_id for c in comparisons}
    sample_path = workdir / "sample.json"
    if sample_path.exists():
        sample = list(json.loads(sample_path.read_text(encoding="utf-8"))["sample_ids"])
        if referenced <= set(sample):
            return sample
    return [i.image_id for i in storage.load_images(workdir / "features.csv")]


def cmd_score(cfg: dict, workdir: Path) -> None:
    s = _stage(cfg, "score")
    scoring_cfg = rating.ScoringConfig(
        mu0=s.get("mu0", 2.5),
        sigma2_0=s.get("sigma2_0", 1.0),
        beta2=s.get("beta2", 1.0),
        repeats=s.get("repeats", 20),
        target_std=s.get("target_std", 1.0),
        seed=cfg["seed"],
        simplified_variance=s.get("simplified_variance", False),
    )
    comparisons = storage.load_comparisons(workdir / "comparisons.jsonl")
    ids = _score_index(workdir, comparisons)
    per_indicator = {}
    diagnostics = {}
    for indicator in schema.INDICATORS:
        scoring = rating.score_indicator(comparisons, indicator, scoring_cfg, ids)
        per_indicator[indicator] = scoring.scores
        diagnostics[indicator] = scoring.diagnostics
    records = [
        IndicatorScores(
            image_id,
            per_indicator["vata"][image_id],
            {name: per_indicator[name][image_id] for name in schema.VPI_NAMES},
        )
        for image_id in ids
    ]
    storage.save_scores(records, workdir / "scores.csv")
    storage.write_json(diagnostics, workdir / "scores-diagnostics.json")


def cmd_fit_enrm(cfg: dict, workdir: Path) -> None:
    s = _stage(cfg, "enrm")
    alpha_grid = s.get("alpha_grid", [0.001, 0.003, 0.01, 0.03, 0.1])
    l1_ratio = s.get("l1_ratio", 0.5)
    features = storage.load_features(workdir / "features.csv")
    scores = {r.image_id: r for r in storage.load_scores(workdir / "scores.csv")}
    rows = [f for f in features if f.image_id in scores]
    if not rows:
        raise DataError("no overlap between features and scores")
    X = np.vstack([f.interpretable_52 for f in rows])
    names = list(schema.interpretable_names())
    aligned = [scores[f.image_id] for f in rows]
    y = np.array([r.vata for r in aligned])
    V = np.array([[r.vpi[n] for n in schema.VPI_NAMES] for r in aligned])

    result = elastic_net.fit_two_stage(
        X, names, aligned, alpha_grid, l1_ratio, seed=cfg["seed"]
    )
    if_model, if_cv = elastic_net.fit_with_cv(
        X, y, alpha_grid, l1_ratio, seed=cfg["seed"], feature_names=names
    )
    vpi_model, vpi_cv = elastic_net.fit_with_cv(
        V, y, alpha_grid, l1_ratio, seed=cfg["seed"],
        feature_names=list(schema.VPI_NAMES),
    )

    def table_row(model, Xm):
        report = stats.regression_metrics(y, model.predict(Xm), model.nonzero_count)
        vifs = stats.vif(Xm[:, np.abs(model.std_coefficients) > elastic_net.NONZERO_TOL]) \
            if model.nonzero_count >= 2 else np.array([np.nan])
        finite = vifs[np.isfinite(vifs)]
        return {
            "alpha": model.alpha,
            "l1_ratio": model.l1_ratio,
            "intercept": model.intercept,
            "metrics": report.to_dict(),
            "mean_vif": float(finite.mean()) if finite.size else None,
            "significant_coefficients": model.nonzero_count,
            "total_features": len(model.feature_names),
        }

    X2 = np.hstack([X, V])
    storage.write_json(
        {
            "if_only": table_row(if_model, X),
            "vpi_only": table_row(vpi_model, V),
            "two_stage": table_row(result.model.stage2, X2),
            "stage1": result.reports["stage1"],
            "cv": {
                "convention": "5-fold cross-validation, mean R2 per alpha",
                "if_only": if_cv,
                "vpi_only": vpi_cv,
                **result.cv_tables,
            },
        },
        workdir / "enrm-report.json",
    )
    storage.write_json(
        {
            "stage1": {k: m.to_dict() for k, m in result.model.stage1.items()},
            "stage2": result.model.stage2.to_dict(),
            "if_only": if_model.to_dict(),
            "vpi_only": vpi_model.to_dict(),
        },
        workdir / "enrm-models.json",
    )
    storage.write_json(
        elastic_net.two_stage_weight_report(result.model), workdir / "enrm-weights.json"
    )
    storage.write_json(
        elastic_net.correlation_ranking(aligned, X, names),
        workdir / "enrm-correlations.json",
    )


def cmd_train_mtnnl(cfg: dict, workdir: Path) -> None:
    s = _stage(cfg, "mtnnl")
    features = storage.load_features(workdir / "features.csv")
    images = storage.load_images(workdir / "features.csv")
    scores = {r.image_id: r for r in storage.load_scores(workdir / "scores.csv")}
    labels = {i.image_id: i.cluster_label for i in images if i.image_id in scores}
    if any(l is None for l in labels.values()):
        raise DataError("cluster labels required for the stratified split; run `cluster`")
    rows = [f for f in features if f.image_id in scores]
    ids = [f.image_id for f in rows]
    use_embedding = s.get("use_embedding", True) and rows[0].embedding is not None
    X = _d1_matrix(rows, require_embedding=False) if use_embedding else np.vstack(
        [f.interpretable_52 for f in rows]
    )
    aligned = [scores[i] for i in ids]
    V = np.array([[r.vpi[n] for n in schema.VPI_NAMES] for r in aligned])
    y = np.array([r.vata for r in aligned])

    plan = network.split(
        ids, labels, tuple(s.get("ratios", (0.6, 0.2, 0.2))), seed=cfg["seed"]
    )
    pos = {image_id: i for i, image_id in enumerate(ids)}
    tr = [pos[i] for i in plan.train_ids]
    va = [pos[i] for i in plan.val_ids]
    te = [pos[i] for i in plan.test_ids]

    means = X[tr].mean(axis=0)
    scales = X[tr].std(axis=0)
    scales[scales == 0.0] = 1.0
    Xz = (X - means) / scales

    ncfg = network.NetworkConfig(
        input_dim=X.shape[1],
        hidden_f=tuple(s.get("hidden_f", (64, 32))),
        hidden_g=tuple(s.get("hidden_g", (32, 16))),
        activation=s.get("activation", "relu"),
        loss_alpha=s.get("loss_alpha", 0.5),
        learning_rate=s.get("learning_rate", 3e-3),
        epochs=s.get("epochs", 300),
        batch_size=s.get("batch_size", 32),
        seed=cfg["seed"],
        optimizer=s.get("optimizer", "adam"),
        feature_jitter_sd=s.get("feature_jitter_sd", 0.0),
    )
    trained = network.train(ncfg, Xz, V, y, (tr, va))
    test_eval = network.evaluate(trained, Xz[te], V[te], y[te])

    bundle = trained.to_dict()
    bundle["scaler"] = {"means": means.tolist(), "scales": scales.tolist()}
    bundle["uses_embedding"] = bool(use_embedding)
    bundle["split"] = {
        "train": plan.train_ids, "val": plan.val_ids, "test": plan.test_ids,
    }
    storage.write_json(bundle, workdir / "mtnnl-bundle.json")

    with open(workdir / "mtnnl-history.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "loss_f", "loss_g"])
        for row in trained.history:
            writer.writerow([
                row["epoch"], repr(row["train_loss"]), repr(row["val_loss"]),
                repr(row["loss_f"]), repr(row["loss_g"]),
            ])

    check_cfg = network.NetworkConfig(
        input_dim=8, hidden_f=(8, 6), hidden_g=(6, 4),
        activation="tanh", seed=cfg["seed"],
    )
    relu_cfg = network.NetworkConfig(
        input_dim=8, hidden_f=(8, 6), hidden_g=(6, 4),
        activation="relu", seed=cfg["seed"],
    )
    storage.write_json(
        {
            "tanh_max_rel_error": network.gradient_check(check_cfg),
            "relu_offkink_max_rel_error": network.gradient_check(
                relu_cfg, avoid_relu_kinks=True
            ),
            "test_vata": test_eval["vata"].to_dict(),
            "best_epoch": trained.best_epoch,
        },
        workdir / "gradient-check.json",
    )


def cmd_predict(cfg: dict, workdir: Path, features_path: str | None = None) -> None:
    bundle = json.loads((workdir / "mtnnl-bundle.json").read_text(encoding="utf-8"))
    trained = network.TrainedNetwork.from_dict(bundle)
    features = storage.load_features(features_path or workdir / "features.csv")
    X = _d1_matrix(features, require_embedding=bundle["uses_embedding"])
    if X.shape[1] != trained.config.input_dim:
        raise DataError(
            f"feature width {X.shape[1]} does not match model input "
            f"{trained.config.input_dim}"
        )
    means = np.array(bundle["scaler"]["means"])
    scales = np.array(bundle["scaler"]["scales"])
    Xz = (X - means) / scales
    _, vata_pred = network.forward(trained.params, trained.config, Xz)
    vata_pred = np.clip(vata_pred, 0.0, 5.0)
    with open(workdir / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "vata"])
        for f, value in zip(features, vata_pred):
            writer.writerow([f.image_id, repr(float(value))])


def _load_predictions(workdir: Path) -> dict[str, float]:
    path = workdir / "predictions.csv"
    if not path.exists():
        raise DataError("predictions.csv missing; run `predict` first")
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["image_id", "vata"]:
            raise DataError("unexpected predictions.csv header")
        for row in reader:
            out[row[0]] = float(row[1])
    return out


def cmd_validate(cfg: dict, workdir: Path) -> None:
    s = _stage(cfg, "validate")
    points = storage.load_comfort(workdir / "comfort.csv")
    predictions = _load_predictions(workdir)
    missing = [p.image_id for p in points if p.image_id not in predictions]
    if missing:
        raise DataError(f"no prediction for comfort-point image {missing[0]!r}")
    vata = np.array([predictions[p.image_id] for p in points])
    comfort = np.array([p.comfort for p in points])
    hsna = np.array([p.hsna() for p in points])

    ema_table = validation.fit_vata_comfort(
        vata, comfort, s.get("alphas", [0.5, 0.3, 0.1])
    )
    sets = validation.standard_predictor_sets(vata, hsna)
    model_table = validation.fit_multivariate(sets, comfort)
    storage.write_json(
        {"ema_fits": ema_table, "multivariate": model_table},
        workdir / "validation.json",
    )


def cmd_map(cfg: dict, workdir: Path) -> None:
    s = _stage(cfg, "map")
    predictions = _load_predictions(workdir)
    images = storage.load_images(workdir / "features.csv")
    locations = {i.image_id: (i.lat, i.lon) for i in images}
    known = {k: v for k, v in predictions.items() if k in locations}
    if not known:
        raise DataError("no predicted image has a location")
    origin = s.get("origin")
    if origin is None:
        lats = [locations[k][0] for k in known]
        lons = [locations[k][1] for k in known]
        origin = [float(np.mean(lats)), float(np.mean(lons))]
    grid = hexmap.HexGrid(origin[0], origin[1], s.get("edge_m", hexmap.DEFAULT_EDGE_M))
    aggregates = hexmap.aggregate(
        known, locations, grid,
        low=s.get("low", hexmap.LOW_THRESHOLD),
        high=s.get("high", hexmap.HIGH_THRESHOLD),
    )
    storage.write_json(hexmap.export_geojson(aggregates, grid), workdir / "map.geojson")


def cmd_serve(cfg: dict, workdir: Path) -> None:
    s = _stage(cfg, "serve")
    if "manifest" not in s or "log" not in s:
        raise ConfigError("serve config needs 'manifest' and 'log' paths")
    scfg = service.ServiceConfig(
        manifest_path=str(workdir / s["manifest"]),
        log_path=str(workdir / s["log"]),
        seed=cfg["seed"],
        port=s.get("port", 8008),
        max_per_indicator=s.get("max_per_indicator", service.DEFAULT_MAX_PER_INDICATOR),
        scoring=rating.ScoringConfig(seed=cfg["seed"], **s.get("scoring", {})),
    )
    service.serve(scfg)


_REPORT_FILES = (
    "cluster-report.json", "coverage.json", "scores-diagnostics.json",
    "enrm-report.json", "enrm-weights.json", "enrm-correlations.json",
    "gradient-check.json", "validation.json",
)


def cmd_report(cfg: dict, workdir: Path) -> None:
    stages = {}
    for name in _REPORT_FILES:
        path = workdir / name
        if path.exists():
            stages[name.removesuffix(".json")] = json.loads(
                path.read_text(encoding="utf-8")
            )
    storage.write_json(
        {"schema_version": REPORT_SCHEMA_VERSION, "seed": cfg["seed"], "stages": stages},
        workdir / "report.json",
    )


# --- entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vata",
        description="Streetscape thermal-affordance pipeline",
    )
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--workdir", default=".", help="artifact directory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (
        "synth", "cluster", "sample", "score", "fit-enrm", "train-mtnnl",
        "validate", "map", "serve", "report",
    ):
        sub.add_parser(name)
    predict = sub.add_parser("predict")
    predict.add_argument("--features", default=None, help="features CSV to predict on")
    return parser


_HANDLERS = {
    "synth": cmd_synth,
    "cluster": cmd_cluster,
    "sample": cmd_sample,
    "score": cmd_score,
    "fit-enrm": cmd_fit_enrm,
    "train-mtnnl": cmd_train_mtnnl,
    "validate": cmd_validate,
    "map": cmd_map,
    "serve": cmd_serve,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        workdir = Path(args.workdir)
        workdir.mkdir(parents=True, exist_ok=True)
        if args.command == "predict":
            cmd_predict(cfg, workdir, args.features)
        else:
            _HANDLERS[args.command](cfg, workdir)
    except VataError as exc:
        print(
            json.dumps(
                {"error": type(exc).__name__, "message": str(exc), "code": exc.exit_code}
            ),
            file=sys.stderr,
        )
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - unexpected failure path
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc), "code": 1}),
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

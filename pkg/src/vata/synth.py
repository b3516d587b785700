"""Synthetic-world generator for desk-scale, end-to-end verification.

Generates a population with genuine two-stage structure: interpretable
features drawn per streetscape cluster, perceptual indicators as sparse
linear maps of the features, and the thermal-affordance score as a sparse
linear map of (features, indicators); plus probit-model raters and a
synthetic comfort path. Ground-truth coefficients are returned for
recovery tests and never written next to the dataset files.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from . import schema
from .errors import ConfigError, InsufficientItemsError
from .records import ComfortPoint, FeatureVector, ImageRecord, IndicatorScores, PairwiseComparison

#: archetype mixes over the 19 segmentation classes, one per streetscape
#: category (vegetation-rich, green-urban, open-urban, mixed-urban,
#: building-dominated)
_ARCHETYPES: dict[str, dict[str, float]] = {
    "vegetation_rich": {
        "vegetation": 0.52, "terrain": 0.10, "sky": 0.14, "road": 0.14,
        "sidewalk": 0.04, "building": 0.03, "pole": 0.01, "car": 0.02,
    },
    "green_urban": {
        "vegetation": 0.32, "building": 0.16, "sky": 0.14, "road": 0.20,
        "sidewalk": 0.08, "terrain": 0.04, "car": 0.04, "pole": 0.01,
    },
    "open_urban": {
        "sky": 0.30, "road": 0.28, "building": 0.12, "vegetation": 0.12,
        "sidewalk": 0.08, "terrain": 0.03, "car": 0.05, "fence": 0.01,
    },
    "mixed_urban": {
        "building": 0.28, "road": 0.22, "vegetation": 0.18, "sky": 0.12,
        "sidewalk": 0.08, "car": 0.06, "wall": 0.03, "person": 0.01,
    },
    "building_dominated": {
        "building": 0.48, "road": 0.18, "sky": 0.08, "vegetation": 0.08,
        "sidewalk": 0.08, "wall": 0.04, "car": 0.05, "person": 0.01,
    },
}


@dataclass
class SynthConfig:
    n_images: int
    n_clusters: int = 5
    seed: int = 0
    rater_noise_beta: float = 1.0     # performance noise of the probit rater
    vpi_noise_sd: float = 0.1
    vata_noise_sd: float = 0.1
    sparsity: float = 0.5             # fraction of zero coefficients
    embedding_dim: int = 8
    cluster_weights: tuple[float, ...] | None = None
    origin: tuple[float, float] = (0.0, 0.0)   # (lat, lon) of the synthetic city
    extent_km: float = 6.0

    def validate(self) -> "SynthConfig":
        if self.n_images < self.n_clusters:
            raise ConfigError("n_images must be >= n_clusters")
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be >= 1")
        if self.rater_noise_beta <= 0:
            raise ConfigError("rater_noise_beta must be > 0")
        if self.vpi_noise_sd < 0 or self.vata_noise_sd < 0:
            raise ConfigError("noise sds must be >= 0")
        if not 0.0 <= self.sparsity < 1.0:
            raise ConfigError("sparsity must be in [0, 1)")
        if self.cluster_weights is not None:
            if len(self.cluster_weights) != self.n_clusters:
                raise ConfigError("cluster_weights length must equal n_clusters")
            if any(w <= 0 for w in self.cluster_weights):
                raise ConfigError("cluster_weights must be positive")
        return self


@dataclass
class LatentTruth:
    """Ground-truth coefficients of the generating process (standardized
    feature space). Kept out of the dataset files by design."""

    stage1_weights: np.ndarray        # (52, 19)
    stage2_if_weights: np.ndarray     # (52,)
    stage2_vpi_weights: np.ndarray    # (19,)
    vpi_affine: list[tuple[float, float]]   # per-VPI (min, span) of the raw latent
    vata_affine: tuple[float, float]
    cluster_labels: np.ndarray        # (n,)
    if_means: np.ndarray
    if_scales: np.ndarray


@dataclass
class SynthPopulation:
    images: list[ImageRecord]
    features: list[FeatureVector]
    latent_scores: list[IndicatorScores]
    truth: LatentTruth


def _sparse_matrix(rng: np.random.Generator, shape, sparsity: float) -> np.ndarray:
    W = rng.normal(0.0, 1.0, size=shape)
    W[rng.random(size=shape) < sparsity] = 0.0
    # guarantee at least one active weight per output column
    flat = W.reshape(W.shape[0], -1)
    for j in range(flat.shape[1]):
        if not np.any(flat[:, j] != 0.0):
            flat[rng.integers(flat.shape[0]), j] = rng.normal(0.0, 1.0)
    return W


def _minmax_to(values: np.ndarray, lo: float, hi: float) -> tuple[np.ndarray, tuple[float, float]]:
    vmin = float(values.min())
    span = float(values.max() - vmin)
    if span == 0.0:
        return np.full_like(values, (lo + hi) / 2.0), (vmin, 1.0)
    scaled = (values - vmin) / span * (hi - lo) + lo
    return scaled, (vmin, span)


def generate_population(cfg: SynthConfig) -> SynthPopulation:
    """Draw the synthetic image population with latent two-stage structure."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n, k = cfg.n_images, cfg.n_clusters

    seg_classes = schema.segmentation_classes()
    arch_names = list(_ARCHETYPES)
    if k <= len(arch_names):
        prototypes = [
            np.array([_ARCHETYPES[a].get(c, 0.0) for c in seg_classes])
            for a in arch_names[:k]
        ]
    else:
        prototypes = [rng.dirichlet(np.full(len(seg_classes), 0.5)) for _ in range(k)]

    weights = (
        np.full(k, 1.0 / k)
        if cfg.cluster_weights is None
        else np.array(cfg.cluster_weights, dtype=float) / sum(cfg.cluster_weights)
    )
    labels = rng.choice(k, size=n, p=weights)

    obj_rates = rng.uniform(0.0, 4.0, size=(k, len(schema.object_names())))
    pix_means = rng.uniform(-1.0, 1.0, size=(k, len(schema.pixel_names())))
    scn_means = rng.uniform(0.05, 0.6, size=(k, len(schema.scene_names())))

    images: list[ImageRecord] = []
    features: list[FeatureVector] = []
    half_deg = cfg.extent_km / 111.32 / 2.0   # ~degrees per km at small latitudes
    for i in range(n):
        c = int(labels[i])
        seg = np.clip(prototypes[c] + rng.normal(0.0, 0.04, len(seg_classes)), 0.0, 1.0)
        total = seg.sum()
        if total > 1.0:
            seg = seg / total
        obj = rng.poisson(obj_rates[c]).astype(float)
        pix = pix_means[c] + rng.normal(0.0, 0.5, len(schema.pixel_names()))
        scn = np.clip(scn_means[c] + rng.normal(0.0, 0.08, len(schema.scene_names())), 0.0, 1.0)
        image_id = f"img{i:05d}"
        images.append(
            ImageRecord(
                image_id,
                lat=cfg.origin[0] + rng.uniform(-half_deg, half_deg),
                lon=cfg.origin[1] + rng.uniform(-half_deg, half_deg),
                capture_date="2025-01-01",
            )
        )
        features.append(
            FeatureVector(
                image_id,
                dict(zip(seg_classes, seg)),
                dict(zip(schema.object_names(), obj)),
                dict(zip(schema.pixel_names(), pix)),
                dict(zip(schema.scene_names(), scn)),
            )
        )

    X = np.vstack([f.interpretable_52 for f in features])
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    scales[scales == 0.0] = 1.0
    Z = (X - means) / scales

    if cfg.embedding_dim > 0:
        M = rng.normal(0.0, 1.0, size=(52, cfg.embedding_dim)) / math.sqrt(52)
        E = Z @ M + 0.3 * rng.normal(0.0, 1.0, size=(n, cfg.embedding_dim))
        for f, row in zip(features, E):
            f.embedding = tuple(float(v) for v in row)

    n_vpi = len(schema.VPI_NAMES)
    W1 = _sparse_matrix(rng, (52, n_vpi), cfg.sparsity) / math.sqrt(52 * (1.0 - cfg.sparsity))
    vpi_raw = Z @ W1 + cfg.vpi_noise_sd * rng.normal(0.0, 1.0, size=(n, n_vpi))
    vpi_scaled = np.empty_like(vpi_raw)
    vpi_affine = []
    for j in range(n_vpi):
        vpi_scaled[:, j], aff = _minmax_to(vpi_raw[:, j], 0.0, 5.0)
        vpi_affine.append(aff)

    v_means = vpi_scaled.mean(axis=0)
    v_scales = vpi_scaled.std(axis=0)
    v_scales[v_scales == 0.0] = 1.0
    Zv = (vpi_scaled - v_means) / v_scales

    w_if = _sparse_matrix(rng, (52,), cfg.sparsity) / math.sqrt(52 * (1.0 - cfg.sparsity))
    w_vpi = _sparse_matrix(rng, (n_vpi,), cfg.sparsity) / math.sqrt(n_vpi * (1.0 - cfg.sparsity))
    vata_raw = Z @ w_if + Zv @ w_vpi + cfg.vata_noise_sd * rng.normal(0.0, 1.0, size=n)
    vata_scaled, vata_affine = _minmax_to(vata_raw, 0.0, 5.0)

    latent_scores = [
        IndicatorScores(
            images[i].image_id,
            float(vata_scaled[i]),
            {name: float(vpi_scaled[i, j]) for j, name in enumerate(schema.VPI_NAMES)},
        )
        for i in range(n)
    ]

    truth = LatentTruth(
        stage1_weights=W1,
        stage2_if_weights=w_if,
        stage2_vpi_weights=w_vpi,
        vpi_affine=vpi_affine,
        vata_affine=vata_affine,
        cluster_labels=labels,
        if_means=means,
        if_scales=scales,
    )
    return SynthPopulation(images, features, latent_scores, truth)


def win_probability(score_left: float, score_right: float, beta: float) -> float:
    """Probit win model matching the rater's Gaussian performance noise."""
    from scipy.stats import norm

    return float(norm.cdf((score_left - score_right) / (math.sqrt(2.0) * beta)))


def simulate_comparisons(
    latent: list[IndicatorScores],
    indicator: str,
    n_pairs: int,
    beta: float,
    seed: int,
    n_participants: int = 176,
) -> list[PairwiseComparison]:
    """Uniform random distinct pairs; winners sampled from the probit model."""
    if len(latent) < 2:
        raise InsufficientItemsError("need at least 2 images to compare")
    if n_pairs < 1:
        raise ConfigError("n_pairs must be >= 1")
    if beta <= 0:
        raise ConfigError("beta must be > 0")
    if indicator not in schema.INDICATORS:
        raise ConfigError(f"unknown indicator {indicator!r}")
    rng = np.random.default_rng([seed, zlib.crc32(indicator.encode("utf-8"))])
    ids = [s.image_id for s in latent]
    values = np.array([s.value(indicator) for s in latent])
    base_time = datetime(2025, 7, 1, tzinfo=timezone.utc)
    out = []
    n = len(ids)
    for i in range(n_pairs):
        a = int(rng.integers(n))
        b = int(rng.integers(n - 1))
        if b >= a:
            b += 1
        p_left = win_probability(values[a], values[b], beta)
        winner = "left" if rng.random() < p_left else "right"
        out.append(
            PairwiseComparison(
                indicator=indicator,
                left_id=ids[a],
                right_id=ids[b],
                winner=winner,
                participant_id=f"sim{i % n_participants:04d}",
                timestamp=(base_time + timedelta(seconds=i)).isoformat(),
            )
        )
    return out


@dataclass
class ComfortCoeffs:
    """Generating coefficients of the synthetic comfort response."""

    intercept: float = 5.5
    vata: float = 1.0
    heart_rate: float = 0.0
    solar: float = 0.0
    noise: float = 0.0
    altitude: float = 0.0


def generate_comfort_path(
    vata_scores: dict[str, float],
    n_points: int,
    coeffs: ComfortCoeffs,
    noise_sd: float,
    seed: int,
    origin: tuple[float, float] = (0.0, 0.0),
) -> list[ComfortPoint]:
    """Walk a synthetic path: smooth wearable channels, comfort built as
    linear(vata, channels) + noise, clipped into [1, 10]."""
    if n_points < 3:
        raise ConfigError("n_points must be >= 3")
    if len(vata_scores) < n_points:
        raise ConfigError(f"need at least {n_points} scored images")
    rng = np.random.default_rng(seed)
    ids = sorted(vata_scores)
    chosen = [ids[i] for i in rng.choice(len(ids), size=n_points, replace=False)]
    vata = np.array([vata_scores[i] for i in chosen])

    def walk(start, step):
        return start + np.cumsum(rng.normal(0.0, step, n_points))

    heart = walk(80.0, 2.0)
    solar = walk(700.0, 40.0)
    noise_db = walk(60.0, 1.5)
    altitude = walk(20.0, 0.8)

    def z(x):
        sd = x.std()
        return (x - x.mean()) / sd if sd > 0 else x * 0.0

    comfort = (
        coeffs.intercept
        + coeffs.vata * (vata - 2.5)
        + coeffs.heart_rate * z(heart)
        + coeffs.solar * z(solar)
        + coeffs.noise * z(noise_db)
        + coeffs.altitude * z(altitude)
        + noise_sd * rng.normal(0.0, 1.0, n_points)
    )
    comfort = np.clip(comfort, 1.0, 10.0)

    lat = origin[0] + np.cumsum(rng.normal(0.0, 0.0002, n_points))
    lon = origin[1] + np.cumsum(rng.normal(0.0, 0.0002, n_points))
    return [
        ComfortPoint(
            point_id=i + 1,
            lat=float(lat[i]),
            lon=float(lon[i]),
            comfort=float(comfort[i]),
            heart_rate=float(heart[i]),
            solar=float(solar[i]),
            noise=float(noise_db[i]),
            altitude=float(altitude[i]),
            image_id=chosen[i],
        )
        for i in range(n_points)
    ]

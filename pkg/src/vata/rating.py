"""TrueSkill-style pairwise rating: Gaussian skill beliefs updated from
comparison outcomes, replayed in repeated shuffled passes, then normalized
to the 0-5 score scale and rescaled to a target spread.

Update for winner w over loser l (no draws):
    c^2 = sigma_w^2 + sigma_l^2 + 2 beta^2
    t   = (mu_w - mu_l) / c
    v   = phi(t) / Phi(t)          (Gaussian hazard)
    w_t = v (v + t)
    mu_w'      = mu_w + (sigma_w^2 / c) v
    mu_l'      = mu_l - (sigma_l^2 / c) v
    sigma_i'^2 = sigma_i^2 (1 - (sigma_i^2 / c^2) w_t)

A ``simplified_variance`` mode drops the w_t factor
(sigma'^2 = sigma^2 (1 - sigma^2/c^2)), kept for fidelity experiments with
the outcome-independent shortcut some write-ups use.
"""

from __future__ import annotations

import math
import zlib
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .errors import (
    InsufficientItemsError,
    NumericError,
    UnknownImageError,
    ZeroVarianceError,
)
from .records import PairwiseComparison

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def gaussian_hazard(t: float) -> float:
    """phi(t) / Phi(t), stable for large negative t via erfcx."""
    return _SQRT_2_OVER_PI / float(special.erfcx(-t / _SQRT2))


@dataclass(frozen=True)
class Rating:
    mu: float
    sigma2: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma2)):
            raise NumericError(f"non-finite rating ({self.mu}, {self.sigma2})")
        if self.sigma2 <= 0.0:
            raise NumericError(f"sigma2 must be > 0, got {self.sigma2}")


@dataclass(frozen=True)
class ScoringConfig:
    mu0: float = 2.5
    sigma2_0: float = 1.0
    beta2: float = 1.0
    repeats: int = 20
    target_std: float = 1.0
    seed: int = 0
    simplified_variance: bool = False

    def __post_init__(self):
        if self.sigma2_0 <= 0 or self.beta2 <= 0:
            raise NumericError("variances must be > 0")
        if self.repeats < 1:
            raise NumericError("repeats must be >= 1")
        if self.target_std <= 0:
            raise NumericError("target_std must be > 0")


def update_pair(
    winner: Rating, loser: Rating, beta2: float, simplified_variance: bool = False
) -> tuple[Rating, Rating]:
    """One Bayesian update; returns (winner', loser')."""
    if not math.isfinite(beta2) or beta2 <= 0:
        raise NumericError(f"beta2 must be finite and > 0, got {beta2}")
    c2 = winner.sigma2 + loser.sigma2 + 2.0 * beta2
    c = math.sqrt(c2)
    t = (winner.mu - loser.mu) / c
    v = gaussian_hazard(t)
    mu_w = winner.mu + (winner.sigma2 / c) * v
    mu_l = loser.mu - (loser.sigma2 / c) * v
    if simplified_variance:
        s2_w = winner.sigma2 * (1.0 - winner.sigma2 / c2)
        s2_l = loser.sigma2 * (1.0 - loser.sigma2 / c2)
    else:
        w_t = v * (v + t)
        s2_w = winner.sigma2 * (1.0 - (winner.sigma2 / c2) * w_t)
        s2_l = loser.sigma2 * (1.0 - (loser.sigma2 / c2) * w_t)
    for value in (mu_w, mu_l, s2_w, s2_l):
        if not math.isfinite(value):
            raise NumericError("non-finite rating update")
    return Rating(mu_w, s2_w), Rating(mu_l, s2_l)


@dataclass
class RankingResult:
    raw: dict[str, float]                 # per-image mean final mu over repeats
    repeat_std: dict[str, float]          # per-image std of final mu over repeats
    n_comparisons: int
    repeats: int


def _replay_once(
    order: Sequence[int],
    comparisons: Sequence[PairwiseComparison],
    image_ids: Sequence[str],
    cfg: ScoringConfig,
) -> dict[str, float]:
    ratings = {i: Rating(cfg.mu0, cfg.sigma2_0) for i in image_ids}
    for idx in order:
        c = comparisons[idx]
        win, lose = update_pair(
            ratings[c.winner_id], ratings[c.loser_id], cfg.beta2,
            cfg.simplified_variance,
        )
        ratings[c.winner_id] = win
        ratings[c.loser_id] = lose
    return {i: r.mu for i, r in ratings.items()}


def run_ranking(
    comparisons: Iterable[PairwiseComparison],
    indicator: str,
    cfg: ScoringConfig,
    image_ids: Sequence[str],
) -> RankingResult:
    """Replay the indicator's comparisons ``cfg.repeats`` times, each over an
    independently shuffled order, and average the final means.

    Images in ``image_ids`` that never appear keep the prior mean.
    """
    relevant = [c for c in comparisons if c.indicator == indicator]
    if not relevant:
        raise InsufficientItemsError(f"no comparisons for indicator {indicator!r}")
    known = set(image_ids)
    for c in relevant:
        if c.left_id not in known or c.right_id not in known:
            missing = c.left_id if c.left_id not in known else c.right_id
            raise UnknownImageError(f"comparison references unknown image {missing!r}")

    per_repeat = np.empty((cfg.repeats, len(image_ids)))
    ids = list(image_ids)
    tag = zlib.crc32(indicator.encode("utf-8"))
    for r in range(cfg.repeats):
        rng = np.random.default_rng([cfg.seed, tag, r])
        order = rng.permutation(len(relevant))
        final = _replay_once(order, relevant, ids, cfg)
        per_repeat[r] = [final[i] for i in ids]
    mean = per_repeat.mean(axis=0)
    std = per_repeat.std(axis=0)
    return RankingResult(
        raw={i: float(m) for i, m in zip(ids, mean)},
        repeat_std={i: float(s) for i, s in zip(ids, std)},
        n_comparisons=len(relevant),
        repeats=cfg.repeats,
    )


@dataclass
class NormalizeResult:
    scores: dict[str, float]
    warnings: tuple[str, ...] = ()


def normalize_scores(raw: Mapping[str, float]) -> NormalizeResult:
    """Min-max map onto [0, 5]; a zero spread degrades to all-2.5 + warning."""
    if len(raw) < 2:
        raise InsufficientItemsError("need at least 2 images to normalize")
    values = list(raw.values())
    lo, hi = min(values), max(values)
    if hi == lo:
        return NormalizeResult(
            {k: 2.5 for k in raw}, warnings=("DegenerateSpread: all raw scores equal",)
        )
    span = hi - lo
    return NormalizeResult({k: (v - lo) / span * 5.0 for k, v in raw.items()})


@dataclass
class RescaleResult:
    scores: dict[str, float]
    clipped: int


def rescale_to_std(
    scores: Mapping[str, float], target_std: float, center: float = 2.5
) -> RescaleResult:
    """Affine map to population std == target_std and mean == center, then
    clip into [0, 5] (clip count reported)."""
    if len(scores) < 2:
        raise InsufficientItemsError("need at least 2 images to rescale")
    values = np.array(list(scores.values()), dtype=float)
    sd = float(values.std())
    if sd == 0.0:
        raise ZeroVarianceError("scores have zero variance")
    mean = float(values.mean())
    out: dict[str, float] = {}
    clipped = 0
    for k, v in scores.items():
        y = (v - mean) / sd * target_std + center
        if y < 0.0 or y > 5.0:
            clipped += 1
            y = min(5.0, max(0.0, y))
        out[k] = y
    return RescaleResult(out, clipped)


@dataclass
class IndicatorScoring:
    indicator: str
    scores: dict[str, float]
    diagnostics: dict


def score_indicator(
    comparisons: Iterable[PairwiseComparison],
    indicator: str,
    cfg: ScoringConfig,
    image_ids: Sequence[str],
) -> IndicatorScoring:
    """Full scoring chain: replayed ranking -> 0-5 normalization -> spread
    rescale. Diagnostics carry repeat spread, clip count, and warnings."""
    ranking = run_ranking(comparisons, indicator, cfg, image_ids)
    norm = normalize_scores(ranking.raw)
    rescaled = rescale_to_std(norm.scores, cfg.target_std)
    spread = np.array(list(ranking.repeat_std.values()))
    diagnostics = {
        "indicator": indicator,
        "n_comparisons": ranking.n_comparisons,
        "repeats": ranking.repeats,
        "repeat_std_mean": float(spread.mean()),
        "repeat_std_max": float(spread.max()),
        "clipped": rescaled.clipped,
        "warnings": list(norm.warnings),
    }
    return IndicatorScoring(indicator, rescaled.scores, diagnostics)

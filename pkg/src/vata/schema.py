"""Frozen name schemas: the 52 interpretable features, the 19 perceptual
indicators, and the survey question text served per indicator.

The 52-name manifest ships as a versioned JSON data file
(``data/feature_manifest.json``); this module is the single place the rest
of the pipeline reads it from.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import numpy as np

# 19 perceptual indicators scored from pairwise comparisons, grouped as:
# microclimate inference, environment assessment, design quality, emotion.
VPI_NAMES: tuple[str, ...] = (
    "temp_intensity",
    "sun_intensity",
    "humidity_inference",
    "wind_inference",
    "traffic_flow",
    "greenery_rate",
    "shading_area",
    "material_comfort",
    "imageability",
    "enclosure",
    "human_scale",
    "transparency",
    "complexity",
    "safe",
    "lively",
    "beautiful",
    "wealthy",
    "boring",
    "depressing",
)

VATA = "vata"

#: every indicator a comparison may reference
INDICATORS: tuple[str, ...] = (VATA,) + VPI_NAMES

#: VPI names in the fixed (alphabetical) order used by scores.csv
VPI_NAMES_SORTED: tuple[str, ...] = tuple(sorted(VPI_NAMES))

# Forced-choice question shown for each indicator.
QUESTION_TEXT: dict[str, str] = {
    "vata": (
        "Which street view image do you perceive as having a more "
        "comfortable outdoor thermal environment for you?"
    ),
    "temp_intensity": "Which street view image do you perceive exhibits a higher outdoor temperature?",
    "sun_intensity": "Which street view image do you perceive exhibits a higher sunlight intensity?",
    "humidity_inference": "Which street view image do you perceive exhibits a higher humidity inference?",
    "wind_inference": "Which street view image do you perceive exhibits a higher wind speed inference?",
    "traffic_flow": "Which street view image do you think showcases higher traffic flow?",
    "greenery_rate": "Which street view image do you think showcases a higher greenery rate?",
    "shading_area": "Which street view image do you think showcases more shading areas?",
    "material_comfort": "Which street view image do you think showcases higher construction material comfort?",
    "imageability": "Which street view image stands out to you as a more impressive place?",
    "enclosure": "Which street view image stands out to you as a more enclosed space?",
    "human_scale": "Which street view image stands out to you as more accommodating for human scale?",
    "transparency": "Which street view image stands out to you as a more transparent space?",
    "complexity": "Which street view image stands out to you as a more complex environment?",
    "safe": "Which street view image do you feel evokes a more safe atmosphere?",
    "lively": "Which street view image do you feel evokes a more lively atmosphere?",
    "beautiful": "Which street view image do you feel evokes a more beautiful atmosphere?",
    "wealthy": "Which street view image do you feel evokes a more wealthy atmosphere?",
    "boring": "Which street view image do you feel evokes a more boring atmosphere?",
    "depressing": "Which street view image do you feel evokes a more depressing atmosphere?",
}


@lru_cache(maxsize=1)
def manifest() -> dict:
    """The versioned 52-feature manifest, parsed once."""
    text = resources.files("vata.data").joinpath("feature_manifest.json").read_text("utf-8")
    return json.loads(text)


@lru_cache(maxsize=1)
def segmentation_classes() -> tuple[str, ...]:
    """The 19 raw segmentation class names, in manifest order."""
    return tuple(manifest()["segmentation_classes"])


@lru_cache(maxsize=1)
def segmentation_aggregates() -> dict[str, tuple[str, ...]]:
    """Aggregated segmentation feature -> raw classes it sums over."""
    feats = manifest()["groups"]["segmentation"]["features"]
    return {name: tuple(srcs) for name, srcs in feats.items()}


@lru_cache(maxsize=1)
def object_names() -> tuple[str, ...]:
    return tuple(manifest()["groups"]["objects"]["features"])


@lru_cache(maxsize=1)
def pixel_names() -> tuple[str, ...]:
    return tuple(manifest()["groups"]["pixel"]["features"])


@lru_cache(maxsize=1)
def scene_names() -> tuple[str, ...]:
    return tuple(manifest()["groups"]["scene"]["features"])


@lru_cache(maxsize=1)
def interpretable_names() -> tuple[str, ...]:
    """The 52 interpretable feature names, in canonical order."""
    names = (
        tuple(segmentation_aggregates())
        + object_names()
        + pixel_names()
        + scene_names()
    )
    if len(names) != 52:
        raise AssertionError(f"manifest yields {len(names)} names, expected 52")
    return names


def interpretable_vector(
    segmentation: dict[str, float],
    objects: dict[str, float],
    pixel: dict[str, float],
    scene: dict[str, float],
) -> np.ndarray:
    """Assemble the 52-value interpretable view from the four raw groups."""
    values = [
        sum(segmentation[cls] for cls in srcs)
        for srcs in segmentation_aggregates().values()
    ]
    values += [objects[n] for n in object_names()]
    values += [pixel[n] for n in pixel_names()]
    values += [scene[n] for n in scene_names()]
    return np.asarray(values, dtype=float)

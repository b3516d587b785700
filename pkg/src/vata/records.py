"""Canonical record types for images, features, scores, comparisons, and
field comfort points.

Records are plain dataclasses; ``validate()`` enforces the documented
invariants and is called by the storage layer on load/save and by pipeline
entry points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import schema
from .errors import InvalidPairError, RangeError, SchemaError

SEG_SUM_TOL = 1e-6


@dataclass
class ImageRecord:
    image_id: str
    lat: float
    lon: float
    capture_date: str | None = None      # ISO-8601 date
    cluster_label: int | None = None     # 0..4, assigned by the sampling stage

    def validate(self) -> "ImageRecord":
        if not self.image_id:
            raise SchemaError("image_id", "empty image_id")
        if not -90.0 <= self.lat <= 90.0:
            raise RangeError(f"lat {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise RangeError(f"lon {self.lon} outside [-180, 180]")
        return self


@dataclass
class FeatureVector:
    """Objective features of one image.

    ``segmentation`` holds the 19 raw class fractions; ``objects``, ``pixel``
    and ``scene`` the remaining groups; ``embedding`` is the optional dense
    block. The 52-value interpretable view is derived, never stored.
    """

    image_id: str
    segmentation: dict[str, float]
    objects: dict[str, float]
    pixel: dict[str, float]
    scene: dict[str, float]
    embedding: tuple[float, ...] | None = None

    def validate(self) -> "FeatureVector":
        for group, names in (
            (self.segmentation, schema.segmentation_classes()),
            (self.objects, schema.object_names()),
            (self.pixel, schema.pixel_names()),
            (self.scene, schema.scene_names()),
        ):
            for name in names:
                if name not in group:
                    raise SchemaError(name)
        seg = [self.segmentation[c] for c in schema.segmentation_classes()]
        if any(v < 0.0 or v > 1.0 for v in seg):
            raise RangeError(f"segmentation fraction outside [0,1] for {self.image_id}")
        if sum(seg) > 1.0 + SEG_SUM_TOL:
            raise RangeError(f"segmentation fractions of {self.image_id} sum to {sum(seg):.6f} > 1")
        for name in schema.scene_names():
            v = self.scene[name]
            if v < 0.0 or v > 1.0:
                raise RangeError(f"scene probability {name}={v} outside [0,1]")
        for name in schema.object_names():
            v = self.objects[name]
            if v < 0 or v != int(v):
                raise RangeError(f"object count {name}={v} not a non-negative integer")
        return self

    @property
    def interpretable_52(self) -> np.ndarray:
        """The 52 named interpretable values, in canonical manifest order."""
        return schema.interpretable_vector(
            self.segmentation, self.objects, self.pixel, self.scene
        )


@dataclass
class IndicatorScores:
    """Per-image 0-5 scores: the thermal-affordance score plus the 19 VPIs."""

    image_id: str
    vata: float
    vpi: dict[str, float] = field(default_factory=dict)

    def validate(self) -> "IndicatorScores":
        missing = [n for n in schema.VPI_NAMES if n not in self.vpi]
        if missing:
            raise SchemaError(missing[0], f"missing VPI scores: {missing}")
        unknown = [n for n in self.vpi if n not in schema.VPI_NAMES]
        if unknown:
            raise SchemaError(unknown[0], f"unknown VPI names: {unknown}")
        for name, value in [("vata", self.vata)] + sorted(self.vpi.items()):
            if not 0.0 <= value <= 5.0:
                raise RangeError(f"{name} score {value} outside [0, 5] for {self.image_id}")
        return self

    def value(self, indicator: str) -> float:
        return self.vata if indicator == schema.VATA else self.vpi[indicator]


@dataclass
class PairwiseComparison:
    """One survey response: which of two images won on one indicator."""

    indicator: str
    left_id: str
    right_id: str
    winner: str                # "left" | "right"
    participant_id: str
    timestamp: str             # ISO-8601

    def validate(self) -> "PairwiseComparison":
        if self.indicator not in schema.INDICATORS:
            raise SchemaError(self.indicator, f"unknown indicator {self.indicator!r}")
        if self.left_id == self.right_id:
            raise InvalidPairError(f"left == right == {self.left_id!r}")
        if self.winner not in ("left", "right"):
            raise RangeError(f"winner must be 'left' or 'right', got {self.winner!r}")
        return self

    @property
    def winner_id(self) -> str:
        return self.left_id if self.winner == "left" else self.right_id

    @property
    def loser_id(self) -> str:
        return self.right_id if self.winner == "left" else self.left_id


@dataclass
class ComfortPoint:
    """One field-survey point along the walking path."""

    point_id: int
    lat: float
    lon: float
    comfort: float             # 1-10 subjective rating
    heart_rate: float          # bpm
    solar: float               # lux-scale
    noise: float               # dB-scale
    altitude: float            # metres
    image_id: str | None = None

    def validate(self) -> "ComfortPoint":
        if not 1.0 <= self.comfort <= 10.0:
            raise RangeError(f"comfort {self.comfort} outside [1, 10]")
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise RangeError(f"invalid coordinates ({self.lat}, {self.lon})")
        return self

    def hsna(self) -> tuple[float, float, float, float]:
        """The four wearable/handheld channels in fixed order."""
        return (self.heart_rate, self.solar, self.noise, self.altitude)

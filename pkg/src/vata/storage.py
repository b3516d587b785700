"""File formats and ingestion/persistence.

features.csv   wide, one row per image: index columns, 19 raw segmentation
               fractions, object counts, pixel statistics, scene
               probabilities, then an optional fixed-width embedding block
               (emb_0000, emb_0001, ...).
comparisons.jsonl  one comparison per line, append-friendly; file order is
               authoritative for rating replay.
scores.csv     image_id, vata, then the 19 VPI columns alphabetically.
comfort.csv    one row per path point.

Floats are serialized with ``repr`` (shortest round-tripping form), so
load-after-save reproduces values bit for bit.
"""

from __future__ import annotations

import csv
import json
import os
import re
from collections.abc import Iterable, Sequence
from pathlib import Path

from . import schema
from .errors import DuplicateError, ParseError, RangeError, SchemaError
from .records import (
    ComfortPoint,
    FeatureVector,
    ImageRecord,
    IndicatorScores,
    PairwiseComparison,
)

_INDEX_COLUMNS = ("image_id", "lat", "lon", "capture_date", "cluster_label")
_EMB_RE = re.compile(r"^emb_(\d{4})$")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_float(raw: str, row: int, column: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(row, column, f"row {row}: column {column!r} value {raw!r} is not numeric") from None


def feature_columns(embedding_dim: int = 0) -> list[str]:
    """Canonical features.csv header for a given embedding width."""
    cols = list(_INDEX_COLUMNS)
    cols += list(schema.segmentation_classes())
    cols += list(schema.object_names())
    cols += list(schema.pixel_names())
    cols += list(schema.scene_names())
    cols += [f"emb_{i:04d}" for i in range(embedding_dim)]
    return cols


def _check_feature_header(header: Sequence[str]) -> int:
    """Validate the header and return the embedding width it declares."""
    emb_cols = [c for c in header if _EMB_RE.match(c)]
    expected = feature_columns(len(emb_cols))
    header_set = set(header)
    for col in expected:
        if col not in header_set:
            raise SchemaError(col, f"missing column {col!r}")
    for col in header:
        if col not in expected:
            raise SchemaError(col, f"unknown column {col!r}")
    # embedding block must be contiguous 0..k-1
    indices = sorted(int(_EMB_RE.match(c).group(1)) for c in emb_cols)
    if indices != list(range(len(indices))):
        raise SchemaError("embedding", "embedding columns are not a contiguous emb_0000..emb_NNNN block")
    return len(emb_cols)


def write_features(
    images: Sequence[ImageRecord],
    features: Sequence[FeatureVector],
    path: str | os.PathLike,
) -> None:
    """Write the joint image-index + feature table.

    ``images`` and ``features`` must be aligned one-to-one by image_id.
    """
    by_id = {f.image_id: f for f in features}
    if len(by_id) != len(features):
        raise DuplicateError("duplicate image_id among feature vectors")
    emb_dim = 0
    for f in features:
        if f.embedding is not None:
            emb_dim = len(f.embedding)
            break
    cols = feature_columns(emb_dim)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for img in images:
            img.validate()
            feat = by_id.get(img.image_id)
            if feat is None:
                raise SchemaError("image_id", f"no features for image {img.image_id!r}")
            feat.validate()
            row = [
                img.image_id,
                _fmt(float(img.lat)),
                _fmt(float(img.lon)),
                _fmt(img.capture_date),
                _fmt(img.cluster_label),
            ]
            row += [_fmt(float(feat.segmentation[c])) for c in schema.segmentation_classes()]
            row += [_fmt(float(feat.objects[c])) for c in schema.object_names()]
            row += [_fmt(float(feat.pixel[c])) for c in schema.pixel_names()]
            row += [_fmt(float(feat.scene[c])) for c in schema.scene_names()]
            if emb_dim:
                if feat.embedding is None or len(feat.embedding) != emb_dim:
                    raise SchemaError("embedding", f"embedding width mismatch for {img.image_id!r}")
                row += [_fmt(float(v)) for v in feat.embedding]
            writer.writerow(row)


def _read_feature_rows(path: str | os.PathLike):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("image_id", f"{path}: empty file") from None
        emb_dim = _check_feature_header(header)
        idx = {name: header.index(name) for name in header}
        rows = list(reader)
    return header, idx, emb_dim, rows


def load_features(path: str | os.PathLike) -> list[FeatureVector]:
    """Load feature vectors; rejects unknown columns and duplicate ids."""
    _, idx, emb_dim, rows = _read_feature_rows(path)
    out: list[FeatureVector] = []
    seen: set[str] = set()
    for n, row in enumerate(rows, start=1):
        image_id = row[idx["image_id"]]
        if image_id in seen:
            raise DuplicateError(f"duplicate image_id {image_id!r}")
        seen.add(image_id)
        seg = {c: _parse_float(row[idx[c]], n, c) for c in schema.segmentation_classes()}
        obj = {c: _parse_float(row[idx[c]], n, c) for c in schema.object_names()}
        pix = {c: _parse_float(row[idx[c]], n, c) for c in schema.pixel_names()}
        scn = {c: _parse_float(row[idx[c]], n, c) for c in schema.scene_names()}
        emb = None
        if emb_dim:
            emb = tuple(
                _parse_float(row[idx[f"emb_{i:04d}"]], n, f"emb_{i:04d}")
                for i in range(emb_dim)
            )
        out.append(
            FeatureVector(image_id, seg, obj, pix, scn, emb).validate()
        )
    return out


def load_images(path: str | os.PathLike) -> list[ImageRecord]:
    """Load the image index columns of a features file."""
    _, idx, _, rows = _read_feature_rows(path)
    out = []
    seen: set[str] = set()
    for n, row in enumerate(rows, start=1):
        image_id = row[idx["image_id"]]
        if image_id in seen:
            raise DuplicateError(f"duplicate image_id {image_id!r}")
        seen.add(image_id)
        date = row[idx["capture_date"]] or None
        label_raw = row[idx["cluster_label"]]
        label = None
        if label_raw != "":
            try:
                label = int(label_raw)
            except ValueError:
                raise ParseError(n, "cluster_label") from None
        out.append(
            ImageRecord(
                image_id,
                _parse_float(row[idx["lat"]], n, "lat"),
                _parse_float(row[idx["lon"]], n, "lon"),
                date,
                label,
            ).validate()
        )
    return out


def set_cluster_labels(path: str | os.PathLike, labels: dict[str, int]) -> None:
    """Rewrite a features file with the cluster_label column filled in."""
    header, idx, _, rows = _read_feature_rows(path)
    col = idx["cluster_label"]
    for row in rows:
        image_id = row[idx["image_id"]]
        if image_id in labels:
            row[col] = str(labels[image_id])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# --- comparisons (JSON lines) ----------------------------------------------

def comparison_to_json(c: PairwiseComparison) -> str:
    return json.dumps(
        {
            "indicator": c.indicator,
            "left_id": c.left_id,
            "right_id": c.right_id,
            "winner": c.winner,
            "participant_id": c.participant_id,
            "timestamp": c.timestamp,
        },
        sort_keys=True,
        separators=(",", ":"),
    )


def _comparison_from_obj(obj: dict, line_no: int) -> PairwiseComparison:
    try:
        c = PairwiseComparison(
            indicator=obj["indicator"],
            left_id=obj["left_id"],
            right_id=obj["right_id"],
            winner=obj["winner"],
            participant_id=obj["participant_id"],
            timestamp=obj["timestamp"],
        )
    except KeyError as exc:
        raise SchemaError(str(exc.args[0]), f"line {line_no}: missing field {exc.args[0]!r}") from None
    return c.validate()


def load_comparisons(path: str | os.PathLike) -> list[PairwiseComparison]:
    """Load the comparison log, preserving file order."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                raise ParseError(n, "line", f"line {n} is not valid JSON") from None
            out.append(_comparison_from_obj(obj, n))
    return out


def write_comparisons(
    comparisons: Iterable[PairwiseComparison], path: str | os.PathLike
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in comparisons:
            fh.write(comparison_to_json(c.validate()) + "\n")


def append_comparison(c: PairwiseComparison, path: str | os.PathLike) -> None:
    """Append one comparison; the log is never rewritten."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(comparison_to_json(c.validate()) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


# --- scores ------------------------------------------------------------------

def score_columns() -> list[str]:
    return ["image_id", "vata"] + list(schema.VPI_NAMES_SORTED)


def save_scores(scores: Sequence[IndicatorScores], path: str | os.PathLike) -> None:
    """Write scores.csv with the fixed column order."""
    if not scores:
        raise RangeError("scores must be non-empty")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(score_columns())
        for s in scores:
            s.validate()
            row = [s.image_id, _fmt(float(s.vata))]
            row += [_fmt(float(s.vpi[name])) for name in schema.VPI_NAMES_SORTED]
            writer.writerow(row)


def load_scores(path: str | os.PathLike) -> list[IndicatorScores]:
    expected = score_columns()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != expected:
            missing = [c for c in expected if c not in header]
            bad = missing[0] if missing else [c for c in header if c not in expected][0]
            raise SchemaError(bad, f"scores header mismatch near column {bad!r}")
        out = []
        seen: set[str] = set()
        for n, row in enumerate(reader, start=1):
            image_id = row[0]
            if image_id in seen:
                raise DuplicateError(f"duplicate image_id {image_id!r}")
            seen.add(image_id)
            vata = _parse_float(row[1], n, "vata")
            vpi = {
                name: _parse_float(row[i + 2], n, name)
                for i, name in enumerate(schema.VPI_NAMES_SORTED)
            }
            out.append(IndicatorScores(image_id, vata, vpi).validate())
    return out


# --- comfort path -------------------------------------------------------------

_COMFORT_COLUMNS = (
    "point_id", "lat", "lon", "comfort", "heart_rate", "solar", "noise",
    "altitude", "image_id",
)


def save_comfort(points: Sequence[ComfortPoint], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COMFORT_COLUMNS)
        last_id = None
        for p in points:
            p.validate()
            if last_id is not None and p.point_id <= last_id:
                raise RangeError("point_id must be strictly increasing along the path")
            last_id = p.point_id
            writer.writerow([
                p.point_id,
                _fmt(float(p.lat)), _fmt(float(p.lon)), _fmt(float(p.comfort)),
                _fmt(float(p.heart_rate)), _fmt(float(p.solar)),
                _fmt(float(p.noise)), _fmt(float(p.altitude)),
                p.image_id or "",
            ])


def load_comfort(path: str | os.PathLike) -> list[ComfortPoint]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != _COMFORT_COLUMNS:
            missing = [c for c in _COMFORT_COLUMNS if c not in header]
            bad = missing[0] if missing else [c for c in header if c not in _COMFORT_COLUMNS][0]
            raise SchemaError(bad, f"comfort header mismatch near column {bad!r}")
        out = []
        last_id = None
        for n, row in enumerate(reader, start=1):
            try:
                point_id = int(row[0])
            except ValueError:
                raise ParseError(n, "point_id") from None
            if last_id is not None and point_id <= last_id:
                raise RangeError(f"point_id not strictly increasing at row {n}")
            last_id = point_id
            vals = [_parse_float(row[i], n, _COMFORT_COLUMNS[i]) for i in range(1, 8)]
            out.append(
                ComfortPoint(
                    point_id, vals[0], vals[1], vals[2], vals[3], vals[4],
                    vals[5], vals[6], row[8] or None,
                ).validate()
            )
    return out


def write_json(obj, path: str | os.PathLike) -> None:
    """Deterministic JSON writer used for every report artifact."""
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

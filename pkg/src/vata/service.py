"""Live pairwise-comparison survey service.

Serves randomized image pairs per indicator (least-exposed-first with
seeded tie-breaks), records choices to the append-only comparison log, and
exposes ranking snapshots plus per-participant progress. The log file is
the single source of truth: restarting the service replays it and
reconstructs identical state.

All state mutation and log appends serialize through one lock; snapshots
are cached and recomputed only when the log has grown.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import rating, schema, storage
from .errors import ConfigError
from .records import PairwiseComparison

DEFAULT_MAX_PER_INDICATOR = 18


@dataclass
class ServiceConfig:
    manifest_path: str
    log_path: str
    seed: int = 0
    port: int = 8008
    max_per_indicator: int = DEFAULT_MAX_PER_INDICATOR
    scoring: rating.ScoringConfig = field(default_factory=rating.ScoringConfig)

    @classmethod
    def from_file(cls, path: str) -> "ServiceConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read service config {path}: {exc}") from None
        scoring = rating.ScoringConfig(
            seed=raw.get("seed", 0), **raw.get("scoring", {})
        )
        return cls(
            manifest_path=raw["manifest"],
            log_path=raw["log"],
            seed=raw.get("seed", 0),
            port=raw.get("port", 8008),
            max_per_indicator=raw.get("max_per_indicator", DEFAULT_MAX_PER_INDICATOR),
            scoring=scoring,
        )


class ApiError(Exception):
    def __init__(self, status: int, detail, payload: dict | None = None):
        self.status = status
        self.detail = detail
        self.payload = payload or {"error": detail}
        super().__init__(str(detail))


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


class SurveyService:
    """Framework-agnostic core; the HTTP layer is a thin adapter."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        manifest = json.loads(Path(config.manifest_path).read_text(encoding="utf-8"))
        self.images: dict[str, str] = {
            entry["id"]: entry.get("url", "") for entry in manifest["images"]
        }
        if len(self.images) < 2:
            raise ConfigError("manifest must list at least 2 images")
        self.image_ids = sorted(self.images)
        self.indicators = list(schema.INDICATORS)
        self.log_path = Path(config.log_path)

        self._lock = threading.RLock()
        self._exposure: dict[str, dict[str, int]] = {
            ind: {i: 0 for i in self.image_ids} for ind in self.indicators
        }
        self._answered: set[tuple[str, str, tuple[str, str]]] = set()
        self._served: dict[tuple[str, str], set[tuple[str, str]]] = {}
        self._progress: dict[str, dict[str, int]] = {}
        self._request_counter = 0
        self._log_lines = 0
        # per-indicator snapshot cache: log size it was built at + body bytes
        self._snapshots: dict[str, tuple[int, bytes]] = {}
        self._snapshot_building: set[str] = set()
        self._snapshot_cond = threading.Condition(self._lock)
        self._replay_log()

    # --- state reconstruction ------------------------------------------------

    def _replay_log(self) -> None:
        if not self.log_path.exists():
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self.log_path.touch()
            return
        for c in storage.load_comparisons(self.log_path):
            self._apply_comparison(c)
            self._log_lines += 1

    def _apply_comparison(self, c: PairwiseComparison) -> None:
        self._exposure[c.indicator][c.left_id] += 1
        self._exposure[c.indicator][c.right_id] += 1
        self._answered.add((c.participant_id, c.indicator, _pair_key(c.left_id, c.right_id)))
        self._progress.setdefault(c.participant_id, {})
        self._progress[c.participant_id][c.indicator] = (
            self._progress[c.participant_id].get(c.indicator, 0) + 1
        )

    # --- pair serving ----------------------------------------------------------

    def get_pair(self, indicator: str, participant: str) -> dict:
        if indicator not in self.indicators:
            raise ApiError(404, f"unknown indicator {indicator!r}")
        if not participant:
            raise ApiError(400, "participant required")
        with self._lock:
            progress = self._progress.setdefault(participant, {})
            done = progress.get(indicator, 0)
            if done >= self.config.max_per_indicator:
                raise ApiError(
                    409,
                    f"participant has completed {done}/{self.config.max_per_indicator}",
                    {"error": "indicator complete", "progress": dict(progress)},
                )
            self._request_counter += 1
            rng = np.random.default_rng([self.config.seed, self._request_counter])
            exposure = self._exposure[indicator]
            by_exposure = sorted(self.image_ids, key=lambda i: (exposure[i], i))
            pair = self._select_pair(by_exposure, exposure, indicator, participant, rng)
            if pair is None:
                raise ApiError(409, "no unanswered pair available for this participant")
            a, b = pair
            if rng.random() < 0.5:
                a, b = b, a
            exposure[a] += 1
            exposure[b] += 1
            self._served.setdefault((participant, indicator), set()).add(_pair_key(a, b))
            return {
                "left": {"id": a, "url": self.images[a]},
                "right": {"id": b, "url": self.images[b]},
                "indicator": indicator,
                "question_text": schema.QUESTION_TEXT[indicator],
            }

    def _select_pair(self, by_exposure, exposure, indicator, participant, rng):
        """First image: least exposed (random among ties). Partner: least
        exposed compatible image. Falls back over the exposure ordering."""
        def tied_shuffle(candidates):
            out = []
            group: list[str] = []
            level = None
            for i in candidates:
                if exposure[i] != level:
                    if group:
                        out.extend(rng.permutation(group))
                    group = [i]
                    level = exposure[i]
                else:
                    group.append(i)
            if group:
                out.extend(rng.permutation(group))
            return out

        ordered = tied_shuffle(by_exposure)
        for a in ordered:
            for b in ordered:
                if b == a:
                    continue
                if (participant, indicator, _pair_key(a, b)) in self._answered:
                    continue
                return a, b
        return None

    # --- responses ----------------------------------------------------------------

    def post_response(
        self, indicator: str, left: str, right: str, winner: str, participant: str
    ) -> dict:
        if indicator not in self.indicators:
            raise ApiError(404, f"unknown indicator {indicator!r}")
        if winner not in ("left", "right"):
            raise ApiError(400, "winner must be 'left' or 'right'")
        if left == right or left not in self.images or right not in self.images:
            raise ApiError(400, "invalid image pair")
        key = _pair_key(left, right)
        with self._lock:
            served = self._served.get((participant, indicator), set())
            if (participant, indicator, key) in self._answered:
                raise ApiError(409, "pair already answered")
            if key not in served:
                raise ApiError(409, "pair was not served to this participant")
            done = self._progress.get(participant, {}).get(indicator, 0)
            if done >= self.config.max_per_indicator:
                raise ApiError(
                    409,
                    f"participant already recorded {done}/{self.config.max_per_indicator}",
                )
            comparison = PairwiseComparison(
                indicator=indicator,
                left_id=left,
                right_id=right,
                winner=winner,
                participant_id=participant,
                timestamp=datetime.now(timezone.utc).isoformat(),
            )
            storage.append_comparison(comparison, self.log_path)
            self._log_lines += 1
            served.discard(key)
            self._answered.add((participant, indicator, key))
            progress = self._progress.setdefault(participant, {})
            progress[indicator] = progress.get(indicator, 0) + 1
            # exposure was already counted when the pair was served
            return {"recorded": True, "progress": dict(progress)}

    # --- ranking snapshots -----------------------------------------------------------

    def scores_snapshot(self, indicator: str) -> bytes:
        if indicator not in self.indicators:
            raise ApiError(404, f"unknown indicator {indicator!r}")
        with self._lock:
            log_size = self._log_lines
            cached = self._snapshots.get(indicator)
            if cached is not None and cached[0] == log_size:
                return cached[1]
            while indicator in self._snapshot_building:
                if cached is not None:
                    return cached[1]       # stale snapshot while a rebuild runs
                self._snapshot_cond.wait()
                cached = self._snapshots.get(indicator)
                log_size = self._log_lines
                if cached is not None and cached[0] == log_size:
                    return cached[1]
            self._snapshot_building.add(indicator)
        try:
            # built off the lock so requests keep flowing during recompute
            comparisons = storage.load_comparisons(self.log_path)
            relevant = [c for c in comparisons if c.indicator == indicator]
            if not relevant:
                raise ApiError(404, f"no responses for indicator {indicator!r}")
            scoring = rating.score_indicator(
                comparisons, indicator, self.config.scoring, self.image_ids
            )
            body = render_scores(scoring).encode("utf-8")
        finally:
            with self._lock:
                self._snapshot_building.discard(indicator)
                self._snapshot_cond.notify_all()
        with self._lock:
            self._snapshots[indicator] = (log_size, body)
        return body

    # --- progress ---------------------------------------------------------------------

    def progress(self, participant: str) -> dict:
        with self._lock:
            if participant not in self._progress:
                raise ApiError(404, f"unknown participant {participant!r}")
            counts = {ind: 0 for ind in self.indicators}
            counts.update(self._progress[participant])
            return {
                "participant": participant,
                "target": self.config.max_per_indicator,
                "progress": counts,
            }


def render_scores(scoring: rating.IndicatorScoring) -> str:
    """Canonical snapshot body; identical bytes for identical scores."""
    return json.dumps(
        {
            "indicator": scoring.indicator,
            "scores": {k: scoring.scores[k] for k in sorted(scoring.scores)},
            "diagnostics": scoring.diagnostics,
        },
        sort_keys=True,
        separators=(",", ":"),
    )


def create_app(service: SurveyService):
    """FastAPI adapter over the service core."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse, Response

    app = FastAPI(title="pairwise survey service")

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.payload)

    @app.get("/api/pair")
    def get_pair(indicator: str, participant: str):
        return service.get_pair(indicator, participant)

    @app.post("/api/response", status_code=201)
    def post_response(body: dict):
        missing = [k for k in ("indicator", "left", "right", "winner", "participant") if k not in body]
        if missing:
            raise ApiError(400, f"missing field {missing[0]!r}")
        return service.post_response(
            body["indicator"], body["left"], body["right"],
            body["winner"], body["participant"],
        )

    @app.get("/api/scores")
    def get_scores(indicator: str):
        return Response(
            content=service.scores_snapshot(indicator),
            media_type="application/json",
        )

    @app.get("/api/progress")
    def get_progress(participant: str):
        return service.progress(participant)

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    app = create_app(SurveyService(config))
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")

"""Review state: an append-only decision log over an immutable dataset.

The dataset's initial label files are never rewritten; every Accept,
Edit, or Reject appends one JSON line to review.log, and current state
is always (initial dataset + replay of the log). Crash recovery is a
reload; the replay-equals-state invariant holds by construction.

Dataset layout:
    images/{band}/{pair_id}.png
    labels/{band}/{pair_id}.txt     initial labels (optional per band)
    masks/{pair_id}.json            mask interchange files (optional)
    review.log                      decision log (created on first use)
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..errors import ConflictError, NotFoundError, ValidationError
from ..imageio import list_images
from ..maskio import BBoxNorm, LabelFile, LabelRecord, PolygonNorm, parse_yolo

ACTIONS = ("Accept", "Edit", "Reject")
ELAPSED_CLAMP_SECONDS = 600.0
LOG_NAME = "review.log"


def labels_to_payload(labels: LabelFile) -> dict:
    records = []
    for record in labels.records:
        geom = record.geometry
        if isinstance(geom, BBoxNorm):
            records.append({"category_id": record.category_id,
                            "bbox": [geom.cx, geom.cy, geom.w, geom.h]})
        else:
            flat = [coord for vertex in geom.vertices for coord in vertex]
            records.append({"category_id": record.category_id, "polygon": flat})
    return {"pair_id": labels.pair_id, "records": records}


def labels_from_payload(payload: dict) -> LabelFile:
    records = []
    for i, entry in enumerate(payload.get("records", [])):
        category_id = int(entry["category_id"])
        if "bbox" in entry:
            cx, cy, w, h = (float(v) for v in entry["bbox"])
            geom: BBoxNorm | PolygonNorm = BBoxNorm(cx=cx, cy=cy, w=w, h=h)
            geom.validate(eps=1e-6)
        elif "polygon" in entry:
            flat = [float(v) for v in entry["polygon"]]
            if len(flat) < 6 or len(flat) % 2:
                raise ValidationError(f"record {i}: bad polygon coordinate count")
            geom = PolygonNorm(vertices=tuple(zip(flat[0::2], flat[1::2])))
            geom.validate(eps=1e-6)
        else:
            raise ValidationError(f"record {i}: needs 'bbox' or 'polygon'")
        records.append(LabelRecord(category_id=category_id, geometry=geom))
    return LabelFile(pair_id=str(payload.get("pair_id", "")), records=records)


@dataclass
class ReviewDecision:
    pair_id: str
    band: str
    action: str
    reviewer: str = ""
    elapsed_seconds: float = 0.0
    timestamp: str = ""
    token: str = ""
    edited_labels: LabelFile | None = None

    def validate(self) -> None:
        if self.action not in ACTIONS:
            raise ValidationError(f"unknown action {self.action!r}")
        if self.action == "Edit" and self.edited_labels is None:
            raise ValidationError("Edit decision requires edited_labels")
        if self.elapsed_seconds < 0:
            raise ValidationError("elapsed_seconds must be >= 0")

    def to_json(self) -> dict:
        payload = {
            "pair_id": self.pair_id,
            "band": self.band,
            "action": self.action,
            "reviewer": self.reviewer,
            "elapsed_seconds": self.elapsed_seconds,
            "timestamp": self.timestamp,
            "token": self.token,
        }
        if self.edited_labels is not None:
            payload["edited_labels"] = labels_to_payload(self.edited_labels)
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "ReviewDecision":
        edited = payload.get("edited_labels")
        return cls(
            pair_id=str(payload["pair_id"]),
            band=str(payload.get("band", "rgb")),
            action=str(payload["action"]),
            reviewer=str(payload.get("reviewer", "")),
            elapsed_seconds=float(payload.get("elapsed_seconds", 0.0)),
            timestamp=str(payload.get("timestamp", "")),
            token=str(payload.get("token", "")),
            edited_labels=labels_from_payload(edited) if edited is not None else None,
        )


@dataclass
class ReviewQueueEntry:
    pair_id: str
    status: str = "Pending"  # Pending | Decided
    decision: ReviewDecision | None = None


@dataclass
class ReviewStats:
    decisions: int
    decided: int
    pending: int
    mean_elapsed_seconds: float | None
    projected_hours_remaining: float | None


@dataclass
class _PairState:
    entry: ReviewQueueEntry
    edited: dict[str, LabelFile] = field(default_factory=dict)


class ReviewStore:
    """Replayable review state over one dataset directory."""

    def __init__(self, root: str | Path, label_mode: str = "bbox"):
        self.root = Path(root)
        self.label_mode = label_mode
        self._lock = threading.Lock()
        self._log_path = self.root / LOG_NAME
        rgb_dir = self.root / "images" / "rgb"
        if not rgb_dir.is_dir():
            raise NotFoundError(f"dataset has no images/rgb directory: {self.root}")
        self._pairs: dict[str, _PairState] = {
            p.stem: _PairState(entry=ReviewQueueEntry(pair_id=p.stem))
            for p in list_images(rgb_dir)
        }
        self._tokens: dict[tuple[str, str], ReviewQueueEntry] = {}
        self._elapsed: list[float] = []
        if self._log_path.exists():
            for line in self._log_path.read_text().splitlines():
                if line.strip():
                    self._apply(ReviewDecision.from_json(json.loads(line)))

    # -- state ------------------------------------------------------------

    def pair_ids(self) -> list[str]:
        return sorted(self._pairs)

    def bands(self, pair_id: str) -> list[str]:
        self._require(pair_id)
        images_root = self.root / "images"
        return sorted(
            d.name for d in images_root.iterdir()
            if d.is_dir() and any(p.stem == pair_id for p in list_images(d))
        )

    def image_path(self, pair_id: str, band: str) -> Path:
        self._require(pair_id)
        for path in list_images(self.root / "images" / band):
            if path.stem == pair_id:
                return path
        raise NotFoundError(f"no {band} image for pair {pair_id!r}")

    def current_labels(self, pair_id: str, band: str) -> LabelFile:
        state = self._require(pair_id)
        if band in state.edited:
            edited = state.edited[band]
            return LabelFile(pair_id=pair_id, records=list(edited.records))
        label_path = self.root / "labels" / band / f"{pair_id}.txt"
        if label_path.exists():
            return parse_yolo(label_path.read_text(), self.label_mode, pair_id=pair_id)
        return LabelFile(pair_id=pair_id, records=[])

    def maskset_payload(self, pair_id: str) -> dict | None:
        self._require(pair_id)
        mask_path = self.root / "masks" / f"{pair_id}.json"
        if not mask_path.exists():
            return None
        return json.loads(mask_path.read_text())

    def list_pending(self, limit: int = 50, offset: int = 0) -> list[ReviewQueueEntry]:
        pending = [
            self._pairs[p].entry for p in sorted(self._pairs)
            if self._pairs[p].entry.status == "Pending"
        ]
        return pending[offset:offset + limit]

    def counts(self) -> tuple[int, int]:
        pending = sum(1 for s in self._pairs.values() if s.entry.status == "Pending")
        return pending, len(self._pairs) - pending

    def entry(self, pair_id: str) -> ReviewQueueEntry:
        return self._require(pair_id).entry

    def rejected_ids(self) -> set[str]:
        return {
            pid for pid, s in self._pairs.items()
            if s.entry.decision is not None and s.entry.decision.action == "Reject"
        }

    # -- mutation ---------------------------------------------------------

    def post_decision(self, decision: ReviewDecision, re_review: bool = False) -> ReviewQueueEntry:
        decision.validate()
        with self._lock:
            state = self._require(decision.pair_id)
            token_key = (decision.pair_id, decision.token)
            if decision.token and token_key in self._tokens:
                return self._tokens[token_key]  # idempotent retry
            if state.entry.status == "Decided" and not re_review:
                raise ConflictError(
                    f"pair {decision.pair_id!r} already decided; re-review not enabled"
                )
            if not decision.timestamp:
                decision.timestamp = datetime.now(timezone.utc).isoformat()
            decision.elapsed_seconds = min(decision.elapsed_seconds, ELAPSED_CLAMP_SECONDS)
            with self._log_path.open("a") as fh:
                fh.write(json.dumps(decision.to_json()) + "\n")
            return self._apply(decision)

    def _apply(self, decision: ReviewDecision) -> ReviewQueueEntry:
        state = self._require(decision.pair_id)
        state.entry.status = "Decided"
        state.entry.decision = decision
        if decision.action == "Edit" and decision.edited_labels is not None:
            state.edited[decision.band] = decision.edited_labels
        if decision.token:
            self._tokens[(decision.pair_id, decision.token)] = state.entry
        self._elapsed.append(min(decision.elapsed_seconds, ELAPSED_CLAMP_SECONDS))
        return state.entry

    # -- stats ------------------------------------------------------------

    def review_stats(self) -> ReviewStats:
        pending, decided = self.counts()
        if not self._elapsed:
            return ReviewStats(decisions=0, decided=decided, pending=pending,
                               mean_elapsed_seconds=None, projected_hours_remaining=None)
        mean = sum(self._elapsed) / len(self._elapsed)
        return ReviewStats(
            decisions=len(self._elapsed),
            decided=decided,
            pending=pending,
            mean_elapsed_seconds=mean,
            projected_hours_remaining=pending * mean / 3600.0,
        )

    def _require(self, pair_id: str) -> _PairState:
        state = self._pairs.get(pair_id)
        if state is None:
            raise NotFoundError(f"unknown pair {pair_id!r}")
        return state

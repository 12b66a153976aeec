"""HTTP JSON API for the human verification pass.

Endpoints consumed by the browser client:
    GET  /api/pairs?status=pending&limit&offset
    GET  /api/pairs/{id}
    GET  /api/pairs/{id}/image/{band}
    POST /api/pairs/{id}/decision
    GET  /api/stats
Static files for the UI bundle are served at / when a bundle directory
exists (default <repo>/frontend/dist, override with --ui-dir or
MATT_UI_DIR).
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..errors import ConflictError, NotFoundError, ValidationError
from .store import ReviewDecision, ReviewStore, labels_from_payload, labels_to_payload


class DecisionBody(BaseModel):
    action: str
    band: str = "rgb"
    reviewer: str = ""
    elapsed_seconds: float = 0.0
    token: str = ""
    timestamp: str = ""
    re_review: bool = False
    edited_labels: dict | None = None


def default_ui_dir() -> Path | None:
    env = os.environ.get("MATT_UI_DIR")
    if env:
        return Path(env)
    # src/matt/review/server.py -> repo root (editable install only)
    candidate = Path(__file__).resolve().parents[3] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def create_app(store: ReviewStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="matt review")

    @app.get("/api/pairs")
    def list_pairs(status: str = "pending", limit: int = 50, offset: int = 0):
        if status != "pending":
            raise HTTPException(status_code=400, detail="only status=pending is supported")
        entries = store.list_pending(limit=limit, offset=offset)
        pending, decided = store.counts()
        return {
            "entries": [{"pair_id": e.pair_id, "status": e.status} for e in entries],
            "pending": pending,
            "decided": decided,
        }

    @app.get("/api/pairs/{pair_id}")
    def get_pair(pair_id: str):
        try:
            bands = store.bands(pair_id)
            labels = {
                band: labels_to_payload(store.current_labels(pair_id, band))
                for band in bands
            }
            masks = store.maskset_payload(pair_id)
            entry = store.entry(pair_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {
            "pair_id": pair_id,
            "status": entry.status,
            "bands": bands,
            "images": {band: f"/api/pairs/{pair_id}/image/{band}" for band in bands},
            "labels": labels,
            "masks": masks,
        }

    @app.get("/api/pairs/{pair_id}/image/{band}")
    def get_image(pair_id: str, band: str):
        try:
            path = store.image_path(pair_id, band)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return FileResponse(path, media_type="image/png")

    @app.post("/api/pairs/{pair_id}/decision")
    def post_decision(pair_id: str, body: DecisionBody):
        edited = None
        if body.edited_labels is not None:
            try:
                edited = labels_from_payload(body.edited_labels)
            except (ValidationError, KeyError, ValueError) as exc:
                raise HTTPException(status_code=422, detail=f"bad edited_labels: {exc}")
            edited.pair_id = pair_id
        decision = ReviewDecision(
            pair_id=pair_id,
            band=body.band,
            action=body.action,
            reviewer=body.reviewer,
            elapsed_seconds=body.elapsed_seconds,
            timestamp=body.timestamp,
            token=body.token,
            edited_labels=edited,
        )
        try:
            entry = store.post_decision(decision, re_review=body.re_review)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {
            "pair_id": entry.pair_id,
            "status": entry.status,
            "action": entry.decision.action if entry.decision else None,
        }

    @app.get("/api/stats")
    def stats():
        s = store.review_stats()
        return {
            "decisions": s.decisions,
            "decided": s.decided,
            "pending": s.pending,
            "mean_elapsed_seconds": s.mean_elapsed_seconds,
            "projected_hours_remaining": s.projected_hours_remaining,
        }

    bundle = Path(ui_dir) if ui_dir else default_ui_dir()
    if bundle and bundle.is_dir():
        app.mount("/", StaticFiles(directory=bundle, html=True), name="ui")
    return app


def serve(dataset: str | Path, port: int = 8000, host: str = "127.0.0.1",
          ui_dir: str | Path | None = None, label_mode: str = "bbox") -> None:
    import uvicorn

    store = ReviewStore(dataset, label_mode=label_mode)
    app = create_app(store, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")

"""HTTP study service: sessions, trial payloads, responses, export.

Endpoints (JSON unless noted):
  POST /sessions                {"seed": optional int} -> {session_id, seed}
  GET  /sessions/{id}/trial     -> current trial payload or {"done": true}
  POST /sessions/{id}/response  -> acknowledgement (+ feedback after "predict")
  GET  /export                  -> CSV (text/csv)
  GET  /assets/...              -> bundle PNGs
"""
from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .bundle import ExplanationBundle, assemble_bundle
from .data import ImageStore
from .errors import (
    NoTeachingSetFound,
    OutOfOrder,
    UnknownSession,
    ValidationError,
)
from .model import ThetaParams
from .study import (
    CERTIFICATION_TARGETS_PER_CATEGORY,
    PAYLOAD_SCHEMA_VERSION,
    PREDICTION_TARGETS_PER_CATEGORY,
    Exporter,
    ResponseRecord,
    SessionStore,
    build_study_plan,
    next_trial,
    record_response,
)
from .teaching import (
    CATEGORIES,
    TeachingConfig,
    build_category_pools,
    select_teaching_set,
)
from .training import TrainConfig, default_train_config

log = logging.getLogger(__name__)


def prepare_study_assets(store: ImageStore, theta: ThetaParams, assets_dir,
                         teaching_cfg: TeachingConfig,
                         train_cfg: TrainConfig | None = None,
                         per_category: int | None = None,
                         ) -> dict[str, ExplanationBundle]:
    """Build teaching sets and bundles for the study's target images.

    Walks each confusion category in dataset order and bundles images
    until enough are available (2 prediction + 4 certification targets
    per category by default). Images whose teaching search fails are
    skipped with a warning; per-target teaching seeds derive from the
    base seed plus the image's dataset position, so the outcome is
    reproducible.
    """
    if train_cfg is None:
        train_cfg = default_train_config(4)
    needed = per_category if per_category is not None else (
        PREDICTION_TARGETS_PER_CATEGORY + CERTIFICATION_TARGETS_PER_CATEGORY)
    assets_dir = Path(assets_dir)
    bundles: dict[str, ExplanationBundle] = {}
    done_per_cat = {c: 0 for c in CATEGORIES}
    for position, image in enumerate(store.images):
        cat = image.category
        if cat is None:
            raise ValueError(f"image {image.id!r} lacks model annotations")
        if done_per_cat[cat] >= needed:
            continue
        pools = build_category_pools(store, theta, exclude=image.id)
        cfg = TeachingConfig(
            n_candidates=teaching_cfg.n_candidates,
            epsilon=teaching_cfg.epsilon,
            seed=teaching_cfg.seed + position,
            selection_mode=teaching_cfg.selection_mode)
        try:
            teaching_set = select_teaching_set(image, pools, store, cfg, train_cfg)
        except NoTeachingSetFound as err:
            log.warning("skipping %s: %s", image.id, err)
            continue
        bundles[image.id] = assemble_bundle(
            image, teaching_set, store, assets_dir / "bundles" / image.id)
        done_per_cat[cat] += 1
        if all(v >= needed for v in done_per_cat.values()):
            break
    return bundles


def create_app(store: ImageStore, bundles: dict[str, ExplanationBundle],
               assets_dir, sessions_dir, ui_dir=None) -> FastAPI:
    assets_dir = Path(assets_dir)
    app = FastAPI(title="bayesteach study service")

    def plan_factory(seed: int):
        return build_study_plan(store, bundles, seed)

    sessions = SessionStore(sessions_dir, plan_factory)
    sessions.restore()
    app.state.sessions = sessions

    @app.exception_handler(UnknownSession)
    async def unknown_session(request: Request, exc: UnknownSession):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(OutOfOrder)
    async def out_of_order(request: Request, exc: OutOfOrder):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(ValidationError)
    async def invalid(request: Request, exc: ValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/sessions")
    async def create_session(body: dict | None = None):
        seed = None
        if body and "seed" in body and body["seed"] is not None:
            if not isinstance(body["seed"], int) or body["seed"] < 0:
                raise ValidationError("seed must be a non-negative integer")
            seed = body["seed"]
        session = sessions.create(seed)
        return {"schema_version": PAYLOAD_SCHEMA_VERSION,
                "session_id": session.id, "seed": session.plan.seed,
                "n_trials": len(session.plan.trials())}

    @app.get("/sessions/{session_id}/trial")
    async def get_trial(session_id: str):
        session = sessions.get(session_id)
        return next_trial(session, assets_dir)

    @app.post("/sessions/{session_id}/response")
    async def post_response(session_id: str, body: dict):
        session = sessions.get(session_id)
        if not isinstance(body, dict):
            raise ValidationError("response body must be a JSON object")
        justifications = body.get("justifications") or []
        if not isinstance(justifications, list):
            raise ValidationError("justifications must be a list")
        record = ResponseRecord(
            session_id=session_id,
            trial_id=str(body.get("trial_id", "")),
            phase=str(body.get("phase", "")),
            rating=body.get("rating"),
            certify=body.get("certify"),
            agree=body.get("agree"),
            justifications=tuple(justifications),
            free_text=str(body.get("free_text", "") or ""),
            timestamps=body.get("timestamps") or {},
        )
        return record_response(session, record,
                               persist=sessions.persister(session_id))

    @app.get("/export")
    async def export_csv():
        exporter = Exporter(sessions.dir)
        return PlainTextResponse(exporter.to_csv(), media_type="text/csv")

    app.mount("/assets", StaticFiles(directory=assets_dir), name="assets")
    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app

"""HTTP interface over a fitted ``SearchSpaceReducer``."""

from __future__ import annotations

import json
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .estimator import SearchSpaceReducer
from .search_space import dumps, fact_to_dict
from .types import Distance

logger = logging.getLogger(__name__)

OVERRIDABLE = frozenset({"d", "k", "k_max", "p", "weights", "bm25_top_n", "skip_signals"})


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _json(payload) -> Response:
    return Response(dumps(payload), media_type="application/json")


def _connectivity_value(dist: Distance):
    value = dist.connectivity
    return int(value) if value.is_integer() else value


def create_app(estimator: SearchSpaceReducer) -> FastAPI:
    kb = estimator.kb_
    app = FastAPI(title="kbspace")

    @app.exception_handler(Exception)
    async def internal(request: Request, exc: Exception):
        logger.exception("unhandled error on %s", request.url.path)
        return _error(500, "internal error")

    @app.get("/health")
    def health():
        return _json({"status": "ok", "facts": len(kb), "items": kb.n_items})

    @app.post("/search-space")
    async def search_space(request: Request):
        try:
            body = json.loads(await request.body())
        except (ValueError, UnicodeDecodeError):
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict) or not isinstance(body.get("question"), str):
            return _error(400, "body must be an object with a 'question' string")
        terms = body.get("terms")
        if terms is not None and (not isinstance(terms, list) or not all(isinstance(t, str) for t in terms)):
            return _error(400, "'terms' must be a list of strings")
        overrides = body.get("overrides") or {}
        if not isinstance(overrides, dict):
            return _error(400, "'overrides' must be an object")
        unknown = set(overrides) - OVERRIDABLE
        if unknown:
            return _error(400, f"cannot override {sorted(unknown)}")
        timings = body.get("timings", True)
        if not isinstance(timings, bool):
            return _error(400, "'timings' must be a boolean")
        try:
            est = estimator.with_params(**overrides) if overrides else estimator
            text = est.to_json(body["question"], terms, timings=timings)
        except (ValueError, TypeError) as exc:
            return _error(400, str(exc))
        return Response(text, media_type="application/json")

    def _lookup(name: str, value: str | None):
        if value is None or value == "":
            return None, _error(400, f"missing query parameter '{name}'")
        try:
            return kb.code(value), None
        except KeyError:
            return None, _error(404, f"unknown item {value!r}")

    @app.get("/neighborhood")
    def neighborhood(item: str | None = None):
        x, err = _lookup("item", item)
        if err is not None:
            return err
        facts = [fact_to_dict(kb, f) for f in kb.neighborhood(x)]
        return _json({"item": {"id": item, "label": kb.label(x)}, "facts": facts})

    @app.get("/connectivity")
    def connectivity(item1: str | None = None, item2: str | None = None):
        x1, err = _lookup("item1", item1)
        if err is not None:
            return err
        x2, err = _lookup("item2", item2)
        if err is not None:
            return err
        dist = kb.distance(x1, x2)
        return _json({
            "item1": item1,
            "item2": item2,
            "distance": dist.name.lower(),
            "connectivity": _connectivity_value(dist),
        })

    return app

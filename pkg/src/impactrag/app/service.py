"""HTTP front end: /assess, /chat, /healthz."""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager
from datetime import date
from typing import Callable, Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from loguru import logger
from pydantic import BaseModel, Field

from ..analysts.client import AnalystError
from ..analysts.query import parse_user_query
from ..geo import UnknownZipError
from ..window import TimeWindow
from .engine import Engine, InvalidRequest, render_response


class AssessRequest(BaseModel):
    zip: str = Field(pattern=r"^[0-9]{5}$")
    start: date
    end: date
    mode: Literal["text_only", "text_caption", "multimodal"] = "multimodal"


class ChatRequest(BaseModel):
    message: str = Field(min_length=1)
    mode: Literal["text_only", "text_caption", "multimodal"] = "multimodal"


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def create_app(engine: Engine | None = None, loader: Callable[[], Engine] | None = None) -> FastAPI:
    """Build the app around a ready engine, or load one in the background via ``loader``.

    Until an engine is available every endpoint answers 503.
    """
    state = {"engine": engine, "error": None}

    def _load() -> None:
        try:
            state["engine"] = loader()
        except Exception as exc:  # noqa: BLE001 - surfaced through /healthz
            logger.exception("engine load failed")
            state["error"] = str(exc)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if state["engine"] is None and loader is not None:
            threading.Thread(target=_load, daemon=True).start()
        yield

    app = FastAPI(title="impactrag", lifespan=lifespan)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse({"error": "invalid request", "detail": jsonable(exc.errors())}, status_code=400)

    def run(zip_code: str, window: TimeWindow, mode: str) -> Response:
        eng = state["engine"]
        if eng is None:
            return _error(503, "engine not loaded")
        try:
            result = eng.assess(zip_code, window, mode)
        except UnknownZipError:
            return _error(404, f"unknown zip {zip_code}")
        except InvalidRequest as exc:
            return _error(400, str(exc))
        except AnalystError as exc:
            return _error(502, f"analyst failure: {exc}")
        return Response(render_response(result), media_type="application/json")

    @app.get("/healthz")
    def healthz():
        if state["engine"] is None:
            body = {"status": "loading" if state["error"] is None else "failed"}
            if state["error"]:
                body["error"] = state["error"]
            return JSONResponse(body, status_code=503)
        return {"status": "ok", "documents": len(state["engine"].store)}

    @app.post("/assess")
    def assess(req: AssessRequest):
        if req.start > req.end:
            return _error(400, "start after end")
        return run(req.zip, TimeWindow(req.start, req.end), req.mode)

    @app.post("/chat")
    def chat(req: ChatRequest):
        eng = state["engine"]
        if eng is None:
            return _error(503, "engine not loaded")
        try:
            parsed = parse_user_query(req.message, eng.config.parser_client)
        except AnalystError as exc:
            return _error(502, f"query parser failure: {exc}")
        if parsed.zip is None:
            return _error(400, parsed.diagnostic or "no ZIP code found in the message")
        window = eng.config.default_window if parsed.start is None else TimeWindow(parsed.start, parsed.end)
        return run(parsed.zip, window, req.mode)

    return app


def jsonable(errors) -> list:
    return [{"loc": list(e.get("loc", ())), "msg": str(e.get("msg", ""))} for e in errors]


def serve(config_path: str, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    from .config import load_config

    config = load_config(config_path)
    uvicorn.run(create_app(loader=lambda: Engine.load(config)), host=host, port=port, log_level="info")

"""The shim's HTTP surface: /v1/score, /v1/chat, /healthz.

Scoring behavior depends only on the requested model: the builtin "mock"
model returns bare hash scores (byte-stable responses), registry-backed
models additionally return per-pair annotations (truncation against the
model's token cap, mask degradation). Chat behavior depends on the server
mode: mock mode plays fixture scripts and logs calls, real mode proxies to a
configured upstream.

Errors: 400 malformed body, 401 bad token, 404 unknown model, 502 upstream
chat failure, 503 model load failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import httpx
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .fixtures import ChatFixtures, prompt_key
from .registry import ModelLoadFailure, ModelRegistry, UnknownModel

__all__ = ["Settings", "create_app"]


@dataclass
class Settings:
    """Server configuration; transport injection keeps upstream tests offline."""

    mock: bool = True
    registry: ModelRegistry = field(default_factory=ModelRegistry)
    fixtures: ChatFixtures = field(default_factory=ChatFixtures)
    upstream_chat: str | None = None
    auth_token: str | None = None
    upstream_transport: httpx.BaseTransport | None = None
    upstream_timeout: float = 120.0


class PairWire(BaseModel):
    model_config = ConfigDict(extra="forbid")

    src: str
    tgt: str
    src_context: str | None = None
    tgt_context: str | None = None
    mask_context: bool = False
    ref: str | None = None


class ScoreWire(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pairs: list[PairWire] = Field(min_length=1)
    model: str
    batch_hint: int = Field(default=32, ge=0)


class ChatWire(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prompt: str
    temperature: float = Field(default=0.0, ge=0.0)
    max_output_tokens: int = Field(default=16, ge=1)


def _estimate_tokens(text: str) -> int:
    return len(text.split())


def create_app(settings: Settings | None = None) -> FastAPI:
    settings = settings or Settings()
    app = FastAPI(title="qeshim", version="0.1.0")
    app.state.settings = settings
    app.state.chat_log = []

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        # The wire contract promises 400 for malformed bodies, not 422.
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def require_auth(request: Request) -> None:
        if settings.auth_token is None:
            return
        if request.headers.get("Authorization") != f"Bearer {settings.auth_token}":
            raise HTTPException(status_code=401, detail="missing or invalid token")

    @app.post("/v1/score")
    def score(body: ScoreWire, request: Request):
        require_auth(request)
        try:
            scorer = settings.registry.scorer(body.model)
            entry = settings.registry.entry(body.model)
        except UnknownModel:
            raise HTTPException(status_code=404, detail=f"unknown model {body.model!r}")
        except ModelLoadFailure as exc:
            raise HTTPException(status_code=503, detail=str(exc))

        pairs = []
        annotations = []
        for wire in body.pairs:
            pair = wire.model_dump(exclude_none=True)
            if not wire.mask_context:
                pair.pop("mask_context", None)
            note = {}
            if entry is not None:
                if wire.mask_context and not entry.can_mask:
                    # This model cannot condition on unscored context; score
                    # the bare pair and say so.
                    for key in ("src_context", "tgt_context", "mask_context"):
                        pair.pop(key, None)
                    note["mask_degraded"] = True
                note["truncated"] = (
                    _estimate_tokens(wire.src) + _estimate_tokens(wire.tgt)
                    > entry.token_cap
                )
            pairs.append(pair)
            annotations.append(note)

        scores = list(scorer(pairs))
        if len(scores) != len(pairs):
            # Never return a partial list; a miscounting model is a server fault.
            raise HTTPException(
                status_code=500,
                detail=f"model {body.model!r} returned {len(scores)} scores "
                f"for {len(pairs)} pairs",
            )
        payload = {"scores": [float(s) for s in scores]}
        if entry is not None:
            payload["annotations"] = annotations
        return payload

    @app.post("/v1/chat")
    def chat(body: ChatWire, request: Request):
        require_auth(request)
        if not body.prompt.strip():
            raise HTTPException(status_code=400, detail="prompt must be non-empty")
        if settings.mock:
            reply, attempt = settings.fixtures.next_reply(body.prompt)
            app.state.chat_log.append(
                {
                    "prompt_key": prompt_key(body.prompt),
                    "temperature": body.temperature,
                    "max_output_tokens": body.max_output_tokens,
                    "attempt": attempt,
                }
            )
            return {
                "text": reply,
                "meta": {"temperature": body.temperature, "attempt": attempt},
            }
        if not settings.upstream_chat:
            raise HTTPException(status_code=502, detail="no upstream chat configured")
        try:
            with httpx.Client(
                transport=settings.upstream_transport,
                timeout=settings.upstream_timeout,
            ) as client:
                response = client.post(settings.upstream_chat, json=body.model_dump())
                response.raise_for_status()
                return {"text": str(response.json()["text"])}
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise HTTPException(status_code=502, detail=f"upstream chat failure: {exc}")

    @app.get("/v1/chat/log")
    def chat_log(request: Request):
        require_auth(request)
        if not settings.mock:
            raise HTTPException(status_code=404, detail="chat log exists in mock mode only")
        return {"calls": app.state.chat_log}

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "mock": settings.mock, "models": settings.registry.names}

    return app

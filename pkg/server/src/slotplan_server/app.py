"""HTTP surface of the scoring server.

Endpoints (JSON bodies, UTF-8):

  GET  /healthz       -> 200 {"protocol_version": "1"}
  POST /v1/instances  -> register a toy instance; idempotent per identical
                         spec (same body always maps to the same id)
  POST /v1/propose    -> score one slot for a registered instance

Status codes: 400 malformed request, 404 unknown instance id, 422 target slot
not admissible (already filled or out of range). Responses serialize
probabilities as plain JSON numbers, which round-trip floats exactly.
"""

from __future__ import annotations

import hashlib
import json
import threading
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .toy import ToyError, ToyInstance

PROTOCOL_VERSION = "1"


class InstanceSpec(BaseModel):
    k: int
    l: int = Field(alias="l")
    dag_kind: str
    decoy_count: int = 0
    seed: int

    model_config = {"populate_by_name": True}


class ProposeRequest(BaseModel):
    protocol_version: str
    instance_id: str
    slot_size: int
    slots: list[Optional[list[int]]]
    target_slot: int


def create_app() -> FastAPI:
    app = FastAPI(title="slotplan scoring server")
    registry: dict[str, ToyInstance] = {}
    lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed request"})

    @app.get("/healthz")
    def healthz():
        return {"protocol_version": PROTOCOL_VERSION}

    @app.post("/v1/instances")
    def register(spec: InstanceSpec):
        payload = {
            "k": spec.k,
            "l": spec.l,
            "dag_kind": spec.dag_kind,
            "decoy_count": spec.decoy_count,
            "seed": spec.seed,
        }
        instance_id = hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode()
        ).hexdigest()[:16]
        with lock:
            if instance_id not in registry:
                try:
                    registry[instance_id] = ToyInstance(**payload)
                except ToyError as exc:
                    return JSONResponse(status_code=400, content={"error": str(exc)})
        return {"instance_id": instance_id}

    @app.post("/v1/propose")
    def propose(request: ProposeRequest):
        if request.protocol_version != PROTOCOL_VERSION:
            return JSONResponse(status_code=400, content={"error": "unsupported protocol version"})
        instance = registry.get(request.instance_id)
        if instance is None:
            return JSONResponse(status_code=404, content={"error": "unknown instance_id"})
        if len(request.slots) != instance.k or request.slot_size != instance.l:
            return JSONResponse(status_code=400, content={"error": "request shape mismatch"})
        if any(s is not None and len(s) != instance.l for s in request.slots):
            return JSONResponse(status_code=400, content={"error": "bad slot length"})
        target = request.target_slot
        if not 0 <= target < instance.k or request.slots[target] is not None:
            return JSONResponse(status_code=422, content={"error": "target slot not admissible"})
        tokens, token_probs = instance.score(request.slots, target)
        return {"tokens": tokens, "token_probs": token_probs}

    return app


app = create_app()

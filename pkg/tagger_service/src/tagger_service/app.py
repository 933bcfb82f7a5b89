"""The /v1/tag HTTP service.

Request validation is strict (400 on a malformed request, 413 on an
oversized prompt, 500 on backend failure); the response carries exactly one
of slot_labels / generated_text plus model metadata.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import Sequence

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .backends import Backend, BackendConfig, build_backend

REQUIRED_FIELDS = ("format", "prompt", "n_slots", "label_space")


def validate_request(payload: object) -> str | None:
    """Returns a human-readable problem, or None when the request is valid."""
    if not isinstance(payload, dict):
        return "request body must be a JSON object"
    for field in REQUIRED_FIELDS:
        if field not in payload:
            return f"missing field {field!r}"
    if not isinstance(payload["format"], str):
        return "format must be a string"
    if not isinstance(payload["prompt"], str):
        return "prompt must be a string"
    if not isinstance(payload["n_slots"], int) or payload["n_slots"] < 1:
        return "n_slots must be a positive integer"
    label_space = payload["label_space"]
    if (
        not isinstance(label_space, list)
        or not label_space
        or not all(isinstance(s, str) for s in label_space)
    ):
        return "label_space must be a non-empty list of strings"
    return None


def create_app(backend: Backend, max_prompt_chars: int = 16384) -> FastAPI:
    app = FastAPI(title="qae reference tagger")

    @app.post("/v1/tag")
    async def tag(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"detail": "body is not JSON"})
        problem = validate_request(payload)
        if problem is not None:
            return JSONResponse(status_code=400, content={"detail": problem})
        if len(payload["prompt"]) > max_prompt_chars:
            return JSONResponse(
                status_code=413,
                content={"detail": f"prompt exceeds {max_prompt_chars} characters"},
            )
        started = time.perf_counter()
        try:
            output = backend.run(
                payload["format"], payload["prompt"], payload["n_slots"], payload["label_space"]
            )
        except Exception as exc:
            return JSONResponse(status_code=500, content={"detail": f"backend failure: {exc}"})
        latency_ms = (time.perf_counter() - started) * 1000.0
        body: dict = {"model_id": backend.model_id, "latency_ms": latency_ms}
        if isinstance(output, list):
            body["slot_labels"] = output
        else:
            body["generated_text"] = output
        return body

    @app.get("/healthz")
    def health():
        return {"status": "ok", "model_id": backend.model_id}

    return app


def main(argv: Sequence[str] | None = None) -> int:
    import uvicorn

    parser = argparse.ArgumentParser(prog="qae-tagger", description="reference /v1/tag server")
    parser.add_argument("--backend", default="stub", choices=["stub", "rule", "hf"])
    parser.add_argument("--model", default="stub", help="model identifier for the hf backend")
    parser.add_argument(
        "--style", default="slot_labels", choices=["slot_labels", "generated_text"]
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-prompt-chars", type=int, default=16384)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8500)
    args = parser.parse_args(argv)

    config = BackendConfig(
        model_id=args.model,
        output_style=args.style,
        device=args.device,
        max_prompt_chars=args.max_prompt_chars,
    )
    backend = build_backend(args.backend, config)
    app = create_app(backend, max_prompt_chars=args.max_prompt_chars)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())

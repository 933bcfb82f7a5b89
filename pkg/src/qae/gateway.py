"""Connections between the pipeline and external taggers.

Two transports: a JSON-over-HTTP protocol (POST /v1/tag) for live model
servers, and a file mode that replays predictions dumped as line-delimited
JSON. The gateway moves surfaces around but never interprets them — turning
surfaces into labels (and nonsense into O + warnings) is the codec's job.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import httpx

from .codec import PromptFormat, SerializedPrompt
from .core import QaeError, Warning
from .pipeline import QUESTION_LABEL_SPACE, SEQUENCE_LABEL_SPACE, TaggerOutput


class GatewayError(QaeError):
    """Base class for transport-level failures."""


class TagTimeout(GatewayError):
    """The model server did not answer within the policy timeout."""


class ConnectionFailed(GatewayError):
    """The model server could not be reached."""


class MalformedResponse(GatewayError):
    """The server answered but violated the response contract."""


class HttpStatusError(GatewayError):
    """The server answered with a non-success HTTP status."""

    def __init__(self, status_code: int, detail: str = ""):
        self.status_code = status_code
        super().__init__(f"HTTP {status_code}{': ' + detail if detail else ''}")


class PredictionsParseError(GatewayError):
    """A predictions file line is not a valid prediction record."""

    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {detail}")


@dataclass(frozen=True)
class TagRequest:
    """One tagging request as it travels over the wire."""

    format: str
    prompt: str
    n_slots: int
    label_space: tuple[str, ...]
    session_id: str | None = None

    def __post_init__(self) -> None:
        if self.n_slots < 1:
            raise ValueError(f"n_slots must be >= 1, got {self.n_slots}")
        if not self.label_space:
            raise ValueError("label_space must be non-empty")

    def to_json(self) -> dict:
        return {
            "format": self.format,
            "prompt": self.prompt,
            "n_slots": self.n_slots,
            "label_space": list(self.label_space),
            "session_id": self.session_id,
        }


@dataclass(frozen=True)
class TagResponse:
    """One tagging response: exactly one payload kind plus server metadata."""

    slot_labels: tuple[str, ...] | None = None
    generated_text: str | None = None
    model_id: str = ""
    latency_ms: float = 0.0

    def __post_init__(self) -> None:
        if (self.slot_labels is None) == (self.generated_text is None):
            raise ValueError("exactly one of slot_labels / generated_text must be set")

    def to_output(self) -> TaggerOutput:
        return TaggerOutput(slot_labels=self.slot_labels, generated_text=self.generated_text)


def decode_tag_response(payload: object, n_slots: int) -> TagResponse:
    """Validate a decoded response body against the wire contract.

    Exactly one of ``slot_labels`` (a list of exactly n_slots strings) and
    ``generated_text`` (a string) must be present. Surfaces are passed
    through uninterpreted. Raises :class:`MalformedResponse` otherwise.
    """
    if not isinstance(payload, dict):
        raise MalformedResponse(f"response body must be a JSON object, got {type(payload).__name__}")
    slot_labels = payload.get("slot_labels")
    generated_text = payload.get("generated_text")
    if (slot_labels is None) == (generated_text is None):
        raise MalformedResponse("response must carry exactly one of slot_labels / generated_text")
    if slot_labels is not None:
        if not isinstance(slot_labels, list) or not all(isinstance(s, str) for s in slot_labels):
            raise MalformedResponse("slot_labels must be a list of strings")
        if len(slot_labels) != n_slots:
            raise MalformedResponse(
                f"slot_labels has {len(slot_labels)} entries for {n_slots} slots"
            )
    if generated_text is not None and not isinstance(generated_text, str):
        raise MalformedResponse("generated_text must be a string")
    model_id = payload.get("model_id", "")
    latency_ms = payload.get("latency_ms", 0.0)
    if not isinstance(model_id, str) or not isinstance(latency_ms, (int, float)):
        raise MalformedResponse("model_id must be a string and latency_ms a number")
    return TagResponse(
        slot_labels=tuple(slot_labels) if slot_labels is not None else None,
        generated_text=generated_text,
        model_id=model_id,
        latency_ms=float(latency_ms),
    )


@dataclass(frozen=True)
class RetryPolicy:
    """Timeout and retry behaviour for one endpoint.

    Timeouts, connection failures and 5xx responses are retried up to
    ``max_attempts`` total attempts with exponential backoff; 4xx responses
    indicate a contract bug and fail fast.
    """

    timeout_s: float = 30.0
    max_attempts: int = 3
    backoff_base_s: float = 0.5
    backoff_cap_s: float = 8.0
    bearer_token: str | None = None

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


def tag_via_http(
    endpoint: str,
    request: TagRequest,
    policy: RetryPolicy = RetryPolicy(),
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> TagResponse:
    """POST a tag request to ``<endpoint>/v1/tag`` and decode the response."""
    url = endpoint.rstrip("/") + "/v1/tag"
    headers = {}
    if policy.bearer_token:
        headers["Authorization"] = f"Bearer {policy.bearer_token}"
    own_client = client is None
    http = client or httpx.Client()
    try:
        last_error: GatewayError | None = None
        for attempt in range(1, policy.max_attempts + 1):
            try:
                response = http.post(
                    url, json=request.to_json(), timeout=policy.timeout_s, headers=headers
                )
            except httpx.TimeoutException as exc:
                last_error = TagTimeout(f"{url}: {exc}")
            except httpx.TransportError as exc:
                last_error = ConnectionFailed(f"{url}: {exc}")
            else:
                if response.status_code == 200:
                    try:
                        payload = response.json()
                    except ValueError as exc:
                        raise MalformedResponse(f"response body is not JSON: {exc}") from exc
                    return decode_tag_response(payload, request.n_slots)
                if 500 <= response.status_code < 600:
                    last_error = HttpStatusError(response.status_code, response.text[:200])
                else:
                    raise HttpStatusError(response.status_code, response.text[:200])
            if attempt < policy.max_attempts:
                sleep(min(policy.backoff_cap_s, policy.backoff_base_s * 2 ** (attempt - 1)))
        assert last_error is not None
        raise last_error
    finally:
        if own_client:
            http.close()


def tag_via_file(predictions_path: str | Path) -> tuple[dict[str, TaggerOutput], list[Warning]]:
    """Load dumped predictions: one JSON object per line, each carrying
    ``session_id`` and exactly one of ``labels`` (list of surfaces) or
    ``output_text`` (generated text). Duplicate ids keep the last record and
    add a warning."""
    path = Path(predictions_path)
    if not path.exists():
        raise FileNotFoundError(f"predictions file not found: {path}")
    predictions: dict[str, TaggerOutput] = {}
    warnings: list[Warning] = []
    with path.open(encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PredictionsParseError(line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(record, dict) or "session_id" not in record:
                raise PredictionsParseError(line_no, "record must be an object with a session_id")
            session_id = record["session_id"]
            if not isinstance(session_id, str):
                raise PredictionsParseError(line_no, "session_id must be a string")
            labels = record.get("labels")
            output_text = record.get("output_text")
            if (labels is None) == (output_text is None):
                raise PredictionsParseError(
                    line_no, "record must carry exactly one of labels / output_text"
                )
            if labels is not None:
                if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
                    raise PredictionsParseError(line_no, "labels must be a list of strings")
                output = TaggerOutput(slot_labels=tuple(labels))
            else:
                if not isinstance(output_text, str):
                    raise PredictionsParseError(line_no, "output_text must be a string")
                output = TaggerOutput(generated_text=output_text)
            if session_id in predictions:
                warnings.append(
                    Warning.malformed_model_output(
                        f"duplicate prediction for session {session_id!r} "
                        f"at line {line_no}; keeping the last"
                    )
                )
            predictions[session_id] = output
    return predictions, warnings


def _label_space_for(prompt: SerializedPrompt) -> tuple[str, ...]:
    if prompt.format is PromptFormat.CLS_SINGLE:
        return tuple(QUESTION_LABEL_SPACE)
    return tuple(SEQUENCE_LABEL_SPACE)


class HttpTagger:
    """Tagger backed by a live model server speaking the /v1/tag protocol.

    Reentrant: in-flight requests are capped by a semaphore (default 8) and
    share one connection pool.
    """

    reentrant = True
    formats = frozenset(
        {PromptFormat.MASK_SEP, PromptFormat.SENTINEL_SEMICOLON, PromptFormat.CLS_SINGLE}
    )

    def __init__(
        self,
        endpoint: str,
        policy: RetryPolicy = RetryPolicy(),
        output_style: str = "generated_text",
        max_in_flight: int = 8,
    ):
        self.endpoint = endpoint
        self.policy = policy
        self.output_style = output_style
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client()

    def tag(self, prompt: SerializedPrompt, session_id: str) -> TaggerOutput:
        request = TagRequest(
            format=prompt.format.value,
            prompt=prompt.text,
            n_slots=prompt.n_slots,
            label_space=_label_space_for(prompt),
            session_id=session_id,
        )
        with self._semaphore:
            response = tag_via_http(self.endpoint, request, self.policy, client=self._client)
        return response.to_output()

    def close(self) -> None:
        self._client.close()


class FileTagger:
    """Tagger that replays per-session predictions loaded from a file.

    Lookups are keyed by session id; a missing session is a tagger failure.
    Records are replayed as-is, so a file of end-to-end dumps is meant for
    END_TO_END extraction.
    """

    reentrant = True
    formats = frozenset({PromptFormat.MASK_SEP, PromptFormat.SENTINEL_SEMICOLON})

    def __init__(self, predictions: Mapping[str, TaggerOutput], warnings: Sequence[Warning] = ()):
        self.predictions = dict(predictions)
        self.load_warnings = list(warnings)
        generated = sum(1 for p in self.predictions.values() if p.generated_text is not None)
        self.output_style = (
            "generated_text" if generated * 2 >= len(self.predictions) else "slot_labels"
        )

    @classmethod
    def from_path(cls, path: str | Path) -> "FileTagger":
        predictions, warnings = tag_via_file(path)
        return cls(predictions, warnings)

    def tag(self, prompt: SerializedPrompt, session_id: str) -> TaggerOutput:
        try:
            return self.predictions[session_id]
        except KeyError:
            raise GatewayError(f"no prediction for session {session_id!r}") from None

"""Line-delimited JSON wire protocol for explaining external predictors.

Protocol over the child's stdin/stdout, one JSON document per line:

    child -> {"ready": true, "n_features": <int>}        (handshake)
    us    -> {"id": <int>, "rows": [[<real>, ...], ...]}
    child -> {"id": <same int>, "predictions": [<real>, ...]}

The handle owns one in-flight request at a time; callers wanting concurrency
should hold one handle per worker.
"""

from __future__ import annotations

import json
import math
import os
import select
import subprocess
import time

import numpy as np


class ExternalModelError(RuntimeError):
    """Base class for external-predictor failures."""


class ExternalProcessExit(ExternalModelError):
    """The child process exited or closed its pipe."""


class ExternalProtocolError(ExternalModelError):
    """The child sent a malformed or contract-violating response."""


class ExternalTimeout(ExternalModelError):
    """No complete response line arrived within the deadline."""


class ExternalModel:
    kind = "external"
    prediction_mode = "regression"

    def __init__(self, command: list[str], timeout: float = 30.0):
        self.command = list(command)
        self.timeout = timeout
        self._next_id = 0
        self._buffer = b""
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            bufsize=0,
        )
        hello = self._read_line()
        if hello.get("ready") is not True or "n_features" not in hello:
            raise ExternalProtocolError(f"bad handshake: {hello!r}")
        self.n_features = int(hello["n_features"])

    def predict(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.shape[0] == 0:
            return np.empty(0)
        request_id = self._next_id
        self._next_id += 1
        payload = json.dumps({"id": request_id, "rows": rows.tolist()}) + "\n"
        try:
            self._proc.stdin.write(payload.encode("utf-8"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ExternalProcessExit(f"predictor pipe closed: {exc}") from exc
        reply = self._read_line()
        if reply.get("id") != request_id:
            raise ExternalProtocolError(
                f"response id {reply.get('id')!r} does not match request {request_id}"
            )
        preds = reply.get("predictions")
        if not isinstance(preds, list) or len(preds) != rows.shape[0]:
            got = len(preds) if isinstance(preds, list) else preds
            raise ExternalProtocolError(
                f"expected {rows.shape[0]} predictions, received {got!r}"
            )
        out = np.array(preds, dtype=np.float64)
        if not np.isfinite(out).all():
            raise ExternalProtocolError("predictor emitted non-finite values")
        return out

    def _read_line(self) -> dict:
        deadline = time.monotonic() + self.timeout
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ExternalTimeout(f"no response within {self.timeout} s")
            readable, _, _ = select.select([fd], [], [], remaining)
            if not readable:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                code = self._proc.poll()
                raise ExternalProcessExit(f"predictor exited (code {code}) mid-response")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        try:
            doc = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ExternalProtocolError(f"unparseable response line: {line[:200]!r}") from exc
        if not isinstance(doc, dict):
            raise ExternalProtocolError(f"expected a JSON object, got {doc!r}")
        return doc

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalModel":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def external_predict(handle: ExternalModel, rows) -> np.ndarray:
    """One request/response round trip; order-preserving."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or (rows.size and rows.shape[1] != handle.n_features):
        raise ValueError(f"expected rows of width {handle.n_features}, got {rows.shape}")
    out = handle.predict(rows)
    for x in out:
        if not math.isfinite(x):
            raise ExternalProtocolError("predictor emitted non-finite values")
    return out

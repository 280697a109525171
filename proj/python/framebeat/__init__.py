"""Photos in, looping music out."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterable, Sequence

from . import _core
from ._core import (
    SAMPLE_RATE,
    crossfade_window,
    decode_wav,
    encode_display,
    encode_wav,
    envelope_gains,
    fit_bars,
    parse_device_line,
    quantize_to_bar,
    select_envelope,
    splice,
)

__all__ = [
    "SAMPLE_RATE",
    "Error",
    "Service",
    "build_prompt",
    "compose",
    "crossfade_window",
    "data_dir",
    "decode_wav",
    "encode_display",
    "encode_wav",
    "envelope_gains",
    "fit_bars",
    "parse_device_line",
    "quantize_to_bar",
    "render",
    "select_envelope",
    "splice",
]

Error = _core.Error


def data_dir() -> str:
    bundled = Path(__file__).with_name("data")
    if bundled.is_dir():
        return str(bundled)
    return os.environ.get("FRAMEBEAT_DATA_DIR", _core.DATA_DIR)


def _config(config: dict | None) -> str | None:
    return None if config is None else json.dumps(config)


def _instruments(instruments: str | Iterable[str]) -> str:
    return instruments if isinstance(instruments, str) else ",".join(instruments)


def compose(
    images: Sequence[str | os.PathLike],
    instruments: str | Iterable[str] = "keys",
    *,
    zero_latency: bool = False,
    auto_mix: bool = False,
    master: bool = False,
    config: dict | None = None,
) -> dict:
    """Runs a simulated session over the images and returns the export.

    Keys: wav (bytes), log (str), report, state (dicts), fingerprint, underruns.
    """
    r = _core.compose(
        [os.fspath(p) for p in images],
        _instruments(instruments),
        zero_latency,
        auto_mix,
        master,
        _config(config),
        data_dir(),
    )
    r["report"] = json.loads(r["report"])
    r["state"] = json.loads(r["state"])
    return r


def render(log: str) -> bytes:
    """Re-renders a session from its event log text; returns WAV bytes."""
    return _core.render(log)


def build_prompt(
    caption: dict,
    instruments: str | Iterable[str],
    k: int,
    genre: str | None = None,
    bpm: float | None = None,
) -> str:
    return _core.build_prompt(json.dumps(caption), _instruments(instruments), k, genre, bpm)


class Service:
    """The HTTP service in-process; start() binds it to a port."""

    def __init__(self, config: dict | None = None, *, zero_latency: bool = False):
        self._svc = _core.Service(_config(config), data_dir(), zero_latency)

    def start(self, host: str = "127.0.0.1", port: int = 0) -> int:
        return self._svc.start(host, port)

    def stop(self) -> None:
        self._svc.stop()

    def request(self, method: str, path: str, query: dict | None = None, body: dict | str | None = None):
        payload = body if isinstance(body, str) or body is None else json.dumps(body)
        status, content_type, data = self._svc.handle(method, path, query or {}, payload or "")
        if content_type == "application/json":
            return status, json.loads(data)
        return status, data

    def device_line(self, line: str) -> str:
        return self._svc.device_line(line)

    def __enter__(self) -> "Service":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

"""Event files, flat config files and JSON run artifacts."""

from __future__ import annotations

import csv
import datetime as _dt
import io as _io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, ValidationError
from .model import EventStream

ARTIFACT_KINDS = ("SimOutput", "FitOutput", "ScoreTestOutput", "McReportOutput")


def fmt(x: float) -> str:
    """17 significant digits: exact round trip for doubles."""
    return format(float(x), ".17g")


def _infer_format(path, format):
    if format:
        return format.lower()
    return "json" if str(path).lower().endswith(".json") else "csv"


def read_events(path, format: str | None = None, horizon: float | None = None) -> EventStream:
    """Load an event file.

    CSV: optional ``# horizon=T`` comment, header ``time,mark_1,...,mark_d``,
    one row per event. JSON: ``{"horizon": T, "times": [...], "marks": [[...], ...]}``.
    An explicit ``horizon`` overrides the file.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"event file not found: {path}")
    format = _infer_format(path, format)
    if format == "json":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        times = np.asarray(doc.get("times", []), dtype=np.float64)
        marks = doc.get("marks")
        file_horizon = doc.get("horizon")
        marks = np.asarray(marks, dtype=np.float64) if marks is not None else None
        if marks is not None and marks.ndim == 1:
            marks = marks.reshape(-1, 1)
        header_dim = None if marks is None or marks.size else (marks.shape[1] if marks.ndim == 2 else 1)
    elif format == "csv":
        times, marks, file_horizon, header_dim = _read_csv(path)
    else:
        raise ConfigurationError(f"unknown event format {format!r}")
    T = horizon if horizon is not None else file_horizon
    if T is None:
        raise ConfigurationError(f"{path}: no horizon (add '# horizon=T' or pass --horizon)")
    bad = np.flatnonzero(np.diff(times) <= 0)
    if bad.size:
        row = int(bad[0]) + 1
        raise ValidationError(f"{path}: event times must be strictly increasing; row {row} "
                              f"(time {times[row]!r}) does not exceed the previous time")
    if marks is not None and marks.size == 0:
        marks = np.zeros((0, header_dim or 1))
    return EventStream(float(T), times, marks)


def _read_csv(path):
    horizon = None
    rows = []
    header = None
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                body = text[1:].strip()
                key, sep, value = body.partition("=")
                if sep and key.strip().lower() == "horizon":
                    try:
                        horizon = float(value)
                    except ValueError:
                        raise ValidationError(f"{path}:{lineno}: bad horizon {value!r}") from None
                continue
            cells = next(csv.reader([text]))
            if header is None:
                header = [c.strip() for c in cells]
                if not header or header[0].lower() != "time":
                    raise ValidationError(f"{path}: header must start with 'time'")
                continue
            if len(cells) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} columns, got {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric value") from None
    if header is None:
        header = ["time", "mark_1"]
    d = max(1, len(header) - 1)
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, len(header))
    times = arr[:, 0].copy()
    marks = arr[:, 1:].copy() if len(header) > 1 else np.zeros((arr.shape[0], 1))
    return times, marks, horizon, d


def events_to_csv(stream: EventStream) -> str:
    buf = _io.StringIO()
    buf.write(f"# horizon={fmt(stream.horizon)}\n")
    buf.write(",".join(["time"] + [f"mark_{k + 1}" for k in range(stream.mark_dim)]) + "\n")
    for t, m in zip(stream.times, stream.marks):
        buf.write(",".join([fmt(t)] + [fmt(v) for v in m]) + "\n")
    return buf.getvalue()


def write_events(stream: EventStream, path, format: str | None = None) -> None:
    format = _infer_format(path, format)
    if format == "json":
        doc = {"horizon": stream.horizon, "times": stream.times.tolist(), "marks": stream.marks.tolist()}
        Path(path).write_text(dumps(doc))
    else:
        Path(path).write_text(events_to_csv(stream))


def read_config(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment. Keys are normalised
    to use underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    """Deterministic JSON; floats use the shortest exact repr."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


@dataclass
class RunArtifact:
    kind: str
    payload: dict
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ARTIFACT_KINDS:
            raise ValidationError(f"unknown artifact kind {self.kind!r}")

    def to_json(self) -> str:
        return dumps({"kind": self.kind, "payload": self.payload, "provenance": self.provenance})

    @classmethod
    def from_json(cls, text: str) -> "RunArtifact":
        doc = json.loads(text)
        return cls(doc["kind"], doc["payload"], doc.get("provenance", {}))

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def read(cls, path) -> "RunArtifact":
        return cls.from_json(Path(path).read_text())


def provenance(command: str, config: dict, seed=None) -> dict:
    return {"tool": "hawkes-score", "version": __version__, "command": command,
            "config": _clean(config), "seed": seed}


def write_run_log(path, command: str) -> None:
    """Timestamp sidecar, kept apart so artifacts stay byte-reproducible."""
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    Path(str(path) + ".run.json").write_text(dumps({
        "command": command, "version": __version__, "timestamp": stamp, "pid": os.getpid(),
    }))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if isinstance(v, (float, np.floating)) else ("" if v is None else str(v))
                              for v in row) + "\n")

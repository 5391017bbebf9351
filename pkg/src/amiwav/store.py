"""Model files and compression accounting.

Binary layout (version 1, little-endian) is documented in FORMAT.md. A JSON
rendering holds the same content; Python's float ``repr`` makes it lossless.
"""

from __future__ import annotations

import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from .classification import ClassifiedLoadModel
from .errors import CorruptFileError, InvalidArgumentError, StructureError, UnsupportedVersionError
from .load_model import WaveletLoadModel

MAGIC = b"AMIW"
FORMAT_VERSION = 1
WAVELET, CLASSIFIED = 1, 2
MODEL_TYPES = {WAVELET: "wavelet", CLASSIFIED: "classified"}

_HEAD = struct.Struct("<4sHBHIII")  # magic, version, type, level|k, customers, length, interval


@dataclass(frozen=True, eq=False)
class WaveletFleetModel:
    """Wavelet load models for a fleet sharing one timeline and level."""

    level: int
    original_length: int
    start_time: datetime | None
    interval_hours: int
    models: tuple[WaveletLoadModel, ...]

    def __post_init__(self):
        for m in self.models:
            if (m.level, m.original_length, m.interval_hours, m.start_time) != (
                self.level,
                self.original_length,
                self.interval_hours,
                self.start_time,
            ):
                raise StructureError(f"model for {m.customer_id!r} does not share the fleet timeline/level")

    @classmethod
    def from_models(cls, models: Sequence[WaveletLoadModel]) -> "WaveletFleetModel":
        if not models:
            raise InvalidArgumentError("use the constructor directly for an empty fleet")
        m0 = models[0]
        return cls(m0.level, m0.original_length, m0.start_time, m0.interval_hours, tuple(models))

    @property
    def stored_values(self) -> int:
        return sum(m.stored_values for m in self.models)

    @property
    def customer_ids(self) -> tuple[str, ...]:
        return tuple(m.customer_id for m in self.models)


@dataclass(frozen=True)
class CompressionStats:
    model_value_count: int
    original_value_count: int

    def __post_init__(self):
        if self.model_value_count < 0 or self.original_value_count <= 0:
            raise InvalidArgumentError("value counts must be positive")

    @property
    def percent_compression(self) -> float:
        return (self.model_value_count / self.original_value_count - 1.0) * 100.0

    def formatted(self) -> str:
        return f"{self.percent_compression:.2f}%"


def stored_value_count(model) -> int:
    if isinstance(model, (WaveletFleetModel, ClassifiedLoadModel, WaveletLoadModel)):
        return model.stored_values
    raise InvalidArgumentError(f"not a load model: {type(model).__name__}")


def compression_stats(model, original_value_count: int) -> CompressionStats:
    """Compression of ``model`` (or a raw value count) against the raw data."""
    count = int(model) if isinstance(model, (int, np.integer)) else stored_value_count(model)
    return CompressionStats(count, int(original_value_count))


# --- binary codec -------------------------------------------------------------


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    if len(b) > 0xFFFF:
        raise InvalidArgumentError("string too long for the model format")
    return struct.pack("<H", len(b)) + b


def _time_str(t: datetime | None) -> str:
    return "" if t is None else t.isoformat()


def _parse_time(s: str) -> datetime | None:
    return datetime.fromisoformat(s) if s else None


def encode(model) -> bytes:
    out = io.BytesIO()
    if isinstance(model, WaveletFleetModel):
        out.write(
            _HEAD.pack(MAGIC, FORMAT_VERSION, WAVELET, model.level, len(model.models), model.original_length, model.interval_hours)
        )
        out.write(_pack_str(_time_str(model.start_time)))
        for m in model.models:
            out.write(_pack_str(m.customer_id))
            coeffs = np.ascontiguousarray(m.approximation, dtype="<f8")
            out.write(struct.pack("<I", coeffs.size))
            out.write(coeffs.tobytes())
    elif isinstance(model, ClassifiedLoadModel):
        n = len(model.customer_ids)
        out.write(_HEAD.pack(MAGIC, FORMAT_VERSION, CLASSIFIED, model.k, n, model.profile_length, model.interval_hours))
        out.write(_pack_str(_time_str(model.start_time)))
        for tlp in model.tlps:
            row = np.ascontiguousarray(tlp, dtype="<f8")
            out.write(struct.pack("<I", row.size))
            out.write(row.tobytes())
        for cid, lab, peak, scale in zip(model.customer_ids, model.labels, model.peaks, model.scales):
            out.write(_pack_str(cid))
            out.write(struct.pack("<Hdd", int(lab), float(peak), float(scale)))
    else:
        raise InvalidArgumentError(f"cannot encode {type(model).__name__}")
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.data):
            raise CorruptFileError(f"truncated body: needed {n} bytes at offset {self.pos}, file has {len(self.data)}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def string(self) -> str:
        (n,) = self.unpack("<H")
        try:
            return bytes(self.take(n)).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptFileError(f"bad UTF-8 string at offset {self.pos - n}") from exc

    def reals(self) -> np.ndarray:
        (n,) = self.unpack("<I")
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)


def read_header(data: bytes) -> tuple[dict, "_Reader"]:
    if len(data) < _HEAD.size:
        raise CorruptFileError("file is shorter than the model header")
    magic, version, mtype, param, count, length, interval = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise CorruptFileError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"format version {version} is not supported (this build reads {FORMAT_VERSION})")
    if mtype not in MODEL_TYPES:
        raise CorruptFileError(f"unknown model type {mtype}")
    r = _Reader(data)
    r.take(_HEAD.size)
    start = r.string()
    header = {
        "format_version": version,
        "model_type": MODEL_TYPES[mtype],
        "customer_count": count,
        "original_length": length,
        "interval_hours": interval,
        "start_time": start or None,
    }
    header["level" if mtype == WAVELET else "k"] = param
    return header, r


def decode(data: bytes):
    header, r = read_header(data)
    start = _parse_time(header["start_time"] or "")
    length, interval, count = header["original_length"], header["interval_hours"], header["customer_count"]
    try:
        if header["model_type"] == "wavelet":
            level = header["level"]
            models = []
            for _ in range(count):
                cid = r.string()
                coeffs = r.reals()
                models.append(WaveletLoadModel(cid, level, coeffs, length, start, interval))
            model = WaveletFleetModel(level, length, start, interval, tuple(models))
        else:
            k = header["k"]
            tlps = np.zeros((k, length))
            for j in range(k):
                row = r.reals()
                if row.size != length:
                    raise CorruptFileError(f"TLP {j} holds {row.size} values, header declares {length}")
                tlps[j] = row
            ids, labels, peaks, scales = [], [], [], []
            for _ in range(count):
                ids.append(r.string())
                lab, peak, scale = r.unpack("<Hdd")
                labels.append(lab)
                peaks.append(peak)
                scales.append(scale)
            model = ClassifiedLoadModel(
                tlps=tlps,
                customer_ids=tuple(ids),
                labels=np.array(labels, dtype=np.int64),
                peaks=np.array(peaks, dtype=np.float64),
                scales=np.array(scales, dtype=np.float64),
                start_time=start,
                interval_hours=interval,
            )
    except StructureError as exc:
        raise CorruptFileError(f"body disagrees with header: {exc}") from exc
    if r.pos != len(r.data):
        raise CorruptFileError(f"{len(r.data) - r.pos} trailing bytes after the declared body")
    return model


# --- JSON codec ---------------------------------------------------------------


def to_json_dict(model) -> dict:
    if isinstance(model, WaveletFleetModel):
        return {
            "magic": MAGIC.decode(),
            "format_version": FORMAT_VERSION,
            "model_type": "wavelet",
            "level": model.level,
            "original_length": model.original_length,
            "interval_hours": model.interval_hours,
            "start_time": _time_str(model.start_time) or None,
            "customers": [{"id": m.customer_id, "approximation": m.approximation.tolist()} for m in model.models],
        }
    if isinstance(model, ClassifiedLoadModel):
        return {
            "magic": MAGIC.decode(),
            "format_version": FORMAT_VERSION,
            "model_type": "classified",
            "k": model.k,
            "original_length": model.profile_length,
            "interval_hours": model.interval_hours,
            "start_time": _time_str(model.start_time) or None,
            "tlps": model.tlps.tolist(),
            "customers": [
                {"id": c, "class": int(l), "peak": float(p), "scale": float(s)}
                for c, l, p, s in zip(model.customer_ids, model.labels, model.peaks, model.scales)
            ],
        }
    raise InvalidArgumentError(f"cannot encode {type(model).__name__}")


def from_json_dict(d: dict):
    try:
        if d.get("magic") != MAGIC.decode():
            raise CorruptFileError("JSON model lacks the AMIW magic")
        if d.get("format_version") != FORMAT_VERSION:
            raise UnsupportedVersionError(f"format version {d.get('format_version')!r} is not supported")
        start = _parse_time(d.get("start_time") or "")
        length, interval = int(d["original_length"]), int(d["interval_hours"])
        if d["model_type"] == "wavelet":
            level = int(d["level"])
            models = tuple(
                WaveletLoadModel(c["id"], level, np.array(c["approximation"], dtype=np.float64), length, start, interval)
                for c in d["customers"]
            )
            return WaveletFleetModel(level, length, start, interval, models)
        if d["model_type"] == "classified":
            tlps = np.array(d["tlps"], dtype=np.float64).reshape(int(d["k"]), length)
            cs = d["customers"]
            return ClassifiedLoadModel(
                tlps=tlps,
                customer_ids=tuple(c["id"] for c in cs),
                labels=np.array([c["class"] for c in cs], dtype=np.int64),
                peaks=np.array([c["peak"] for c in cs], dtype=np.float64),
                scales=np.array([c["scale"] for c in cs], dtype=np.float64),
                start_time=start,
                interval_hours=interval,
            )
        raise CorruptFileError(f"unknown model type {d['model_type']!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFileError(f"malformed JSON model: {exc}") from exc


# --- files --------------------------------------------------------------------


def atomic_write(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model, path: str | Path, fmt: str = "binary") -> None:
    if fmt == "binary":
        data = encode(model)
    elif fmt == "json":
        data = (json.dumps(to_json_dict(model), indent=1) + "\n").encode("utf-8")
    else:
        raise InvalidArgumentError(f"unknown format {fmt!r}; use binary or json")
    atomic_write(path, data)


def load_model(path: str | Path):
    data = Path(path).read_bytes()
    if data[:1] == b"{":
        try:
            d = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptFileError(f"unreadable JSON model: {exc}") from exc
        return from_json_dict(d)
    return decode(data)


def model_info(path: str | Path) -> dict:
    """Header fields plus the stored value count, without keeping the body."""
    model = load_model(path)
    data = Path(path).read_bytes()
    if data[:1] == b"{":
        d = to_json_dict(model)
        info = {k: d[k] for k in ("format_version", "model_type", "original_length", "interval_hours", "start_time")}
        info["level" if d["model_type"] == "wavelet" else "k"] = d.get("level", d.get("k"))
        info["customer_count"] = len(d["customers"])
        info["encoding"] = "json"
    else:
        info, _ = read_header(data)
        info["encoding"] = "binary"
    info["stored_values"] = model.stored_values
    return info

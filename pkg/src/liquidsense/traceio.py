"""Trace file formats.

Binary (little-endian)::

    "CSIT" | version u16 | n_rx u16 | n_tx u16 | n_subcarriers u16
    | packet_rate f64 | carrier_wavelength f64 | frame_count u64
    | metadata_len u32 | metadata (UTF-8 JSON)
    | frame_count x [timestamp f64, n_rx*n_subcarriers x (re f32, im f32)]

CSI pairs are row-major by antenna. The JSON-lines form carries the same header
fields on line 1 and one ``{"t": ..., "csi": [[[re, im], ...], ...]}`` object per
following line.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .csi import CsiTrace
from .errors import (
    BadMagicError,
    DimensionMismatchError,
    NonMonotoneTimestampsError,
    TraceFormatError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)

MAGIC = b"CSIT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHHHddQI")
JSONL_FORMAT = "csit-jsonl"


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"{type(o).__name__} is not JSON serializable")


def dump_metadata(metadata: dict) -> str:
    return json.dumps(metadata, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _frame_dtype(n_rx: int, n_sub: int) -> np.dtype:
    return np.dtype([("t", "<f8"), ("csi", "<f4", (n_rx * n_sub * 2,))])


def encode_binary(trace: CsiTrace) -> bytes:
    meta = dump_metadata(trace.metadata).encode("utf-8")
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        trace.n_rx,
        trace.n_tx,
        trace.n_subcarriers,
        float(trace.packet_rate),
        float(trace.carrier_wavelength),
        trace.n_frames,
        len(meta),
    )
    rec = np.zeros(trace.n_frames, dtype=_frame_dtype(trace.n_rx, trace.n_subcarriers))
    rec["t"] = trace.timestamps
    pairs = np.empty((trace.n_frames, trace.n_rx, trace.n_subcarriers, 2), dtype="<f4")
    pairs[..., 0] = trace.csi.real
    pairs[..., 1] = trace.csi.imag
    rec["csi"] = pairs.reshape(trace.n_frames, trace.n_rx * trace.n_subcarriers * 2)
    return header + meta + rec.tobytes()


def decode_binary(buf: bytes) -> CsiTrace:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
    if len(buf) < _HEADER.size:
        raise TruncatedPayloadError(f"header needs {_HEADER.size} bytes, file has {len(buf)}")
    _, version, n_rx, n_tx, n_sub, rate, wavelength, n_frames, meta_len = _HEADER.unpack_from(buf)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"trace format version {version} not supported (expected {FORMAT_VERSION})")
    off = _HEADER.size
    if len(buf) < off + meta_len:
        raise TruncatedPayloadError("metadata blob truncated")
    try:
        metadata = json.loads(buf[off : off + meta_len].decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise TraceFormatError(f"metadata is not valid UTF-8 JSON: {e}") from e
    off += meta_len

    dt = _frame_dtype(n_rx, n_sub)
    payload = len(buf) - off
    expected = n_frames * dt.itemsize
    if payload != expected:
        # a payload that splits evenly into n_frames records of another antenna
        # or subcarrier count is a header/payload disagreement, not truncation
        if n_frames and payload % n_frames == 0:
            per = payload // n_frames - 8
            if per > 0 and per % 8 == 0 and (per // 8) % max(n_sub, 1) == 0:
                raise DimensionMismatchError(
                    f"header declares {n_rx}x{n_sub} per frame but payload holds {per // 8} values per frame"
                )
        if payload < expected:
            raise TruncatedPayloadError(f"payload has {payload} bytes, header implies {expected}")
        raise DimensionMismatchError(f"{payload - expected} trailing bytes after {n_frames} frames")

    rec = np.frombuffer(buf, dtype=dt, count=n_frames, offset=off)
    ts = rec["t"].astype(np.float64)
    if n_frames > 1 and not np.all(np.diff(ts) > 0):
        raise NonMonotoneTimestampsError("timestamps are not strictly increasing")
    pairs = rec["csi"].reshape(n_frames, n_rx, n_sub, 2)
    csi = np.empty((n_frames, n_rx, n_sub), dtype=np.complex64)
    csi.real = pairs[..., 0]
    csi.imag = pairs[..., 1]
    return CsiTrace(
        packet_rate=rate, timestamps=ts, csi=csi, carrier_wavelength=wavelength, n_tx=n_tx, metadata=metadata
    )


def _header_dict(trace: CsiTrace) -> dict:
    return {
        "format": JSONL_FORMAT,
        "version": FORMAT_VERSION,
        "n_rx": trace.n_rx,
        "n_tx": trace.n_tx,
        "n_subcarriers": trace.n_subcarriers,
        "packet_rate": float(trace.packet_rate),
        "carrier_wavelength": float(trace.carrier_wavelength),
        "frame_count": trace.n_frames,
        "metadata": trace.metadata,
    }


def encode_jsonl(trace: CsiTrace) -> str:
    lines = [json.dumps(_header_dict(trace), sort_keys=True, default=_jsonable)]
    for t, v in zip(trace.timestamps, trace.csi):
        cells = [[[float(z.real), float(z.imag)] for z in row] for row in v]
        lines.append(json.dumps({"t": float(t), "csi": cells}))
    return "\n".join(lines) + "\n"


def decode_jsonl(text: str) -> CsiTrace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TruncatedPayloadError("empty JSON-lines trace")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise BadMagicError(f"first line is not a JSON header: {e}") from e
    if not isinstance(head, dict) or head.get("format") != JSONL_FORMAT:
        raise BadMagicError(f"header format tag is not {JSONL_FORMAT!r}")
    if head.get("version") != FORMAT_VERSION:
        raise UnsupportedVersionError(f"trace format version {head.get('version')} not supported")
    n_rx, n_sub, n_frames = int(head["n_rx"]), int(head["n_subcarriers"]), int(head["frame_count"])
    body = lines[1:]
    if len(body) < n_frames:
        raise TruncatedPayloadError(f"header declares {n_frames} frames, file has {len(body)}")
    if len(body) > n_frames:
        raise DimensionMismatchError(f"header declares {n_frames} frames, file has {len(body)}")
    ts = np.empty(n_frames)
    csi = np.empty((n_frames, n_rx, n_sub), dtype=np.complex128)
    for i, ln in enumerate(body):
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as e:
            raise TruncatedPayloadError(f"frame {i} is not valid JSON: {e}") from e
        arr = np.asarray(rec["csi"], dtype=np.float64)
        if arr.shape != (n_rx, n_sub, 2):
            raise DimensionMismatchError(f"frame {i} has shape {arr.shape[:-1]}, header declares {(n_rx, n_sub)}")
        ts[i] = rec["t"]
        csi[i].real = arr[..., 0]
        csi[i].imag = arr[..., 1]
    if n_frames > 1 and not np.all(np.diff(ts) > 0):
        raise NonMonotoneTimestampsError("timestamps are not strictly increasing")
    return CsiTrace(
        packet_rate=float(head["packet_rate"]),
        timestamps=ts,
        csi=csi,
        carrier_wavelength=float(head["carrier_wavelength"]),
        n_tx=int(head["n_tx"]),
        metadata=head.get("metadata", {}),
    )


def guess_format(path) -> str:
    ext = os.path.splitext(str(path))[1].lower()
    return "jsonl" if ext in (".jsonl", ".json") else "binary"


def write_trace(trace: CsiTrace, path, format: str | None = None) -> None:
    """Write ``trace`` to ``path``; ``format`` is "binary" or "jsonl" (guessed from the suffix if omitted)."""
    format = format or guess_format(path)
    if format == "binary":
        Path(path).write_bytes(encode_binary(trace))
    elif format == "jsonl":
        Path(path).write_text(encode_jsonl(trace), encoding="utf-8")
    else:
        raise ValueError(f"unknown trace format {format!r}")


def read_trace(path) -> CsiTrace:
    """Read a trace in either format, sniffing the first bytes."""
    buf = Path(path).read_bytes()
    if buf[:4] == MAGIC:
        return decode_binary(buf)
    if buf.lstrip()[:1] == b"{":
        return decode_jsonl(buf.decode("utf-8"))
    raise BadMagicError(f"{path}: neither a CSIT binary nor a JSON-lines trace")

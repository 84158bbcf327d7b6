"""Binary (.evs) and CSV event-file serialization.

The .evs layout is little-endian: magic "EVS1", u32 width, u32 height,
u64 t_start, u64 t_end, u64 count, followed by `count` 14-byte records
(u64 t, u16 x, u16 y, i8 p, 1 pad byte).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import IntegrityError
from .events import EventStream

MAGIC = b"EVS1"
_HEADER = struct.Struct("<4sIIQQQ")
_RECORD_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"),
                          ("p", "i1"), ("pad", "u1")])


def write_evs(path, stream: EventStream) -> None:
    rec = np.zeros(len(stream), _RECORD_DTYPE)
    rec["t"] = stream.t
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["p"] = stream.p
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, stream.width, stream.height,
                             stream.t_start, stream.t_end, len(stream)))
        f.write(rec.tobytes())


def read_evs(path) -> EventStream:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise IntegrityError(f"{path}: truncated header")
    magic, width, height, t_start, t_end, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise IntegrityError(f"{path}: bad magic {magic!r}")
    body = data[_HEADER.size:]
    if len(body) != count * _RECORD_DTYPE.itemsize:
        raise IntegrityError(
            f"{path}: expected {count} records, got {len(body)} payload bytes")
    rec = np.frombuffer(body, _RECORD_DTYPE)
    return EventStream(width, height, int(t_start), int(t_end),
                       rec["t"].astype(np.int64), rec["x"].astype(np.int32),
                       rec["y"].astype(np.int32), rec["p"].astype(np.int8))


def read_events_csv(path, width: int, height: int,
                    t_start: int | None = None,
                    t_end: int | None = None) -> EventStream:
    """Read a plain-text "t,x,y,p" file (one event per line, '#' comments).

    The exposure interval defaults to the first/last event timestamps.
    """
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            t, x, y, p = (int(v) for v in line.split(","))
            rows.append((t, x, y, p))
    if not rows:
        if t_start is None or t_end is None:
            raise IntegrityError(f"{path}: empty CSV needs explicit t_start/t_end")
        return EventStream(width, height, t_start, t_end)
    rows.sort(key=lambda r: r[0])
    if t_start is None:
        t_start = rows[0][0]
    if t_end is None:
        t_end = rows[-1][0]
    return EventStream.from_events(width, height, t_start, t_end, rows)

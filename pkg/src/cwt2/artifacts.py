"""Binary field dumps and self-describing CSV artifacts.

Noise dumps: 32-byte header ``<8sQdd`` (magic ``CWT2NOIS``, N, L, dt) followed by
N^3 little-endian float64 values, row-major with z fastest. Snapshots use the
magic ``CWT2SNAP`` and append the time as one more float64 before the data.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

NOISE_MAGIC = b"CWT2NOIS"
SNAP_MAGIC = b"CWT2SNAP"
HEADER = struct.Struct("<8sQdd")
TIME = struct.Struct("<d")


def _payload(values, n):
    values = np.asarray(values, dtype="<f8")
    if values.shape != (n, n, n):
        raise ValueError(f"expected an {n}^3 field, got shape {values.shape}")
    return np.ascontiguousarray(values).tobytes(order="C")


def dump_noise(path, slab, box_length: float, dt: float):
    n = slab.shape[0]
    Path(path).write_bytes(HEADER.pack(NOISE_MAGIC, n, box_length, dt) + _payload(slab, n))


def dump_snapshot(path, field, box_length: float, dt: float, t: float):
    n = field.shape[0]
    head = HEADER.pack(SNAP_MAGIC, n, box_length, dt) + TIME.pack(t)
    Path(path).write_bytes(head + _payload(field, n))


def load_field(path):
    """Read a noise dump or snapshot; returns ``(field, meta)``."""
    raw = Path(path).read_bytes()
    magic, n, box_length, dt = HEADER.unpack_from(raw)
    offset = HEADER.size
    meta = {"magic": magic.decode(), "N": n, "L": box_length, "dt": dt}
    if magic == SNAP_MAGIC:
        meta["t"] = TIME.unpack_from(raw, offset)[0]
        offset += TIME.size
    elif magic != NOISE_MAGIC:
        raise ValueError(f"{path}: unknown magic {magic!r}")
    count = n**3
    if len(raw) - offset != 8 * count:
        raise ValueError(f"{path}: expected {8 * count} data bytes, found {len(raw) - offset}")
    field = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(n, n, n)
    return field.astype(float), meta


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def csv_text(header: dict, columns, rows) -> str:
    """CSV with one ``#``-prefixed JSON line carrying ``header``; floats written with ``repr``."""
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: dict, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, columns, rows))


def read_csv(path):
    """Return ``(header, rows)`` where rows are dicts of strings."""
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0][1:].strip())
    return header, list(csv.DictReader(lines[1:]))

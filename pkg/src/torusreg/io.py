"""File formats: coefficient JSON, CSV series, binary grids, run configs.

Every text artifact starts with a provenance record naming the tool version
and the SHA-256 of the resolved configuration.  Binary grids carry a fixed
32-byte header instead (magic, n, d, N) followed by row-major float64 data.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .lattice import FourierMap, GridField

GRID_MAGIC = b"TORGRID1"
_GRID_HEADER = struct.Struct("<8sqqq")

# runtime-only keys that never change results
RUNTIME_KEYS = frozenset({"threads", "out", "config"})


class MalformedFileError(ValueError):
    """Unreadable input; carries the path and the byte offset of the problem."""

    def __init__(self, path, offset: int, msg: str):
        self.path = str(path)
        self.offset = int(offset)
        super().__init__(f"{self.path}: byte {self.offset}: {msg}")


# ---------------------------------------------------------------------------
# config and provenance
# ---------------------------------------------------------------------------


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def result_config(config: Mapping) -> dict:
    """The config without runtime-only keys."""
    return {k: v for k, v in config.items() if k not in RUNTIME_KEYS}


def config_hash(config: Mapping) -> str:
    return hashlib.sha256(canonical_json(result_config(config)).encode()).hexdigest()


def provenance(config: Mapping) -> dict:
    return {"tool": "torusreg", "version": __version__, "config_sha256": config_hash(config)}


def provenance_line(config: Mapping) -> str:
    return f"# torusreg {__version__} config_sha256={config_hash(config)}"


def write_config(path, config: Mapping) -> None:
    body = {"provenance": provenance(config), "config": result_config(config)}
    Path(path).write_text(json.dumps(body, sort_keys=True, indent=2) + "\n")


def read_config(path) -> dict:
    data = _load_json(path)
    if not isinstance(data, dict):
        raise MalformedFileError(path, 0, "config must be a JSON object")
    body = data.get("config", data)
    if not isinstance(body, dict):
        raise MalformedFileError(path, 0, "'config' must be a JSON object")
    return dict(body)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _load_json(path):
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFileError(path, exc.start, "not valid UTF-8") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(path, len(text[:exc.pos].encode()), exc.msg) from None


def _entry_offsets(text: str, key: str) -> list:
    """Byte offsets of the elements of the top-level array stored under `key`."""
    dec = json.JSONDecoder()
    at = text.find(f'"{key}"')
    if at < 0:
        return []
    pos = text.find("[", at)
    offsets = []
    pos += 1
    while pos < len(text):
        while pos < len(text) and text[pos] in " \t\r\n,":
            pos += 1
        if pos >= len(text) or text[pos] == "]":
            break
        offsets.append(len(text[:pos].encode()))
        try:
            _, pos = dec.raw_decode(text, pos)
        except json.JSONDecodeError:
            break
    return offsets


def _float_list(v, d):
    arr = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if arr.shape != (d,):
        raise ValueError(f"expected {d} values")
    return arr


def dump_fourier_map(f: FourierMap, config: Mapping) -> str:
    coeffs = [{"k": [int(x) for x in k], "re": [float(c.real) for c in row], "im": [float(c.imag) for c in row]}
              for k, row in zip(f.ks, f.cs)]
    body = {"provenance": provenance(config), "n": f.n, "d": f.d, "real": bool(f.real), "coeffs": coeffs}
    return json.dumps(body, indent=1, allow_nan=False) + "\n"


def write_fourier_map(path, f: FourierMap, config: Mapping) -> None:
    Path(path).write_text(dump_fourier_map(f, config))


def read_fourier_map(path) -> FourierMap:
    """Load a coefficient file; schema errors point at the offending entry."""
    data = _load_json(path)
    text = Path(path).read_text()
    if not isinstance(data, dict):
        raise MalformedFileError(path, 0, "top level must be an object")
    for key in ("n", "d", "coeffs"):
        if key not in data:
            raise MalformedFileError(path, 0, f"missing key '{key}'")
    n, d = data["n"], data["d"]
    if not (isinstance(n, int) and isinstance(d, int) and n >= 1 and d >= 1):
        raise MalformedFileError(path, max(text.find('"n"'), 0), "n and d must be positive integers")
    entries = data["coeffs"]
    if not isinstance(entries, list):
        raise MalformedFileError(path, max(text.find('"coeffs"'), 0), "'coeffs' must be a list")
    offsets = _entry_offsets(text, "coeffs")
    ks = np.zeros((len(entries), n), dtype=np.int64)
    cs = np.zeros((len(entries), d), dtype=np.complex128)
    for i, e in enumerate(entries):
        try:
            k = e["k"]
            if len(k) != n or not all(isinstance(x, int) for x in k):
                raise ValueError(f"k must be {n} integers")
            ks[i] = k
            cs[i] = _float_list(e["re"], d) + 1j * _float_list(e.get("im", [0.0] * d), d)
        except (KeyError, TypeError, ValueError) as exc:
            off = offsets[i] if i < len(offsets) else 0
            raise MalformedFileError(path, off, f"coefficient entry {i}: {exc}") from None
    real = bool(data.get("real", True))
    f = FourierMap(n, d, ks, cs, real=real)
    if real and f.conj_mismatch() > 1e-12 * max(1.0, float(np.abs(f.cs).max()) if f.size else 1.0):
        raise MalformedFileError(path, 0, "marked real but coefficients are not conjugate-symmetric")
    return f


def write_json(path, payload: Mapping, config: Mapping) -> None:
    body = {"provenance": provenance(config), **payload}
    Path(path).write_text(json.dumps(body, sort_keys=True, indent=2, allow_nan=True) + "\n")


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return format(v, ".17g")
    return str(v)


def format_csv(header: Sequence[str], rows: Iterable[Sequence], config: Mapping) -> str:
    buf = _io.StringIO()
    buf.write(provenance_line(config) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], config: Mapping) -> None:
    Path(path).write_text(format_csv(header, rows, config))


def read_csv(path) -> tuple[str, list, list]:
    """(provenance line, header, rows as strings)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# torusreg"):
        raise MalformedFileError(path, 0, "missing provenance line")
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    if header is None:
        raise MalformedFileError(path, len(lines[0]) + 1, "missing header row")
    return lines[0], header, list(reader)


# ---------------------------------------------------------------------------
# binary grids
# ---------------------------------------------------------------------------


def write_grid(path, g: GridField) -> None:
    head = _GRID_HEADER.pack(GRID_MAGIC, g.n, g.d, g.N)
    data = np.ascontiguousarray(g.values, dtype="<f8").tobytes()
    Path(path).write_bytes(head + data)


def read_grid(path) -> GridField:
    raw = Path(path).read_bytes()
    if len(raw) < _GRID_HEADER.size:
        raise MalformedFileError(path, len(raw), "truncated header")
    magic, n, d, N = _GRID_HEADER.unpack_from(raw)
    if magic != GRID_MAGIC:
        raise MalformedFileError(path, 0, "bad magic")
    if n < 1 or d < 1 or N < 1:
        raise MalformedFileError(path, 8, "invalid dimensions in header")
    want = _GRID_HEADER.size + 8 * d * N ** n
    if len(raw) != want:
        raise MalformedFileError(path, min(len(raw), want), f"expected {want} bytes, found {len(raw)}")
    vals = np.frombuffer(raw, dtype="<f8", offset=_GRID_HEADER.size).reshape((N,) * n + (d,))
    return GridField(int(n), int(d), int(N), vals.astype(np.float64))

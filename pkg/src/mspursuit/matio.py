"""Matrix CSV persistence: schema "v1", bit-exact float round-trip.

File layout::

    # config_hash=<hex> seed=<int>
    v1,<rows>,<cols>
    <row 0: cols comma-separated values, 17 significant digits>
    ...

The leading provenance comment is required; 17 significant digits round-trip
any float64 exactly.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ParseError

SCHEMA = "v1"


def config_hash(obj) -> str:
    """Stable 16-hex-digit hash of a JSON-serializable config object."""
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path, M: np.ndarray, config_hash: str = "", seed: int = 0):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    rows, cols = M.shape
    out = [f"# config_hash={config_hash} seed={int(seed)}", f"{SCHEMA},{rows},{cols}"]
    for r in range(rows):
        out.append(",".join(format_float(x) for x in M[r]))
    Path(path).write_text("\n".join(out) + "\n")


def _parse_provenance(line: str, path, lineno: int) -> dict:
    if not line.startswith("#"):
        raise ParseError(f"{path}:{lineno}: expected provenance comment line starting with '#'")
    meta = {}
    for tok in line[1:].split():
        if "=" in tok:
            key, _, val = tok.partition("=")
            meta[key] = val
    return meta


def read_matrix_csv(path):
    """Read a schema-v1 matrix CSV; returns ``(matrix, meta)``.

    Raises ParseError with file/line/field context on any malformation,
    including a mismatch between the declared and actual row/column counts.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read: {exc}") from exc
    lines = text.splitlines()
    if len(lines) < 2:
        raise ParseError(f"{path}: file too short, expected provenance + header lines")
    meta = _parse_provenance(lines[0], path, 1)
    header = lines[1].split(",")
    if len(header) != 3 or header[0] != SCHEMA:
        raise ParseError(f"{path}:2: expected header '{SCHEMA},<rows>,<cols>', got {lines[1]!r}")
    try:
        rows, cols = int(header[1]), int(header[2])
    except ValueError as exc:
        raise ParseError(f"{path}:2: non-integer dimensions in header {lines[1]!r}") from exc
    if rows < 1 or cols < 1:
        raise ParseError(f"{path}:2: dimensions must be positive, got {rows}x{cols}")
    body = [ln for ln in lines[2:] if ln.strip() != ""]
    if len(body) != rows:
        raise ParseError(f"{path}: header declares {rows} rows but file has {len(body)} data rows")
    M = np.empty((rows, cols), dtype=float)
    for r, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != cols:
            raise ParseError(
                f"{path}:{r + 3}: expected {cols} fields, got {len(fields)}"
            )
        for c, tok in enumerate(fields):
            try:
                M[r, c] = float(tok)
            except ValueError as exc:
                raise ParseError(f"{path}:{r + 3}: field {c + 1}: not a float: {tok!r}") from exc
    return M, meta


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc

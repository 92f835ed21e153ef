"""Plain-text file formats: snapshots, telemetry and key-value documents.

Snapshot files
    One header line ``# t=<t> problem=<kind> n=<nodes>`` followed by one row
    per node, ``alpha value1 [value2]``, every number written with 17
    significant digits so that float64 values round-trip exactly.

Key-value documents
    ``key: value`` lines; a key with an empty value opens a block whose
    entries are indented by two more spaces.  Scalars are ``true``/``false``,
    integers, floats (17 significant digits), ``none`` or bare strings;
    lists are written ``[a, b, c]``.  Lines starting with ``#`` and blank
    lines are ignored.  Certificates, reports, manifests and run
    configurations all use this format and carry a ``format_version`` key.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError

FORMAT_VERSION = 1
_DIGITS = "%.17g"


# ---------------------------------------------------------------------------
# snapshots


@dataclass
class Snapshot:
    t: float
    problem: str
    alphas: np.ndarray
    columns: np.ndarray  # shape (ncols, n)

    @property
    def n(self) -> int:
        return self.alphas.size


def format_snapshot(t: float, problem: str, alphas, *columns) -> str:
    alphas = np.asarray(alphas, dtype=float)
    lines = [f"# t={_DIGITS % t} problem={problem} n={alphas.size}"]
    data = np.vstack([alphas] + [np.asarray(c, dtype=float) for c in columns]).T
    lines.extend(" ".join(_DIGITS % v for v in row) for row in data)
    return "\n".join(lines) + "\n"


def write_snapshot(path, t: float, problem: str, alphas, *columns) -> None:
    with open(path, "w") as fh:
        fh.write(format_snapshot(t, problem, alphas, *columns))


def read_snapshot(path) -> Snapshot:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ConfigError("missing snapshot header", f"{path}:1")
        fields = dict(tok.split("=", 1) for tok in header[1:].split() if "=" in tok)
        try:
            t = float(fields["t"])
            problem = fields["problem"]
            n = int(fields["n"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad snapshot header {header!r}", f"{path}:1") from exc
        rows = [line.split() for line in fh if line.strip()]
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ConfigError("non-numeric snapshot row", str(path)) from exc
    if data.ndim != 2 or data.shape[0] != n or data.shape[1] < 2:
        raise ConfigError(f"expected {n} rows of at least 2 columns", str(path))
    return Snapshot(t, problem, data[:, 0], data[:, 1:].T)


# ---------------------------------------------------------------------------
# telemetry


TELEMETRY_HEADER = "# t dt err accepted nodes"


def format_telemetry(records) -> str:
    return "".join(
        f"{_DIGITS % r.t} {_DIGITS % r.dt} {_DIGITS % r.err} {int(r.accepted)} {r.nodes}\n" for r in records
    )


def read_telemetry(path) -> np.ndarray:
    """Rows (t, dt, err, accepted, nodes) as a float array."""
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                rows.append([float(x) for x in line.split()])
    return np.array(rows, dtype=float).reshape(-1, 5)


# ---------------------------------------------------------------------------
# key-value documents


def _format_scalar(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return _DIGITS % v
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_format_scalar(x) for x in v) + "]"
    s = str(v)
    if "\n" in s:
        s = s.replace("\n", " ")
    return s


def dump_document(doc: dict, indent: int = 0) -> str:
    pad = " " * indent
    out = []
    for key, value in doc.items():
        if isinstance(value, dict):
            out.append(f"{pad}{key}:")
            out.append(dump_document(value, indent + 2).rstrip("\n"))
        else:
            out.append(f"{pad}{key}: {_format_scalar(value)}")
    return "\n".join(line for line in out if line) + "\n"


def _parse_scalar(s: str):
    s = s.strip()
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    if low == "none":
        return None
    if s.startswith("[") and s.endswith("]"):
        inner = s[1:-1].strip()
        return [] if not inner else [_parse_scalar(x) for x in inner.split(",")]
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


class Document(dict):
    """Parsed key-value document; ``lines`` maps dotted keys to line numbers."""

    lines: dict

    def line_of(self, key: str) -> Optional[int]:
        return self.lines.get(key)


def parse_document(text: str, source: str = "<document>") -> Document:
    root = Document()
    root.lines = {}
    stack = [(-1, root, "")]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip(" "))
        line = raw.strip()
        if ":" not in line:
            raise ConfigError(f"expected 'key: value', got {line!r}", f"{source}:{lineno}")
        key, _, value = line.partition(":")
        key = key.strip()
        if not key:
            raise ConfigError("empty key", f"{source}:{lineno}")
        while stack and indent <= stack[-1][0]:
            stack.pop()
        if not stack:
            raise ConfigError("bad indentation", f"{source}:{lineno}")
        _, parent, prefix = stack[-1]
        dotted = f"{prefix}{key}"
        if key in parent:
            raise ConfigError(f"duplicate key {dotted!r}", f"{source}:{lineno}")
        root.lines[dotted] = lineno
        if value.strip() == "":
            child = {}
            parent[key] = child
            stack.append((indent, child, dotted + "."))
        else:
            parent[key] = _parse_scalar(value)
    return root


def read_document(path) -> Document:
    with open(path) as fh:
        return parse_document(fh.read(), str(path))


def write_document(path, doc: dict) -> None:
    body = dict(doc)
    body.setdefault("format_version", FORMAT_VERSION)
    # keep the version first for human readers
    ordered = {"format_version": body.pop("format_version")}
    ordered.update(body)
    with open(path, "w") as fh:
        fh.write(dump_document(ordered))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()

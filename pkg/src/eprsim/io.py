"""Serialization of patterns, reports and run manifests.

Pattern CSV layout (one header row, then one row per x_A pixel)::

    x_a\\x_b [m] mode=dds normalized=false manifest=<hash>, x_b[0], x_b[1], ...
    x_a[0], P[0, 0], P[0, 1], ...

Floats are written with ``repr`` so they read back bit-identically.  The
graymap is binary PGM (P5), rows = x_A ascending, columns = x_B ascending,
peak-normalized to 255.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .engine import TwoParticlePattern
from .geometry import Mode

MANIFEST_NAME = "manifest.json"
_HEADER = re.compile(r"mode=(\w+)\s+normalized=(\w+)(?:\s+manifest=(\w+))?")


@dataclass
class RunManifest:
    config: dict
    config_text: str
    command: str
    tool_version: str = __version__
    quadrature_steps: list | None = None
    quadrature_counts: list | None = None
    convergence_deviation: float | None = None
    wall_time: float | None = None
    outputs: list[str] = field(default_factory=list)

    @property
    def hash(self) -> str:
        """Digest of everything that determines the numeric outputs."""
        h = hashlib.sha256()
        h.update(self.command.encode())
        h.update(self.config_text.encode())
        h.update(self.tool_version.encode())
        return h.hexdigest()[:16]

    def to_json(self) -> str:
        data = asdict(self)
        data["hash"] = self.hash
        return json.dumps(data, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_jsonable)


def pattern_to_csv(pattern: TwoParticlePattern, manifest_hash: str = "") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = (f"x_a\\x_b [m] mode={pattern.mode.value} "
            f"normalized={'true' if pattern.normalized else 'false'}")
    if manifest_hash:
        head += f" manifest={manifest_hash}"
    w.writerow([head] + [repr(float(v)) for v in pattern.x_b])
    for xa, row in zip(pattern.x_a, pattern.values):
        w.writerow([repr(float(xa))] + [repr(float(v)) for v in row])
    return buf.getvalue()


def pattern_from_csv(text: str) -> tuple[TwoParticlePattern, str]:
    """Inverse of :func:`pattern_to_csv`; returns ``(pattern, manifest hash)``."""
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise ValueError("pattern CSV needs a header row and at least one data row")
    m = _HEADER.search(rows[0][0])
    if not m:
        raise ValueError("pattern CSV header lacks mode/normalized metadata")
    mode, normalized, digest = m.group(1), m.group(2) == "true", m.group(3) or ""
    x_b = np.array([float(v) for v in rows[0][1:]])
    x_a = np.array([float(r[0]) for r in rows[1:]])
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    if values.shape != (x_a.size, x_b.size):
        raise ValueError("pattern CSV rows have inconsistent lengths")
    return TwoParticlePattern(x_a, x_b, values, Mode(mode), normalized), digest


def pattern_to_pgm(pattern: TwoParticlePattern, manifest_hash: str = "") -> bytes:
    vals = np.asarray(pattern.values, dtype=float)
    peak = vals.max()
    scaled = np.zeros_like(vals) if peak <= 0 else np.clip(vals / peak, 0, 1) * 255.0
    pixels = np.floor(scaled + 0.5).astype(np.uint8)
    header = "P5\n"
    if manifest_hash:
        header += f"# manifest {manifest_hash}\n"
    header += f"{vals.shape[1]} {vals.shape[0]}\n255\n"
    return header.encode("ascii") + pixels.tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    """Minimal P5 reader (comments allowed in the header)."""
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise ValueError("not a binary graymap")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pos += 1  # single whitespace after maxval
    if maxval > 255:
        raise ValueError("only 8-bit graymaps are supported")
    return np.frombuffer(data[pos:pos + width * height], dtype=np.uint8).reshape(height, width)


def _write(path: Path, payload) -> None:
    try:
        if isinstance(payload, bytes):
            path.write_bytes(payload)
        else:
            path.write_text(payload, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_pattern(pattern: TwoParticlePattern, out_dir, stem: str, formats=("csv", "pgm", "report"),
                 manifest: RunManifest | None = None, summary: dict | None = None) -> list[Path]:
    """Write the requested formats; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = manifest.hash if manifest else ""
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = out / f"{stem}.csv"
            _write(path, pattern_to_csv(pattern, digest))
        elif fmt == "pgm":
            path = out / f"{stem}.pgm"
            _write(path, pattern_to_pgm(pattern, digest))
        elif fmt == "report":
            path = out / f"{stem}.report.json"
            body = dict(summary or {})
            body["manifest"] = digest
            _write(path, dumps_json(body) + "\n")
        else:
            raise ValueError(f"unknown output format {fmt!r}")
        written.append(path)
    return written


def write_manifest(out_dir, manifest: RunManifest) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    _write(path, manifest.to_json() + "\n")
    return path


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)

"""On-disk formats: grid files, manifests, character-art dumps, metric logs.

Grid files are JSON lines. The first line is a header naming the format,
the class legend and the grid size; every later line holds one grid. Hard
grids are stored as rows of legend characters, soft grids as nested lists of
per-cell probabilities. Floats are written with ``repr`` so they read back
bit-exact.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import DataValidationError, DimensionError
from .levels import CLASS_CHARS, CLASS_NAMES, N_CLASSES, LevelSpec, check_feasible

GRID_FORMAT = "genco-grids"
MANIFEST_FORMAT = "genco-manifest"
FORMAT_VERSION = 1
KINDS = ("levels", "terrain", "samples")
METRIC_COLUMNS = ("epoch", "phase", "group_loss", "individual_loss", "critic_loss",
                  "feasible_rate", "unique_fraction", "density", "coverage")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _is_hard(grids: np.ndarray) -> bool:
    return bool(np.all((grids == 0) | (grids == 1)) and np.all(grids.sum(axis=-1) == 1))


def render_grid(x: np.ndarray) -> str:
    """One-hot (H, W, 8) -> H lines of legend characters."""
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[-1] != N_CLASSES:
        raise DimensionError(f"expected (H, W, {N_CLASSES}), got {x.shape}")
    if not _is_hard(x):
        raise ValueError("only one-hot grids have a character rendering")
    return "\n".join("".join(CLASS_CHARS[v] for v in row) for row in x.argmax(axis=-1))


def parse_grid(text: str) -> np.ndarray:
    rows = [line for line in text.strip("\n").split("\n")]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("grid rows must be non-empty and of equal length")
    out = np.zeros((len(rows), len(rows[0]), N_CLASSES))
    for i, row in enumerate(rows):
        for j, ch in enumerate(row):
            k = CLASS_CHARS.find(ch)
            if k < 0:
                raise ValueError(f"unknown tile character {ch!r}")
            out[i, j, k] = 1.0
    return out


def write_grids(path, grids: np.ndarray, kind: str, extra: dict | None = None) -> str:
    """Write (n, H, W, 8) grids; returns the file's sha256."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    grids = np.asarray(grids, dtype=np.float64)
    if grids.ndim != 4 or grids.shape[-1] != N_CLASSES:
        raise DimensionError(f"grids must be (n, H, W, {N_CLASSES}), got {grids.shape}")
    hard = _is_hard(grids)
    header = {"format": GRID_FORMAT, "version": FORMAT_VERSION, "kind": kind,
              "legend": list(CLASS_NAMES), "chars": CLASS_CHARS,
              "height": grids.shape[1], "width": grids.shape[2],
              "encoding": "chars" if hard else "probs", "count": len(grids)}
    if extra:
        header["extra"] = extra
    lines = [json.dumps(header, sort_keys=True)]
    for i, g in enumerate(grids):
        if hard:
            rec = {"i": i, "rows": render_grid(g).split("\n")}
        else:
            rec = {"i": i, "probs": g.tolist()}
        lines.append(json.dumps(rec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return sha256_file(path)


def read_grids(path) -> tuple[np.ndarray, dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataValidationError(f"{path}: empty file")
    header = json.loads(lines[0])
    if header.get("format") != GRID_FORMAT or header.get("version") != FORMAT_VERSION:
        raise DataValidationError(f"{path}: not a version-{FORMAT_VERSION} grid file")
    if header.get("legend") != list(CLASS_NAMES) or header.get("chars") != CLASS_CHARS:
        raise DataValidationError(f"{path}: class legend does not match")
    h, w = header["height"], header["width"]
    grids = []
    for n, line in enumerate(lines[1:]):
        rec = json.loads(line)
        if rec.get("i") != n:
            raise DataValidationError(f"{path}: record {n} out of order")
        g = parse_grid("\n".join(rec["rows"])) if "rows" in rec else np.array(rec["probs"], dtype=np.float64)
        if g.shape != (h, w, N_CLASSES):
            raise DataValidationError(f"{path}: record {n} has shape {g.shape}")
        grids.append(g)
    if len(grids) != header["count"]:
        raise DataValidationError(f"{path}: header says {header['count']} records, found {len(grids)}")
    arr = np.stack(grids) if grids else np.zeros((0, h, w, N_CLASSES))
    return arr, header


def write_manifest(path, data_path, kind: str, count: int, dims: tuple, seed: int) -> dict:
    manifest = {"format": MANIFEST_FORMAT, "version": FORMAT_VERSION, "kind": kind,
                "count": int(count), "height": int(dims[0]), "width": int(dims[1]),
                "seed": int(seed), "file": Path(data_path).name, "sha256": sha256_file(data_path)}
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def verify_manifest(path, spec: LevelSpec | None = None) -> np.ndarray:
    """Check the checksum (and, for levels, playability); return the grids."""
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    if manifest.get("format") != MANIFEST_FORMAT:
        raise DataValidationError(f"{path}: not a manifest")
    data_path = Path(path).parent / manifest["file"]
    if sha256_file(data_path) != manifest["sha256"]:
        raise DataValidationError(f"{data_path}: checksum mismatch")
    grids, header = read_grids(data_path)
    if len(grids) != manifest["count"]:
        raise DataValidationError(f"{data_path}: count mismatch")
    if manifest["kind"] == "levels":
        spec = spec or LevelSpec(manifest["height"], manifest["width"])
        bad = [i for i, g in enumerate(grids) if not check_feasible(g, spec)]
        if bad:
            raise DataValidationError(f"{data_path}: records {bad[:5]} are not playable")
    return grids


def dump_grids(grids: np.ndarray, out) -> None:
    """Character-art dump: a legend line, then each grid under a '; sample i' line.

    Comment lines start with ';' because '#' is the wall tile.
    """
    grids = np.asarray(grids)
    legend = " ".join(f"{ch}={name}" for ch, name in zip(CLASS_CHARS, CLASS_NAMES))
    parts = [f"; legend: {legend}"]
    for i, g in enumerate(grids):
        parts.append(f"; sample {i}\n{render_grid(g)}\n")
    Path(out).write_text("\n".join(parts) + "\n", encoding="utf-8")


def parse_dump(text: str) -> np.ndarray:
    grids, block = [], []
    for line in text.splitlines():
        if line.startswith(";") or not line.strip():
            if block:
                grids.append(parse_grid("\n".join(block)))
                block = []
            continue
        block.append(line)
    if block:
        grids.append(parse_grid("\n".join(block)))
    return np.stack(grids)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


class MetricLog:
    """CSV rows with a fixed column order; values use repr so runs diff exactly."""

    def __init__(self, path=None):
        self.path = path
        self.rows: list[dict] = []

    def append(self, **row) -> None:
        unknown = set(row) - set(METRIC_COLUMNS)
        if unknown:
            raise ValueError(f"unknown metric columns {sorted(unknown)}")
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = _io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        for row in self.rows:
            writer.writerow([_fmt(row.get(col)) for col in METRIC_COLUMNS])
        return buf.getvalue()

    def save(self, path=None) -> None:
        Path(path or self.path).write_text(self.to_csv(), encoding="utf-8")

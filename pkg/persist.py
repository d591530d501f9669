"""
On-disk artifacts of a run.

    <root>/<experiment>/<run-id>/
        config.yaml           the validated RunConfig (dump_config)
        snapshots/<i>.snap    binary field snapshots, i = 0, 1, ...
        diagnostics.csv       one DiagnosticsRecord per row
        summary.json          status, version, final time, steps, events

Byte layouts are documented in docs/formats.md.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import struct
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from config import RunConfig, dump_config, load_config
from diagnostics import DiagnosticsRecord
from errors import ArtifactFormatError, InvalidParameterError
from spectral import DomainSpec, PhysicalField, grid_points

log = logging.getLogger("persist")

PathLike = Union[str, Path]

SNAPSHOT_MAGIC = b"CCHSNAPSHOT\0"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<12sI")
_META = struct.Struct("<IId")

CONFIG_FILE = "config.yaml"
DIAGNOSTICS_FILE = "diagnostics.csv"
SUMMARY_FILE = "summary.json"
SNAPSHOT_DIR = "snapshots"
EXPORT_FORMATS = ("txt", "csv")


# ---------------- snapshots ----------------
def write_snapshot(path: PathLike, field: PhysicalField, t: float) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    d = field.domain
    with open(p, "wb") as f:
        f.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION))
        f.write(_META.pack(d.dimension, d.points_per_axis, float(t)))
        f.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    return p


def read_snapshot(path: PathLike) -> Tuple[PhysicalField, float]:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as e:
        raise ArtifactFormatError(f"cannot read snapshot {p}: {e.strerror or e}") from e
    if len(raw) < _HEADER.size + _META.size:
        raise ArtifactFormatError(f"{p}: truncated snapshot header")
    magic, version = _HEADER.unpack_from(raw, 0)
    if magic != SNAPSHOT_MAGIC:
        raise ArtifactFormatError(f"{p}: not a snapshot (bad magic)")
    if version != SNAPSHOT_VERSION:
        raise ArtifactFormatError(f"{p}: unsupported snapshot version {version}")
    dim, n, t = _META.unpack_from(raw, _HEADER.size)
    try:
        domain = DomainSpec(dimension=dim, points_per_axis=n)
    except ValueError as e:
        raise ArtifactFormatError(f"{p}: invalid grid in header: {e}") from e
    body = raw[_HEADER.size + _META.size:]
    if len(body) != 8 * domain.size:
        raise ArtifactFormatError(f"{p}: expected {domain.size} values, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(domain.shape)
    return PhysicalField(domain, values), t


# ---------------- diagnostics CSV ----------------
def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else format(x, ".17g")


def write_records(path: PathLike, records: Sequence[DiagnosticsRecord]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(DiagnosticsRecord.columns())
        for r in records:
            w.writerow([_fmt(v) for v in r.as_row()])
    return p


def read_records(path: PathLike) -> List[DiagnosticsRecord]:
    p = Path(path)
    with open(p, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(rows[0]) != DiagnosticsRecord.columns():
        raise ArtifactFormatError(f"{p}: unexpected diagnostics header")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        try:
            out.append(DiagnosticsRecord(*(float(v) for v in row)))
        except (TypeError, ValueError) as e:
            raise ArtifactFormatError(f"{p}: bad row {i}: {e}") from e
    return out


# ---------------- run directories ----------------
def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha1(blob.encode()).hexdigest()[:10]


def run_dir_for(root: PathLike, experiment: str, cfg: RunConfig) -> Path:
    """Deterministic `<root>/<experiment>/<name>-<config hash>`."""
    return Path(root) / experiment / f"{cfg.run.name}-{config_hash(cfg)}"


def write_config(run_dir: PathLike, cfg: RunConfig) -> Path:
    p = Path(run_dir) / CONFIG_FILE
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dump_config(cfg), encoding="utf-8")
    return p


def read_config(run_dir: PathLike) -> RunConfig:
    return load_config(Path(run_dir) / CONFIG_FILE)


def snapshot_path(run_dir: PathLike, index: int) -> Path:
    return Path(run_dir) / SNAPSHOT_DIR / f"{index:04d}.snap"


def list_snapshots(run_dir: PathLike) -> List[Path]:
    return sorted((Path(run_dir) / SNAPSHOT_DIR).glob("*.snap"))


def write_summary(run_dir: PathLike, summary: Dict[str, Any]) -> Path:
    p = Path(run_dir) / SUMMARY_FILE
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(summary, indent=2), encoding="utf-8")
    return p


def read_summary(run_dir: PathLike) -> Dict[str, Any]:
    p = Path(run_dir) / SUMMARY_FILE
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ArtifactFormatError(f"{p}: {e}") from e


def write_table(path: PathLike, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    """Small result tables (error tables, bound tables); floats at full precision."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return p


# ---------------- export ----------------
def export_snapshot(snap: PathLike, fmt: str, out: PathLike) -> Path:
    """txt: value matrix (1D one per line, 2D N×N); csv: x,u or x,y,u rows."""
    if fmt not in EXPORT_FORMATS:
        raise InvalidParameterError(f"unknown export format {fmt!r} (use txt or csv)")
    field, _t = read_snapshot(snap)
    o = Path(out)
    o.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "txt":
        np.savetxt(o, field.values, fmt="%.17g")
        return o
    coords = grid_points(field.domain)
    header = ["x", "y"][: field.domain.dimension] + ["u"]
    cols = [c.ravel() for c in coords] + [field.values.ravel()]
    write_table(o, header, [tuple(float(v) for v in row) for row in zip(*cols)])
    return o


def export_run(run_dir: PathLike, fmt: str) -> List[Path]:
    snaps = list_snapshots(run_dir)
    if not snaps:
        raise ArtifactFormatError(f"{run_dir}: no snapshots to export")
    out_dir = Path(run_dir) / "export"
    paths = [export_snapshot(s, fmt, out_dir / f"{s.stem}.{fmt}") for s in snaps]
    log.info("exported %d snapshot(s) from %s as %s", len(paths), run_dir, fmt)
    return paths

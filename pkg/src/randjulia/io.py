"""Output writers: binary PGM images, tail CSV files and JSON reports.

Every writer goes through `atomic_write` (temp file in the target directory,
then rename) and embeds the resolved run configuration.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Optional

import numpy as np

from .connectivity import GridField
from .stats import Mode, TailCurve

__all__ = [
    "atomic_write",
    "config_json",
    "escape_gray",
    "green_gray",
    "pgm_bytes",
    "read_pgm",
    "write_pgm",
    "tail_csv",
    "read_tail_csv",
    "write_report",
]


def atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_json(config: dict) -> str:
    """Canonical one-line JSON for embedding in output files."""
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# images


def escape_gray(grid: GridField) -> np.ndarray:
    """255 for bounded cells, otherwise min(254, escape time)."""
    return np.where(grid.cells < 0, 255, np.minimum(grid.cells, 254)).astype(np.uint8)


def green_gray(values: np.ndarray, R0: float) -> np.ndarray:
    """Map g linearly from [0, log R0 + 1] onto 0..255, clamped."""
    top = math.log(R0) + 1.0
    return np.clip(np.rint(255.0 * np.asarray(values) / top), 0, 255).astype(np.uint8)


def pgm_bytes(gray: np.ndarray, comment: Optional[str] = None) -> bytes:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    if gray.ndim != 2:
        raise ValueError("image must be two-dimensional")
    rows, cols = gray.shape
    header = b"P5\n"
    if comment:
        for line in comment.splitlines():
            header += b"# " + line.encode("utf-8") + b"\n"
    header += f"{cols} {rows}\n255\n".encode("ascii")
    return header + gray.tobytes()


def write_pgm(path: str, gray: np.ndarray, comment: Optional[str] = None) -> None:
    atomic_write(path, pgm_bytes(gray, comment))


def read_pgm(path: str):
    """Returns (pixels, comment lines)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM")
    pos, fields, comments = 2, [], []
    while len(fields) < 3:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comments.append(data[pos + 1:end].decode("utf-8").strip())
            pos = end + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(int(data[pos:end]))
        pos = end
    cols, rows, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pos += 1
    pixels = np.frombuffer(data, dtype=np.uint8, count=rows * cols, offset=pos).reshape(rows, cols)
    return pixels, comments


# ---------------------------------------------------------------------------
# tables and reports


def tail_csv(curve: TailCurve, config: dict) -> bytes:
    lines = [
        f"# config: {config_json(config)}",
        f"# M={curve.M} censored={curve.censored} n_max={curve.n_max} "
        f"master_seed={curve.master_seed} mode={curve.mode.value}",
        "k,survivors,survival",
    ]
    for k, (s, p) in enumerate(zip(curve.survivors, curve.survival)):
        lines.append(f"{k},{int(s)},{float(p)!r}")
    return ("\n".join(lines) + "\n").encode("ascii")


def read_tail_csv(path: str) -> TailCurve:
    meta, rows = {}, []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# M="):
                meta = dict(part.split("=", 1) for part in line[2:].split())
            elif line.startswith("#") or line.startswith("k,") or not line:
                continue
            else:
                k, s, _ = line.split(",")
                rows.append((int(k), int(s)))
    if not meta:
        raise ValueError(f"{path}: missing '# M=...' metadata line")
    rows.sort()
    return TailCurve(
        M=int(meta["M"]),
        survivors=tuple(s for _, s in rows),
        censored=int(meta["censored"]),
        n_max=int(meta["n_max"]),
        master_seed=int(meta["master_seed"]),
        mode=Mode(meta["mode"]),
    )


def write_report(path: str, record: dict, config: dict) -> None:
    doc = {"config": config, **record}
    atomic_write(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8"))

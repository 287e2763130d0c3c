"""File output: atomic writes and the CSV layouts for chains and processes."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from ._lp import INF, row_norms
from .chain_space import Chain, build_chain


def fmt(x) -> str:
    """Deterministic text form of a number (shortest round-trip repr)."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def json_text(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------ chains

def chain_profile_rows(chain):
    """(index, time, point norm, distance to origin) per chain point.

    The point norm is unscaled; the distance to the origin carries the
    chain's scale.
    """
    norms = row_norms(chain.points, chain.p)
    return [
        (i, float(t), float(v), float(v) * chain.scale)
        for i, (t, v) in enumerate(zip(chain.times, norms))
    ]


def write_chain_profile_csv(chain, path) -> Path:
    return atomic_write_text(path, csv_text(("index", "time", "point_norm", "distance_to_origin"),
                                            chain_profile_rows(chain)))


def chain_points_text(chain) -> str:
    p = "inf" if chain.p == INF else fmt(chain.p)
    head = f"# scheme={chain.scheme}\n# p={p}\n# scale={fmt(chain.scale)}\n"
    d = chain.points.shape[1]
    rows = [(i, float(t), *map(float, pt)) for i, (t, pt) in enumerate(zip(chain.times, chain.points))]
    return head + csv_text(["index", "time"] + [f"x{j + 1}" for j in range(d)], rows)


def write_chain_points_csv(chain, path) -> Path:
    """Chain points with their metadata, readable by :func:`read_chain_points_csv`."""
    return atomic_write_text(path, chain_points_text(chain))


class ChainFileError(ValueError):
    pass


def read_chain_points_csv(path) -> Chain:
    """Parse a chain written by :func:`write_chain_points_csv`.

    Errors name the offending line.
    """
    meta = {}
    header = None
    times, points = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if not sep:
                    raise ChainFileError(f"{path}:{lineno}: metadata must look like '# key=value'")
                meta[key.strip()] = value.strip()
                continue
            fields = next(csv.reader([line]))
            if header is None:
                if fields[:2] != ["index", "time"]:
                    raise ChainFileError(f"{path}:{lineno}: expected header 'index,time,x1,...'")
                header = fields
                continue
            if len(fields) != len(header):
                raise ChainFileError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
            try:
                vals = [float(v) for v in fields]
            except ValueError:
                raise ChainFileError(f"{path}:{lineno}: non-numeric field") from None
            if int(vals[0]) != len(points):
                raise ChainFileError(f"{path}:{lineno}: indices must run 0, 1, 2, ...")
            times.append(vals[1])
            points.append(vals[2:])
    if header is None or not points:
        raise ChainFileError(f"{path}: no chain points found")
    for key in ("scheme", "p", "scale"):
        if key not in meta:
            raise ChainFileError(f"{path}: missing metadata line '# {key}=...'")
    try:
        p = INF if meta["p"] in ("inf", "infinity") else float(meta["p"])
        scale = float(meta["scale"])
    except ValueError:
        raise ChainFileError(f"{path}: metadata p and scale must be numbers") from None
    pts = np.asarray(points, dtype=float)
    if np.any(pts[0] != 0):
        raise ChainFileError(f"{path}: the first point must be the origin")
    return Chain(pts, meta["scheme"], p, scale, np.asarray(times, dtype=float), None)


def write_process_csv(process, path) -> Path:
    """Cluster process events: time, atom count, stored atoms (space separated)."""
    rows = [
        (t, int(c), " ".join(fmt(a) for a in atoms))
        for (t, atoms), c in zip(process.to_rows(), process.counts.tolist())
    ]
    return atomic_write_text(path, csv_text(("t", "atom_count", "atoms"), rows))


__all__ = [
    "atomic_write_text",
    "csv_text",
    "json_text",
    "fmt",
    "write_chain_profile_csv",
    "write_chain_points_csv",
    "read_chain_points_csv",
    "write_process_csv",
    "ChainFileError",
    "build_chain",
]

"""Binary snapshots, CSV tables, and JSON manifests.

Floats are written with ``repr`` so CSV output is byte-identical across
reruns; wall-clock times appear only in manifests.
"""

from __future__ import annotations

import csv
import json
import platform
import struct
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from ._validation import ConfigurationError
from .field import KINDS, DomainSpec, GridField
from .path import BrownianPath

FIELD_MAGIC = b"LQGF"
PATH_MAGIC = b"LQGP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIB5x")
KIND_CODES = {kind: code for code, kind in enumerate(KINDS)}

ESTIMATE_COLUMNS = ("experiment_id", "alpha", "gamma", "estimator", "value", "stderr", "scales", "r2", "seed")


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ";".join(_fmt(v) for v in value)
    if value is None:
        return ""
    return str(value)


def write_json(obj, path):
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def versions():
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "scikit-learn", "statsmodels"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def manifest(config=None, seeds=None, **extra):
    """Manifest skeleton: config, seeds, versions, and the wall time of writing."""
    out = {"versions": versions(), "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    if config is not None:
        out["config"] = config.to_dict()
    if seeds is not None:
        out["seeds"] = seeds
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# fields


def write_field(field, path):
    """Write ``field`` to ``path`` (binary) and ``path.json`` (manifest)."""
    path = Path(path)
    header = _HEADER.pack(FIELD_MAGIC, FORMAT_VERSION, field.domain.n, KIND_CODES[field.kind])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    meta = {
        "seed": field.seed,
        "kind": field.kind,
        "domain": field.domain.to_dict(),
        "truncation": field.truncation,
        "root": field.root,
        "format": {"magic": FIELD_MAGIC.decode(), "version": FORMAT_VERSION, "dtype": "<f8", "order": "row-major"},
    }
    if field.meta:
        meta["meta"] = field.meta
    write_json(meta, path.with_name(path.name + ".json"))
    return path


def read_field(path):
    path = Path(path)
    raw = path.read_bytes()
    magic, version, n, code = _HEADER.unpack_from(raw)
    if magic != FIELD_MAGIC or version != FORMAT_VERSION:
        raise ConfigurationError(f"{path} is not a version-{FORMAT_VERSION} field file")
    meta = read_json(path.with_name(path.name + ".json"))
    domain = DomainSpec(meta["domain"]["shape"], n)
    size = domain.size
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if values.size != size * size:
        raise ConfigurationError(f"{path} holds {values.size} values, expected {size * size}")
    root = meta.get("root")
    if root is not None:
        root = (tuple(root[0]), root[1])
    return GridField(domain, values.reshape(size, size).astype(float), kind=KINDS[code],
                     seed=meta.get("seed"), truncation=meta.get("truncation"), root=root,
                     meta=meta.get("meta", {}))


# ---------------------------------------------------------------------------
# paths


def write_path(bpath, path):
    path = Path(path)
    header = _HEADER.pack(PATH_MAGIC, FORMAT_VERSION, len(bpath.positions), int(bpath.exited))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(bpath.positions, dtype="<f8").tobytes())
    write_json(bpath.manifest(), path.with_name(path.name + ".json"))
    return path


def read_path(path):
    path = Path(path)
    raw = path.read_bytes()
    magic, version, count, _ = _HEADER.unpack_from(raw)
    if magic != PATH_MAGIC or version != FORMAT_VERSION:
        raise ConfigurationError(f"{path} is not a version-{FORMAT_VERSION} path file")
    meta = read_json(path.with_name(path.name + ".json"))
    pos = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(count, 2).astype(float)
    return BrownianPath(meta["dt"], pos, np.asarray(meta["start"], float), meta["stop_radius"],
                        meta["seed"], meta["tau_index"], meta["tau"], meta.get("max_steps"))


# ---------------------------------------------------------------------------
# tables


def write_clock_csv(F, path):
    """Columns ``t, F_eps<e1>, ..., F_limit``; one row per path knot."""
    levels = F.levels if F.levels is not None else F.values[None, :]
    names = [f"F_eps{e!r}" for e in F.eps_ladder] if F.eps_ladder else ["F"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *names, "F_limit"])
        for i, t in enumerate(F.times):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in levels[:, i]), repr(float(F.values[i]))])
    return Path(path)


def estimate_row(experiment_id, alpha, gamma, estimate, seed):
    return {
        "experiment_id": experiment_id,
        "alpha": alpha,
        "gamma": gamma,
        "estimator": estimate.estimator,
        "value": estimate.value,
        "stderr": estimate.stderr,
        "scales": estimate.scales,
        "r2": estimate.r2,
        "seed": seed,
    }


def write_rows_csv(rows, path, columns=None):
    """Write dict rows as CSV; column order from ``columns`` or the first row."""
    rows = list(rows)
    columns = list(columns or (rows[0].keys() if rows else ()))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    return Path(path)


def write_estimates_csv(rows, path):
    return write_rows_csv(rows, path, ESTIMATE_COLUMNS)


def read_rows_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))

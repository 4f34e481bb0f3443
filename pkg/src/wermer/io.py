"""Config parsing, schedule export, CSV point clouds, reports and run manifests.

Floats are written with ``repr`` so every value round-trips exactly, and
every file is written to a temporary sibling first and then renamed into
place, so readers never see a partial file.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io as _stdio
import json
import math
import os
import tempfile
import time
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import __version__
from .schedule import ConstructionParams, ConstructionSchedule


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _encode(obj: Any) -> Any:
    """Make values JSON-safe: complex -> [re, im], non-finite floats -> strings."""
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_encode(obj.real), _encode(obj.imag)]
    if isinstance(obj, np.ndarray):
        return [_encode(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_encode(v) for v in items]
    if dataclasses.is_dataclass(obj):
        return {f.name: _encode(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj: Any) -> str:
    # json writes floats with repr, which round-trips exactly
    return json.dumps(_encode(obj), indent=2, sort_keys=True) + "\n"


def _decode_float(v: Any) -> float:
    return float(v)  # float() also parses the "inf"/"nan" strings written by dumps


def _decode_complex(v: Any) -> complex:
    return complex(_decode_float(v[0]), _decode_float(v[1]))


# -- config and schedule --------------------------------------------------


def load_params(path: str | os.PathLike) -> ConstructionParams:
    """Read a JSON config whose keys mirror :class:`ConstructionParams`."""
    data = json.loads(Path(path).read_text())
    known = {f.name for f in dataclasses.fields(ConstructionParams)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ConstructionParams(**data)


def schedule_record(s: ConstructionSchedule) -> dict:
    return {
        "params": dataclasses.asdict(s.params),
        "a": list(s.a),
        "directions": list(s.directions),
        "indices": list(s.indices),
        "eps": list(s.eps),
        "rho": list(s.rho),
        "delta": list(s.delta),
        "notes": list(s.notes),
    }


def schedule_to_json(s: ConstructionSchedule) -> str:
    return dumps(schedule_record(s))


def schedule_from_json(text: str) -> ConstructionSchedule:
    data = json.loads(text)
    return ConstructionSchedule(
        params=ConstructionParams(**data["params"]),
        a=tuple(_decode_complex(v) for v in data["a"]),
        directions=tuple(int(p) for p in data["directions"]),
        indices=tuple(int(k) for k in data["indices"]),
        eps=tuple(_decode_float(v) for v in data["eps"]),
        rho=tuple(_decode_float(v) for v in data["rho"]),
        delta=tuple(_decode_float(v) for v in data["delta"]),
        notes=tuple(data.get("notes", ())),
    )


def digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def schedule_digest(s: ConstructionSchedule) -> str:
    return digest(schedule_to_json(s))


# -- point clouds -----------------------------------------------------------


def cloud_csv(z: np.ndarray, w: np.ndarray, depth: int) -> str:
    """CSV with columns Re z_1..Re z_{n-1}, Im z_1..Im z_{n-1}, Re w, Im w, depth."""
    z = np.asarray(z, dtype=complex).reshape(len(w), -1)
    m = z.shape[1]
    buf = _stdio.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow([f"re_z{k}" for k in range(1, m + 1)] + [f"im_z{k}" for k in range(1, m + 1)] + ["re_w", "im_w", "depth"])
    for zi, wi in zip(z, np.asarray(w, dtype=complex)):
        wr.writerow([repr(float(v)) for v in zi.real] + [repr(float(v)) for v in zi.imag] + [repr(float(wi.real)), repr(float(wi.imag)), depth])
    return buf.getvalue()


def read_cloud_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = list(csv.reader(_stdio.StringIO(text)))
    header, body = rows[0], rows[1:]
    m = sum(1 for h in header if h.startswith("re_z"))
    arr = np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))
    z = arr[:, :m] + 1j * arr[:, m : 2 * m]
    w = arr[:, 2 * m] + 1j * arr[:, 2 * m + 1]
    return z, w, arr[:, -1].astype(int)


def polylines_csv(curves: Iterable[tuple[int, complex, np.ndarray]]) -> str:
    """CSV rows (curve id, Re c, Im c, point coordinates...) for exported level curves."""
    buf = _stdio.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    header_written = False
    for cid, c, pts in curves:
        pts = np.asarray(pts, dtype=complex)
        n = pts.shape[1]
        if not header_written:
            cols = [f"re_x{k}" for k in range(1, n + 1)] + [f"im_x{k}" for k in range(1, n + 1)]
            wr.writerow(["curve", "re_c", "im_c", *cols])
            header_written = True
        for p in pts:
            wr.writerow([cid, repr(float(c.real)), repr(float(c.imag))] + [repr(float(v)) for v in p.real] + [repr(float(v)) for v in p.imag])
    return buf.getvalue()


# -- manifests ----------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class RunManifest:
    command_line: list[str]
    config_digest: str
    schedule_digest: str
    seeds: dict
    tool_version: str
    wall_time: float
    outputs: dict  # file name -> sha256


def write_outputs(
    files: dict[str, str],
    argv: list[str],
    config: dict,
    schedule: ConstructionSchedule | None,
    seeds: dict,
    started: float,
) -> RunManifest:
    """Write every data file atomically, then a ``<file>.manifest.json`` sidecar for each."""
    for path, text in files.items():
        atomic_write_text(path, text)
    manifest = RunManifest(
        command_line=list(argv),
        config_digest=digest(dumps(config)),
        schedule_digest=schedule_digest(schedule) if schedule is not None else "",
        seeds=seeds,
        tool_version=__version__,
        wall_time=time.perf_counter() - started,
        outputs={Path(p).name: digest(t) for p, t in files.items()},
    )
    for path in files:
        atomic_write_text(f"{path}.manifest.json", dumps(manifest))
    return manifest


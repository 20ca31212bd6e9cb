"""Readers and writers for the on-disk artifacts (see FORMATS.md)."""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .evolution import CoveringWave
from .geometry import GridSpec

MAGIC = b"CWAVE01\0"
# magic, n_r, n_theta, fiber_dim, time; zero padding up to 64 bytes
DESCRIPTOR = struct.Struct("<8sQQQd")
DESCRIPTOR_SIZE = 64


def fmt(x: float) -> str:
    return f"{x:.17g}"


def wave_csv_text(psi: CoveringWave, factor: str = "") -> str:
    grid = psi.grid
    rr, tt = grid.mesh()
    f = psi.values.shape[-1]
    cols = ["r", "theta", "re", "im"] + (["re2", "im2"] if f == 2 else [])
    out = io.StringIO()
    out.write(f"# time={fmt(psi.time)}; norm={fmt(psi.norm())}; kind={psi.geometry.kind.value}; factor={factor}\n")
    out.write(",".join(cols) + "\n")
    vals = psi.values.reshape(-1, f)
    for r, t, v in zip(rr.reshape(-1), tt.reshape(-1), vals):
        parts = [fmt(r), fmt(t)]
        for c in v:
            parts += [fmt(c.real), fmt(c.imag)]
        out.write(",".join(parts) + "\n")
    return out.getvalue()


def write_wave_csv(path: str | Path, psi: CoveringWave, factor: str = "") -> None:
    Path(path).write_text(wave_csv_text(psi, factor))


def read_wave_csv(path: str | Path) -> tuple[dict, np.ndarray, np.ndarray]:
    """(header fields, coordinates (n, 2), values (n, fiber)) from a snapshot CSV."""
    lines = Path(path).read_text().splitlines()
    header = dict(item.split("=", 1) for item in lines[0].lstrip("# ").split("; "))
    data = np.loadtxt(lines[2:], delimiter=",", ndmin=2)
    coords = data[:, :2]
    values = data[:, 2::2] + 1j * data[:, 3::2]
    return header, coords, values


def write_checkpoint(path: str | Path, psi: CoveringWave) -> None:
    shape = psi.grid.shape
    n_r, n_theta = (1, shape[0]) if len(shape) == 1 else shape
    head = DESCRIPTOR.pack(MAGIC, n_r, n_theta, psi.values.shape[-1], float(psi.time))
    head += b"\0" * (DESCRIPTOR_SIZE - len(head))
    body = np.ascontiguousarray(psi.values).astype("<c16").tobytes()
    Path(path).write_bytes(head + body)


def read_checkpoint(path: str | Path) -> tuple[dict, np.ndarray]:
    """(descriptor, values of shape (n_r, n_theta, fiber))."""
    raw = Path(path).read_bytes()
    magic, n_r, n_theta, fiber, time = DESCRIPTOR.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    values = np.frombuffer(raw, dtype="<c16", offset=DESCRIPTOR_SIZE)
    if values.size != n_r * n_theta * fiber:
        raise ValueError(f"{path}: expected {n_r * n_theta * fiber} values, found {values.size}")
    desc = {"n_r": n_r, "n_theta": n_theta, "fiber_dim": fiber, "time": time}
    return desc, values.reshape(n_r, n_theta, fiber)


def wave_from_checkpoint(path: str | Path, grid: GridSpec, gamma: np.ndarray) -> CoveringWave:
    desc, values = read_checkpoint(path)
    return CoveringWave(grid, values.reshape(grid.shape + (desc["fiber_dim"],)).copy(), gamma, desc["time"])


TRAJECTORY_COLUMNS = ["traj_id", "t", "coord1", "coord2", "winding", "status"]


class TrajectoryWriter:
    """Streams rows of the trajectories CSV; coord2 is empty on the ring."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(TRAJECTORY_COLUMNS)
        self.rows = 0

    def write(self, ids, t: float, positions: np.ndarray, windings: np.ndarray, labels) -> None:
        two = positions.shape[1] == 2
        for i, q, w, s in zip(ids, positions, windings, labels):
            c1, c2 = (fmt(q[0]), fmt(q[1])) if two else (fmt(q[0]), "")
            self._w.writerow([int(i), fmt(t), c1, c2, int(w), s])
        self.rows += len(ids)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trajectories(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_keyvalue(path: str | Path, rows: list[dict]) -> None:
    """One line per check: name=value pass|fail max_residual=... threshold=..."""
    lines = []
    for row in rows:
        verdict = "info" if row["pass"] is None else ("pass" if row["pass"] else "fail")
        line = f"{row['name']}={row['value']} {verdict} max_residual={row['residual']!r} threshold={row['threshold']!r}"
        lines.append(line)
    Path(path).write_text("\n".join(lines) + "\n")


def read_keyvalue(path: str | Path) -> dict[str, dict]:
    out = {}
    for line in Path(path).read_text().splitlines():
        head, verdict, *rest = line.split(" ")
        name, value = head.split("=", 1)
        fields = dict(item.split("=", 1) for item in rest)
        out[name] = {"value": value, "pass": None if verdict == "info" else verdict == "pass", **{k: float(v) for k, v in fields.items()}}
    return out

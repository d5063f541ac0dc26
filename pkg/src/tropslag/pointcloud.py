"""Point clouds and their CSV / binary forms."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError

MAGIC = b"TLPC1"


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (N, dim); complex for clouds in the torus

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def __len__(self):
        return int(self.points.shape[0])

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.points)

    def real_view(self) -> np.ndarray:
        if not self.is_complex:
            return np.asarray(self.points, dtype=float)
        P = self.points
        out = np.empty((P.shape[0], 2 * P.shape[1]))
        out[:, 0::2] = P.real
        out[:, 1::2] = P.imag
        return out


def to_csv(cloud: PointCloud) -> str:
    buf = io.StringIO()
    tag = " complex" if cloud.is_complex else ""
    buf.write(f"# dim={cloud.dim}{tag}\n")
    for row in cloud.real_view():
        buf.write(",".join(format(float(x), ".17g") for x in row))
        buf.write("\n")
    return buf.getvalue()


def from_csv(text: str) -> PointCloud:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# dim="):
        raise SchemaError("point cloud CSV must start with '# dim=n'")
    head = lines[0][len("# dim="):].split()
    dim = int(head[0])
    cplx = len(head) > 1 and head[1] == "complex"
    width = 2 * dim if cplx else dim
    rows = [list(map(float, ln.split(","))) for ln in lines[1:] if ln.strip()]
    arr = np.array(rows, dtype=float).reshape(-1, width)
    if cplx:
        arr = arr[:, 0::2] + 1j * arr[:, 1::2]
    return PointCloud(arr)


def to_binary(cloud: PointCloud) -> bytes:
    """``TLPC1``, flag byte (1 = complex), uint64 rows, uint64 dim,
    then little-endian doubles row-major."""
    R = cloud.real_view()
    head = MAGIC + struct.pack("<BQQ", int(cloud.is_complex), len(cloud), cloud.dim)
    return head + np.ascontiguousarray(R, dtype="<f8").tobytes()


def from_binary(data: bytes) -> PointCloud:
    if data[:5] != MAGIC:
        raise SchemaError("bad magic")
    cplx, n, dim = struct.unpack("<BQQ", data[5:22])
    width = 2 * dim if cplx else dim
    arr = np.frombuffer(data[22:], dtype="<f8").reshape(n, width).astype(float)
    if cplx:
        arr = arr[:, 0::2] + 1j * arr[:, 1::2]
    return PointCloud(arr)

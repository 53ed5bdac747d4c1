"""Point-cloud file formats, normalization, and synthetic desk-scale datasets.

Formats:
  .xyz   ASCII, one point per line as three whitespace-separated decimal
         fields, lines starting with '#' ignored, written at 17 significant
         digits so float64 round-trips exactly.
  .pvpc  little-endian binary: magic b"PVPC", u32 point count, then 3N float32.

Loaders reject NaN/Inf coordinates. Synthetic shapes are uniform surface
samples of simple primitives, deterministic per seed.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = [
    "load_xyz", "save_xyz", "load_pvpc", "save_pvpc", "load_cloud", "save_cloud",
    "load_dir", "normalize", "denormalize", "synth_primitives", "make_partial",
    "partial_pair", "resample_points", "SHAPE_KINDS",
]

PVPC_MAGIC = b"PVPC"


def _reject_nonfinite(pts: np.ndarray, path) -> None:
    if not np.all(np.isfinite(pts)):
        bad = int(np.argwhere(~np.isfinite(pts).all(axis=1))[0, 0])
        raise DataError(f"{path}: non-finite coordinate at point {bad}")


def load_xyz(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    pts = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            fields = s.split()
            if len(fields) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(fields)}")
            try:
                pts.append([float(f) for f in fields])
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparseable coordinate")
    if not pts:
        raise DataError(f"{path}: no points")
    out = np.asarray(pts, dtype=np.float64)
    _reject_nonfinite(out, path)
    return out


def save_xyz(path, pc: np.ndarray, comment: str | None = None) -> None:
    pc = np.asarray(pc, dtype=np.float64)
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for p in pc:
            fh.write("%.17g %.17g %.17g\n" % (p[0], p[1], p[2]))


def load_pvpc(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    blob = path.read_bytes()
    if len(blob) < 8 or blob[:4] != PVPC_MAGIC:
        raise DataError(f"{path}: not a PVPC file")
    (n,) = struct.unpack("<I", blob[4:8])
    need = 8 + 12 * n
    if len(blob) != need:
        raise DataError(f"{path}: expected {need} bytes for {n} points, got {len(blob)}")
    pts = np.frombuffer(blob, dtype="<f4", offset=8).reshape(n, 3).astype(np.float64)
    _reject_nonfinite(pts, path)
    return pts


def save_pvpc(path, pc: np.ndarray) -> None:
    pc = np.asarray(pc, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(PVPC_MAGIC)
        fh.write(struct.pack("<I", pc.shape[0]))
        fh.write(pc.astype("<f4").tobytes())


def load_cloud(path) -> np.ndarray:
    """Dispatch on extension: .xyz text, .pvpc binary."""
    p = Path(path)
    if p.suffix == ".pvpc":
        return load_pvpc(p)
    return load_xyz(p)


def save_cloud(path, pc: np.ndarray) -> None:
    p = Path(path)
    if p.suffix == ".pvpc":
        save_pvpc(p, pc)
    else:
        save_xyz(p, pc)


def load_dir(path) -> list[np.ndarray]:
    """All .xyz/.pvpc clouds in a directory, sorted by filename."""
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"no such directory: {path}")
    files = sorted(p for p in path.iterdir() if p.suffix in (".xyz", ".pvpc"))
    if not files:
        raise DataError(f"{path}: no .xyz or .pvpc files")
    return [load_cloud(p) for p in files]


def normalize(pc: np.ndarray):
    """Center on the centroid and divide by the max point radius.

    Returns (pc', record); denormalize(pc', record) restores the input to
    1e-12. Zero-radius (single repeated point) clouds use scale 1.
    """
    pc = np.asarray(pc, dtype=np.float64)
    if pc.shape[0] < 1:
        raise ValueError("empty cloud")
    centroid = pc.mean(axis=0)
    shifted = pc - centroid
    radius = float(np.linalg.norm(shifted, axis=1).max())
    scale = radius if radius > 0.0 else 1.0
    return shifted / scale, {"centroid": centroid, "scale": scale}


def denormalize(pc: np.ndarray, record: dict) -> np.ndarray:
    return np.asarray(pc, dtype=np.float64) * record["scale"] + record["centroid"]


SHAPE_KINDS = ("sphere", "cube", "cylinder", "torus")


def synth_primitives(kind: str, n: int, seed: int) -> np.ndarray:
    """Uniform surface samples of a unit-scale primitive.

    sphere:   radius 1.
    cube:     surface of [-1, 1]^3 (face picked uniformly, then a uniform
              point on it), so every point has some coordinate at exactly +-1.
    cylinder: radius 1, z in [-1, 1], caps included, area-weighted.
    torus:    major radius 1, minor radius 0.4, rejection-sampled so the
              density is uniform over the surface.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if kind == "sphere":
        v = rng.standard_normal((n, 3))
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        # Degenerate zero-norm draws are essentially impossible; guard anyway.
        norms[norms == 0.0] = 1.0
        return v / norms
    if kind == "cube":
        face = rng.integers(0, 6, size=n)
        uv = rng.uniform(-1.0, 1.0, size=(n, 2))
        pts = np.empty((n, 3))
        axis = face % 3
        sign = np.where(face < 3, 1.0, -1.0)
        for i in range(n):
            others = [a for a in range(3) if a != axis[i]]
            pts[i, axis[i]] = sign[i]
            pts[i, others[0]] = uv[i, 0]
            pts[i, others[1]] = uv[i, 1]
        return pts
    if kind == "cylinder":
        # Areas: side 4*pi, each cap pi.
        u = rng.uniform(0.0, 6.0, size=n)  # area/pi accumulated: side occupies [0,4)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        h = rng.uniform(-1.0, 1.0, size=n)
        r = np.sqrt(rng.uniform(0.0, 1.0, size=n))
        pts = np.empty((n, 3))
        side = u < 4.0
        pts[side, 0] = np.cos(theta[side])
        pts[side, 1] = np.sin(theta[side])
        pts[side, 2] = h[side]
        cap = ~side
        pts[cap, 0] = r[cap] * np.cos(theta[cap])
        pts[cap, 1] = r[cap] * np.sin(theta[cap])
        pts[cap, 2] = np.where(u[cap] < 5.0, 1.0, -1.0)
        return pts
    if kind == "torus":
        major, minor = 1.0, 0.4
        pts = np.empty((n, 3))
        got = 0
        while got < n:
            m = max(n - got, 64)
            theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
            phi = rng.uniform(0.0, 2.0 * np.pi, size=m)
            keep = rng.uniform(0.0, 1.0, size=m) < (major + minor * np.cos(phi)) / (major + minor)
            theta, phi = theta[keep], phi[keep]
            take = min(n - got, theta.size)
            ring = major + minor * np.cos(phi[:take])
            pts[got:got + take, 0] = ring * np.cos(theta[:take])
            pts[got:got + take, 1] = ring * np.sin(theta[:take])
            pts[got:got + take, 2] = minor * np.sin(phi[:take])
            got += take
        return pts
    raise ValueError(f"unknown shape kind {kind!r}, expected one of {SHAPE_KINDS}")


def partial_pair(pc: np.ndarray, plane_normal, keep_fraction: float):
    """Arrange a cloud as (kept block, free block) for completion work.

    Keeps the keep_fraction of points with the largest projection onto the
    normal (a single-view half-space crop). Returns (arranged cloud, M) where
    rows [0, M) are the kept points; relative order inside each block is the
    original point order.
    """
    pc = np.asarray(pc, dtype=np.float64)
    n = pc.shape[0]
    if not (0.0 < keep_fraction < 1.0):
        raise ValueError(f"keep_fraction must lie in (0, 1), got {keep_fraction}")
    normal = np.asarray(plane_normal, dtype=np.float64).reshape(3)
    proj = pc @ normal
    m = int(round(keep_fraction * n))
    m = min(max(m, 1), n - 1)
    order = np.argsort(-proj, kind="stable")
    kept = np.sort(order[:m])
    dropped = np.sort(order[m:])
    return np.concatenate([pc[kept], pc[dropped]], axis=0), m


def make_partial(pc: np.ndarray, plane_normal, keep_fraction: float):
    """Half-space crop producing a CompletionTask (kept points fixed, the rest
    to be synthesized)."""
    from .completion import CompletionTask

    arranged, m = partial_pair(pc, plane_normal, keep_fraction)
    return CompletionTask(z0=arranged[:m], n_free=arranged.shape[0] - m)


def resample_points(pc: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Uniform subsample without replacement (n must not exceed the size)."""
    pc = np.asarray(pc, dtype=np.float64)
    if n > pc.shape[0]:
        raise ValueError(f"cannot take {n} of {pc.shape[0]} points without replacement")
    rng = np.random.default_rng(seed)
    idx = rng.choice(pc.shape[0], size=n, replace=False)
    return pc[np.sort(idx)]

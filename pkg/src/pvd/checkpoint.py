"""Versioned binary checkpoint container.

Layout (all integers little-endian):

    bytes 0..3    magic b"PVCK"
    bytes 4..7    u32 format version (currently 1)
    bytes 8..11   u32 header length H
    bytes 12..    header: canonical JSON (sorted keys, no whitespace), utf-8
    ...           payload: named tensor bytes back to back
    last 4        u32 CRC-32 of everything before it (magic through payload)

The header carries the architecture descriptor, schedule metadata, the
training step counter, and a tensor manifest [{name, dtype, shape, offset,
nbytes}] with offsets into the payload. Model parameters are stored float32;
the exact float64 beta array is stored as tensor "schedule.beta" so the
schedule reconstructs bit-exactly. Writes are atomic (temp file + rename),
and save -> load -> save reproduces the file byte for byte.

Loading rejects: bad magic, truncation or length mismatch, CRC mismatch
(CheckpointError), and any format version above 1 (CheckpointVersionError).
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import CheckpointError, CheckpointVersionError
from .schedule import NoiseSchedule

__all__ = ["Checkpoint", "save_checkpoint", "load_checkpoint", "restore_model"]

MAGIC = b"PVCK"
FORMAT_VERSION = 1
_DTYPES = {"f4": "<f4", "f8": "<f8"}


@dataclass
class Checkpoint:
    arch: dict
    params: dict  # name -> numpy array (float32)
    sched: NoiseSchedule
    step: int


def _named_param_arrays(model) -> dict:
    return {name: p.detach().cpu().float().numpy()
            for name, p in model.named_parameters()}


def save_checkpoint(path, model_or_params, sched: NoiseSchedule, step: int,
                    arch: dict | None = None) -> None:
    """Write a checkpoint. Accepts a PVDenoiser (arch taken from it) or a
    {name: array} dict plus an explicit arch descriptor."""
    if hasattr(model_or_params, "named_parameters"):
        params = _named_param_arrays(model_or_params)
        arch = model_or_params.arch
    else:
        params = {k: np.asarray(v, dtype=np.float32) for k, v in model_or_params.items()}
        if arch is None:
            raise ValueError("arch descriptor required when saving a raw parameter dict")

    tensors = []
    blobs = []
    offset = 0
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype="<f4")
        raw = arr.tobytes()
        tensors.append({"name": name, "dtype": "f4", "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    beta = np.ascontiguousarray(sched.beta, dtype="<f8")
    raw = beta.tobytes()
    tensors.append({"name": "schedule.beta", "dtype": "f8", "shape": list(beta.shape),
                    "offset": offset, "nbytes": len(raw)})
    blobs.append(raw)
    offset += len(raw)

    header = {
        "arch": arch,
        "schedule": {"kind": sched.kind, "params": sched.params},
        "step": int(step),
        "tensors": tensors,
        "payload_nbytes": offset,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = MAGIC + struct.pack("<II", FORMAT_VERSION, len(hbytes)) + hbytes + b"".join(blobs)
    body += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(body)
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no such checkpoint: {path}")
    blob = path.read_bytes()
    if len(blob) < 16:
        raise CheckpointError(f"{path}: truncated (only {len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    version, hlen = struct.unpack("<II", blob[4:12])
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version} not supported (this build reads "
            f"version {FORMAT_VERSION})")
    if 12 + hlen + 4 > len(blob):
        raise CheckpointError(f"{path}: truncated header")
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError(f"{path}: CRC mismatch, file is corrupt")
    try:
        header = json.loads(blob[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable header ({e})")
    payload = blob[12 + hlen:-4]
    if len(payload) != header.get("payload_nbytes", -1):
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, header says "
            f"{header.get('payload_nbytes')}")

    arrays = {}
    for entry in header["tensors"]:
        dt = _DTYPES.get(entry["dtype"])
        if dt is None:
            raise CheckpointError(f"{path}: unknown tensor dtype {entry['dtype']!r}")
        lo, n = entry["offset"], entry["nbytes"]
        if lo < 0 or lo + n > len(payload):
            raise CheckpointError(f"{path}: tensor {entry['name']!r} out of bounds")
        arr = np.frombuffer(payload[lo:lo + n], dtype=dt).reshape(entry["shape"])
        arrays[entry["name"]] = arr.copy()

    if "schedule.beta" not in arrays:
        raise CheckpointError(f"{path}: missing schedule.beta tensor")
    smeta = header.get("schedule", {})
    sched = NoiseSchedule(arrays.pop("schedule.beta"),
                          kind=smeta.get("kind", "custom"),
                          params=smeta.get("params"))
    return Checkpoint(arch=header["arch"],
                      params={k: v.astype(np.float32) for k, v in arrays.items()},
                      sched=sched, step=int(header["step"]))


def restore_model(ckpt: Checkpoint):
    """Build a PVDenoiser from a loaded checkpoint (float32, eval mode)."""
    from .pvnet import PVDenoiser

    model = PVDenoiser(ckpt.arch)
    names = {name for name, _ in model.named_parameters()}
    missing = names - set(ckpt.params)
    extra = set(ckpt.params) - names
    if missing or extra:
        raise CheckpointError(
            f"parameter names do not match the architecture descriptor "
            f"(missing {sorted(missing)[:3]}, unexpected {sorted(extra)[:3]})")
    with torch.no_grad():
        for name, p in model.named_parameters():
            arr = ckpt.params[name]
            if tuple(arr.shape) != tuple(p.shape):
                raise CheckpointError(
                    f"tensor {name!r} has shape {arr.shape}, expected {tuple(p.shape)}")
            p.copy_(torch.from_numpy(arr))
    model.eval()
    return model

"""Binary vector/matrix files and the run manifest.

Golden-vector format: one ASCII header line, then little-endian interleaved
re/im pairs. 16-bit payloads for Q16 (raw Q1.15 int16) and F16 (binary16),
64-bit floats for REF64. Matrices carry a rows=/cols= header instead of n=.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .numerics import Mode, Q15_ONE, q15_array_from_complex

_MAGIC = "puschrx-golden"


def _payload(x: np.ndarray, mode: Mode) -> bytes:
    flat = np.asarray(x, dtype=np.complex128).ravel()
    if mode is Mode.Q16:
        re, im = q15_array_from_complex(flat)
        inter = np.empty(2 * flat.size, dtype="<i2")
        inter[0::2] = re.astype("<i2")
        inter[1::2] = im.astype("<i2")
        return inter.tobytes()
    if mode in (Mode.F16, Mode.CF16):
        inter = np.empty(2 * flat.size, dtype="<f2")
        inter[0::2] = flat.real.astype("<f2")
        inter[1::2] = flat.imag.astype("<f2")
        return inter.tobytes()
    inter = np.empty(2 * flat.size, dtype="<f8")
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    return inter.tobytes()


def _decode(buf: bytes, count: int, mode: Mode) -> np.ndarray:
    if mode is Mode.Q16:
        inter = np.frombuffer(buf, dtype="<i2", count=2 * count).astype(np.float64)
        return (inter[0::2] + 1j * inter[1::2]) / Q15_ONE
    if mode in (Mode.F16, Mode.CF16):
        inter = np.frombuffer(buf, dtype="<f2", count=2 * count).astype(np.float64)
    else:
        inter = np.frombuffer(buf, dtype="<f8", count=2 * count)
    return inter[0::2] + 1j * inter[1::2]


def write_vector(path, x: np.ndarray, mode: Mode, seed: int) -> None:
    x = np.asarray(x)
    header = f"{_MAGIC} n={x.size} mode={mode.value} seed={seed}\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(_payload(x, mode))


def write_matrix(path, m: np.ndarray, mode: Mode, seed: int) -> None:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"matrix file needs a 2-D array, got shape {m.shape}")
    header = (f"{_MAGIC} rows={m.shape[0]} cols={m.shape[1]} "
              f"mode={mode.value} seed={seed}\n")
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(_payload(m, mode))


def _read(path) -> tuple[dict, bytes]:
    with open(path, "rb") as f:
        header = f.readline().decode("ascii").strip()
        buf = f.read()
    fields = header.split()
    if not fields or fields[0] != _MAGIC:
        raise ValueError(f"{path}: not a golden-vector file")
    meta = dict(kv.split("=", 1) for kv in fields[1:])
    return meta, buf


def read_vector(path) -> tuple[np.ndarray, Mode, int]:
    meta, buf = _read(path)
    n = int(meta["n"])
    mode = Mode.parse(meta["mode"])
    return _decode(buf, n, mode), mode, int(meta["seed"])


def read_matrix(path) -> tuple[np.ndarray, Mode, int]:
    meta, buf = _read(path)
    rows, cols = int(meta["rows"]), int(meta["cols"])
    mode = Mode.parse(meta["mode"])
    return _decode(buf, rows * cols, mode).reshape(rows, cols), mode, int(meta["seed"])


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    """Provenance record written next to every set of output files."""

    command: str
    config_path: str | None
    seed: int
    out_dir: str
    tool_version: str
    content_hash: str
    rng: str = "philox (numpy Philox4x32-64, per-trial SeedSequence streams)"
    outputs: dict = field(default_factory=dict)

    def register(self, path) -> None:
        with open(path, "rb") as f:
            digest = hashlib.sha256(f.read()).hexdigest()
        self.outputs[os.path.basename(str(path))] = digest

    def write(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.__dict__, f, indent=2, sort_keys=True)
            f.write("\n")


def content_hash(parts: list[bytes | str]) -> str:
    """Git-style content hash over the inputs that determine a run."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, str):
            p = p.encode("utf-8")
        h.update(len(p).to_bytes(8, "little"))
        h.update(p)
    return h.hexdigest()


def manifest_trailer(manifest_name: str, digest: str) -> str:
    """Comment line appended to delimited outputs, tying them to a manifest."""
    return f"# manifest: {manifest_name} run={digest[:12]}\n"

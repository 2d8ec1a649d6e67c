"""Beamforming as a blocked complex matmul C = A x B.

A is the known N_B x N_RX coefficient matrix, B the antenna-by-subcarrier
grid slice. Accumulation over the inner dimension is wide and always runs
j ascending, in every mode and for every tile window, so the result is
bit-identical across windows and worker counts; windows and the coefficient
replica count affect only cost accounting and the partition planner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    Mode,
    NumericStats,
    c64,
    cmac_f16_batch,
    f16_array,
    narrow_f16_batch,
    narrow_q16_batch,
    q15_array_from_complex,
    q15_array_to_complex,
    wrap_i32,
)
from . import workers

REGISTER_BUDGET = 31          # usable integer/float registers (x0 excluded)
Q16_BF_SHIFT = 15             # per-MAC normalization, pure Q1.15 products


@dataclass(frozen=True)
class TileWindow:
    """Output tile computed per inner-loop iteration (register blocking)."""

    rows: int
    cols: int

    def registers(self, mode: Mode) -> int:
        # Fused complex ops keep one register per complex value; the other
        # modes need separate re/im registers for accumulators and inputs.
        if mode is Mode.CF16:
            return self.rows * self.cols + self.rows + self.cols
        return 2 * self.rows * self.cols + 2 * (self.rows + self.cols)

    def validate(self, mode: Mode) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"degenerate tile window {self.rows}x{self.cols}")
        need = self.registers(mode)
        if need > REGISTER_BUDGET:
            raise ValueError(
                f"window {self.rows}x{self.cols} needs {need} registers in mode "
                f"{mode.value}, budget is {REGISTER_BUDGET}")


def default_window(mode: Mode) -> TileWindow:
    return TileWindow(4, 4) if mode is Mode.CF16 else TileWindow(2, 4)


@dataclass(frozen=True)
class BeamformerCoeffs:
    """Coefficient matrix with its replica count (value-identical copies)."""

    a: np.ndarray              # N_B x N_RX, complex
    replicas: int = 1

    def __post_init__(self):
        a = np.asarray(self.a)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"coefficient matrix must be 2-D, got {a.shape}")
        if self.replicas < 1:
            raise ValueError(f"replica count must be >= 1, got {self.replicas}")
        object.__setattr__(self, "a", a.astype(np.complex128))

    @property
    def n_b(self) -> int:
        return self.a.shape[0]

    @property
    def n_rx(self) -> int:
        return self.a.shape[1]


def _beamform_q16(a: np.ndarray, b: np.ndarray, shift: int,
                  stats: NumericStats | None) -> np.ndarray:
    ar, ai = q15_array_from_complex(a)
    br, bi = q15_array_from_complex(b)
    n_b, n_rx = ar.shape
    n_sc = br.shape[1]
    acc_re = np.zeros((n_b, n_sc), dtype=np.int64)
    acc_im = np.zeros((n_b, n_sc), dtype=np.int64)
    for j in range(n_rx):
        pr = wrap_i32(ar[:, j, None] * br[None, j, :] - ai[:, j, None] * bi[None, j, :])
        pi = wrap_i32(ar[:, j, None] * bi[None, j, :] + ai[:, j, None] * br[None, j, :])
        acc_re = wrap_i32(acc_re + (pr >> shift))
        acc_im = wrap_i32(acc_im + (pi >> shift))
    out_re, out_im = narrow_q16_batch(acc_re, acc_im, 0, stats)
    return q15_array_to_complex(out_re, out_im)


def _beamform_float(a: np.ndarray, b: np.ndarray, mode: Mode,
                    stats: NumericStats | None) -> np.ndarray:
    if mode is Mode.REF64:
        aw = a.astype(np.complex128)
        bw = b.astype(np.complex128)
        acc = np.zeros((aw.shape[0], bw.shape[1]), dtype=np.complex128)
        for j in range(aw.shape[1]):
            acc = acc + aw[:, j, None] * bw[None, j, :]
        return acc
    aw = f16_array(a)
    bw = f16_array(b)
    acc = np.zeros((aw.shape[0], bw.shape[1]), dtype=np.complex64)
    for j in range(aw.shape[1]):
        acc = cmac_f16_batch(acc, aw[:, j, None], bw[None, j, :])
    if mode is Mode.CF16 and stats is not None:
        stats.fused_ops += aw.shape[0] * aw.shape[1] * bw.shape[1]
    return narrow_f16_batch(acc, stats).astype(np.complex128)


def beamform(coeffs: BeamformerCoeffs, b: np.ndarray, mode: Mode,
             window: TileWindow | None = None,
             shift: int = Q16_BF_SHIFT,
             stats: NumericStats | None = None,
             n_workers: int | None = None) -> np.ndarray:
    """C[i][k] = sum_j A[i][j] B[j][k], wide accumulation, one narrow per
    output element. Columns (subcarriers) may be split across workers."""
    window = window or default_window(mode)
    window.validate(mode)
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim != 2 or b.shape[0] != coeffs.n_rx:
        raise ValueError(
            f"antenna grid must be {coeffs.n_rx} x N_SC, got {b.shape}")

    def chunk(start, stop):
        cols = b[:, start:stop]
        if mode is Mode.Q16:
            return _beamform_q16(coeffs.a, cols, shift, stats)
        return _beamform_float(coeffs.a, cols, mode, stats)

    parts = workers.run_chunked(chunk, b.shape[1], n_workers)
    return np.concatenate(parts, axis=1)


def op_count(dims: tuple[int, int, int], window: TileWindow | None,
             mode: Mode) -> dict:
    """Analytic MAC/fused-op/load counts for the cost model.

    One complex MAC is 4 real MACs; CF16 covers those with one fused op.
    Loads count complex words fetched per tile pass: each inner step loads
    `rows` elements of A and `cols` elements of B.
    """
    n_b, n_rx, n_sc = dims
    if min(dims) < 1:
        raise ValueError(f"bad dims {dims}")
    window = window or default_window(mode)
    window.validate(mode)
    macs = 4 * n_b * n_rx * n_sc
    fused = macs // 4 if mode is Mode.CF16 else 0
    tiles = -(-n_b // window.rows) * -(-n_sc // window.cols)
    loads = tiles * n_rx * (window.rows + window.cols)
    return {"macs": macs, "fused_ops": fused, "loads": loads}

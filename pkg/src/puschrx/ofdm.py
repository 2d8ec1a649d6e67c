"""Radix-4 decimation-in-frequency FFT for OFDM demodulation.

The transform runs in radix-4 stages (one trailing radix-2 stage when
log2(n) is odd) and ends with a digit-reversal gather so outputs are in
natural order. Twiddle factors are precomputed once per plan in the
active mode.

Mode arithmetic:

* REF64 -- complex128 throughout, unscaled DFT.
* F16   -- butterflies in binary32 on binary16 values; every stage output
           is rounded back to the binary16 grid (16-bit stage storage).
* Q16   -- Q1.15 integers; butterfly outputs are shifted right by 2 bits
           per radix-4 stage (1 bit for the radix-2 stage), so the final
           output is DFT/n and no saturation can occur for |re|,|im|<=0.99.
           Twiddle products use the per-MAC shift-by-15 semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    Mode,
    Q15_MAX,
    Q15_MIN,
    Q15_ONE,
    c64,
    narrow_f16_batch,
    q15_array_from_complex,
    q15_array_to_complex,
    wrap_i32,
)

_MJ32 = np.complex64(-1j)
_PJ32 = np.complex64(1j)


@dataclass(frozen=True)
class FftStage:
    radix: int
    block_len: int          # butterfly span at this stage
    q16_shift: int          # right shift applied to butterfly outputs (Q16)


@dataclass(frozen=True)
class FftPlan:
    n: int
    mode: Mode
    stages: tuple[FftStage, ...]
    # twiddles[s] = per-slot factor arrays for stage s; None for radix-2
    twiddles: tuple
    perm: np.ndarray        # output index -> storage position after stages
    inv_perm: np.ndarray    # storage position -> output index

    @property
    def radices(self) -> tuple[int, ...]:
        return tuple(s.radix for s in self.stages)

    @property
    def stage_count(self) -> int:
        return len(self.stages)


def _digit_reversal(radices: tuple[int, ...], n: int) -> tuple[np.ndarray, np.ndarray]:
    """Mixed-radix digit reversal for the DIF slot ordering.

    Stage i writes its slot digit q_i at storage stride n/prod(r_1..r_i),
    while q_i is the output index digit of weight prod(r_1..r_{i-1}).
    """
    strides = []
    weights = []
    stride = n
    weight = 1
    for r in radices:
        stride //= r
        strides.append(stride)
        weights.append(weight)
        weight *= r
    storage_to_output = np.zeros(n, dtype=np.int64)
    for p in range(n):
        rem = p
        k = 0
        for stride, r, w in zip(strides, radices, weights):
            digit = rem // stride
            rem -= digit * stride
            k += digit * w
        storage_to_output[p] = k
    output_to_storage = np.argsort(storage_to_output)
    return output_to_storage, storage_to_output


def _quantize_twiddle_q15(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    re = np.clip(np.rint(w.real * Q15_ONE), Q15_MIN, Q15_MAX).astype(np.int64)
    im = np.clip(np.rint(w.imag * Q15_ONE), Q15_MIN, Q15_MAX).astype(np.int64)
    return re, im


def make_plan(n: int, mode: Mode) -> FftPlan:
    """Build the stage sequence, twiddle tables and output permutation."""
    if n < 16 or n & (n - 1):
        raise ValueError(f"FFT length must be a power of two >= 16, got {n}")
    stages = []
    twiddles = []
    length = n
    while length > 1:
        if length % 4 == 0:
            quarter = length // 4
            m = np.arange(quarter)
            base = np.exp(-2j * np.pi * m / length)
            slot_w = [base, base ** 2, base ** 3]
            if mode is Mode.Q16:
                tw = tuple(_quantize_twiddle_q15(w) for w in slot_w)
            elif mode in (Mode.F16, Mode.CF16):
                tw = tuple(c64(w.real.astype(np.float16).astype(np.float32),
                               w.imag.astype(np.float16).astype(np.float32))
                           for w in slot_w)
            else:
                tw = tuple(slot_w)
            stages.append(FftStage(4, length, 2))
            twiddles.append(tw)
            length = quarter
        else:
            # length == 2: the final radix-2 butterfly has unit twiddles
            stages.append(FftStage(2, 2, 1))
            twiddles.append(None)
            length = 1
    radices = tuple(s.radix for s in stages)
    perm, inv_perm = _digit_reversal(radices, n)
    return FftPlan(n, mode, tuple(stages), tuple(twiddles), perm, inv_perm)


# ---------------------------------------------------------------------------
# Stage kernels
# ---------------------------------------------------------------------------

def _stages_float(plan: FftPlan, work: np.ndarray, narrow_each_stage: bool) -> np.ndarray:
    """Shared radix-4/2 pass for REF64 (no narrowing) and F16 (per-stage)."""
    b = work.shape[0]
    for stage, tw in zip(plan.stages, plan.twiddles):
        length = stage.block_len
        if stage.radix == 4:
            quarter = length // 4
            v = work.reshape(b, plan.n // length, 4, quarter)
            a0, a1, a2, a3 = v[:, :, 0, :], v[:, :, 1, :], v[:, :, 2, :], v[:, :, 3, :]
            t0 = a0 + a2
            t1 = a0 - a2
            t2 = a1 + a3
            t3 = a1 - a3
            if work.dtype == np.complex64:
                jt3 = _PJ32 * t3
            else:
                jt3 = 1j * t3
            v[:, :, 0, :] = t0 + t2
            v[:, :, 1, :] = (t1 - jt3) * tw[0]
            v[:, :, 2, :] = (t0 - t2) * tw[1]
            v[:, :, 3, :] = (t1 + jt3) * tw[2]
        else:
            v = work.reshape(b, plan.n // 2, 2)
            a0 = v[:, :, 0].copy()
            a1 = v[:, :, 1]
            v[:, :, 0] = a0 + a1
            v[:, :, 1] = a0 - a1
        if narrow_each_stage:
            work = narrow_f16_batch(work)
    return work


def _stages_q16(plan: FftPlan, re: np.ndarray, im: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Q1.15 pass: integer butterflies, per-stage scaling shift, twiddle
    products with the shift-by-15 MAC normalization."""
    b = re.shape[0]
    for stage, tw in zip(plan.stages, plan.twiddles):
        length = stage.block_len
        if stage.radix == 4:
            quarter = length // 4
            vre = re.reshape(b, plan.n // length, 4, quarter)
            vim = im.reshape(b, plan.n // length, 4, quarter)
            a0r, a1r, a2r, a3r = (vre[:, :, k, :] for k in range(4))
            a0i, a1i, a2i, a3i = (vim[:, :, k, :] for k in range(4))
            t0r, t0i = a0r + a2r, a0i + a2i
            t1r, t1i = a0r - a2r, a0i - a2i
            t2r, t2i = a1r + a3r, a1i + a3i
            t3r, t3i = a1r - a3r, a1i - a3i
            s = stage.q16_shift
            # u0..u3 scaled by 1/4 before the twiddle product
            u0r, u0i = (t0r + t2r) >> s, (t0i + t2i) >> s
            u1r, u1i = (t1r + t3i) >> s, (t1i - t3r) >> s
            u2r, u2i = (t0r - t2r) >> s, (t0i - t2i) >> s
            u3r, u3i = (t1r - t3i) >> s, (t1i + t3r) >> s
            vre[:, :, 0, :], vim[:, :, 0, :] = u0r, u0i
            for slot, (ur, ui) in enumerate(((u1r, u1i), (u2r, u2i), (u3r, u3i)), start=1):
                wr, wi = tw[slot - 1]
                pr = wrap_i32(ur * wr - ui * wi) >> 15
                pi = wrap_i32(ur * wi + ui * wr) >> 15
                vre[:, :, slot, :] = pr
                vim[:, :, slot, :] = pi
        else:
            vre = re.reshape(b, plan.n // 2, 2)
            vim = im.reshape(b, plan.n // 2, 2)
            a0r, a0i = vre[:, :, 0].copy(), vim[:, :, 0].copy()
            a1r, a1i = vre[:, :, 1], vim[:, :, 1]
            s = stage.q16_shift
            vre[:, :, 0], vim[:, :, 0] = (a0r + a1r) >> s, (a0i + a1i) >> s
            vre[:, :, 1], vim[:, :, 1] = (a0r - a1r) >> s, (a0i - a1i) >> s
    return re, im


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def batch_fft(plan: FftPlan, rows: np.ndarray, mode: Mode) -> np.ndarray:
    """Row-wise FFT over an antenna batch (last axis is the transform axis).

    Rows are independent; results are bit-identical to one fft call per row
    for any batching or worker split.
    """
    if mode is not plan.mode:
        raise ValueError(f"plan built for mode {plan.mode}, called with {mode}")
    rows = np.asarray(rows)
    if rows.ndim == 0 or rows.shape[-1] != plan.n:
        raise ValueError(f"rows must have trailing length {plan.n}, got {rows.shape}")
    shape = rows.shape
    flat = rows.reshape(-1, plan.n)

    if mode is Mode.Q16:
        re, im = q15_array_from_complex(flat)
        re, im = _stages_q16(plan, re, im)
        re = re[:, plan.perm]
        im = im[:, plan.perm]
        return q15_array_to_complex(re, im).reshape(shape)

    if mode in (Mode.F16, Mode.CF16):
        work = c64(flat.real.astype(np.float16).astype(np.float32),
                   flat.imag.astype(np.float16).astype(np.float32))
        work = _stages_float(plan, work, narrow_each_stage=True)
        return work[:, plan.perm].astype(np.complex128).reshape(shape)

    work = flat.astype(np.complex128).copy()
    work = _stages_float(plan, work, narrow_each_stage=False)
    return work[:, plan.perm].reshape(shape)


def fft(plan: FftPlan, x: np.ndarray, mode: Mode) -> np.ndarray:
    """Natural-ordered DFT of one vector under the mode's arithmetic."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("fft expects a 1-D sample vector; use batch_fft for batches")
    return batch_fft(plan, x[np.newaxis, :], mode)[0]


def dft_oracle(x: np.ndarray) -> np.ndarray:
    """Direct O(n^2) DFT used as the independent reference."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return x @ w.T


def q16_output_scale(plan: FftPlan) -> float:
    """Total scale the Q16 stage shifts apply to the spectrum (1/n)."""
    return float(2.0 ** -sum(s.q16_shift for s in plan.stages))

"""Arithmetic modes and complex MAC primitives shared by every kernel.

Three 16-bit operand modes are modeled, plus a float64 reference:

* Q16   -- Q1.15 fixed point. A complex MAC computes full-width integer
           products, shifts each two-product sum arithmetically right
           (truncation toward -inf) and accumulates into a wrapping
           32-bit integer pair. Saturation happens only in `narrow`.
* F16   -- binary16 operands with binary32 accumulation. Products are
           exact in binary32 (11-bit significands), so no product is
           rounded before it enters the wide accumulator.
* CF16  -- bit-identical numerics to F16; it differs only in cost
           accounting (one fused op covers the four real MACs).
* REF64 -- complex128 reference arithmetic used by oracles.

Scalar ops work on `ComplexSample`/`WideAccumulator` values. The *_batch
variants apply the same machine semantics to numpy arrays and are what
the kernels use; scalar and batch forms share one code path per mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

Q15_ONE = 1 << 15          # 1.0 in Q1.15, not itself representable
Q15_MAX = Q15_ONE - 1
Q15_MIN = -Q15_ONE
I32_MIN = -(1 << 31)
I32_MAX = (1 << 31) - 1


class Mode(str, Enum):
    Q16 = "q16"
    F16 = "f16"
    CF16 = "cf16"
    REF64 = "ref64"

    @classmethod
    def parse(cls, name: str) -> "Mode":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown arithmetic mode: {name!r}") from None


@dataclass
class NumericStats:
    """Mergeable per-run counters (commutative, safe to sum across workers)."""

    saturations: int = 0
    nonfinite: int = 0
    divisions: int = 0
    sqrts: int = 0
    fused_ops: int = 0

    def merge(self, other: "NumericStats") -> "NumericStats":
        self.saturations += other.saturations
        self.nonfinite += other.nonfinite
        self.divisions += other.divisions
        self.sqrts += other.sqrts
        self.fused_ops += other.fused_ops
        return self


# ---------------------------------------------------------------------------
# Representation helpers
# ---------------------------------------------------------------------------

def q15_from_float(x: float) -> int:
    """Round a real value to the nearest Q1.15 integer, clamping to range."""
    r = int(np.rint(x * Q15_ONE))
    return max(Q15_MIN, min(Q15_MAX, r))


def q15_to_float(raw: int) -> float:
    return raw / Q15_ONE


def f16_quantize(x: float) -> float:
    """Round to nearest binary16 (ties to even) and widen back."""
    with np.errstate(over="ignore"):       # overflow to inf is the contract
        return float(np.float16(x))


def quantize_array(x: np.ndarray, mode: Mode) -> np.ndarray:
    """Project a complex array onto the mode's representable grid.

    Values come back as complex128 whose re/im are exact mode values
    (k/2^15 for Q16, binary16 for F16/CF16, untouched for REF64).
    """
    x = np.asarray(x, dtype=np.complex128)
    if mode is Mode.REF64:
        return x
    if mode is Mode.Q16:
        re = np.clip(np.rint(x.real * Q15_ONE), Q15_MIN, Q15_MAX)
        im = np.clip(np.rint(x.imag * Q15_ONE), Q15_MIN, Q15_MAX)
        return (re + 1j * im) / Q15_ONE
    re = x.real.astype(np.float16).astype(np.float64)
    im = x.imag.astype(np.float16).astype(np.float64)
    return re + 1j * im


def q15_array_from_complex(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quantize complex data to Q1.15 and return raw (re, im) int64 arrays."""
    x = np.asarray(x, dtype=np.complex128)
    re = np.clip(np.rint(x.real * Q15_ONE), Q15_MIN, Q15_MAX).astype(np.int64)
    im = np.clip(np.rint(x.imag * Q15_ONE), Q15_MIN, Q15_MAX).astype(np.int64)
    return re, im


def q15_array_to_complex(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    return (re.astype(np.float64) + 1j * im.astype(np.float64)) / Q15_ONE


def c64(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    """Pack float32 re/im into complex64 without dtype promotion."""
    out = np.empty(np.broadcast(re, im).shape, dtype=np.complex64)
    out.real = re
    out.imag = im
    return out


def f16_array(x: np.ndarray) -> np.ndarray:
    """Quantize re/im to binary16 and store as complex64 (binary32 carrier).

    complex64 arithmetic on these values is binary32 per component, which
    is exactly the widening datapath of the F16/CF16 modes.
    """
    x = np.asarray(x)
    re = x.real.astype(np.float16).astype(np.float32)
    im = x.imag.astype(np.float16).astype(np.float32)
    return c64(re, im)


def wrap_i32(x: np.ndarray | int):
    """Two's-complement wraparound to the 32-bit accumulator width."""
    if isinstance(x, (int, np.integer)):
        return ((int(x) + (1 << 31)) % (1 << 32)) - (1 << 31)
    x = np.asarray(x, dtype=np.int64)
    return ((x + (1 << 31)) & 0xFFFFFFFF) - (1 << 31)


def _sra(x, shift: int):
    """Arithmetic right shift (floor division by 2**shift); works on ints
    and int64 arrays alike."""
    return x >> shift


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexSample:
    """One complex value tagged with its arithmetic mode.

    Q16 stores raw Q1.15 integers in re/im; F16/CF16 store floats that are
    exactly binary16-representable; REF64 stores plain float64.
    """

    re: float | int
    im: float | int
    mode: Mode

    @classmethod
    def from_complex(cls, z: complex, mode: Mode) -> "ComplexSample":
        if mode is Mode.Q16:
            return cls(q15_from_float(z.real), q15_from_float(z.imag), mode)
        if mode in (Mode.F16, Mode.CF16):
            return cls(f16_quantize(z.real), f16_quantize(z.imag), mode)
        return cls(float(z.real), float(z.imag), mode)

    def to_complex(self) -> complex:
        if self.mode is Mode.Q16:
            return complex(self.re / Q15_ONE, self.im / Q15_ONE)
        return complex(self.re, self.im)


@dataclass
class WideAccumulator:
    """32-bit accumulator pair: int32 domain for Q16, binary32 for F16/CF16.

    Never narrows on its own; call `narrow` to get back to 16-bit grid.
    """

    re: float | int = 0
    im: float | int = 0
    mode: Mode = Mode.REF64

    @classmethod
    def zero(cls, mode: Mode) -> "WideAccumulator":
        if mode is Mode.Q16:
            return cls(0, 0, mode)
        return cls(0.0, 0.0, mode)


# ---------------------------------------------------------------------------
# Scalar primitives
# ---------------------------------------------------------------------------

def cmac_q16(acc: WideAccumulator, a: ComplexSample, b: ComplexSample,
             shift: int) -> WideAccumulator:
    """acc += a*b in Q1.15: full-width products, each re/im two-product sum
    arithmetically right-shifted by `shift`, then added with 32-bit wrap."""
    if not 0 <= shift <= 31:
        raise ValueError(f"shift out of range: {shift}")
    prod_re = wrap_i32(a.re * b.re - a.im * b.im)
    prod_im = wrap_i32(a.re * b.im + a.im * b.re)
    re = wrap_i32(acc.re + _sra(prod_re, shift))
    im = wrap_i32(acc.im + _sra(prod_im, shift))
    return WideAccumulator(re, im, Mode.Q16)


def _f16_mac(acc_re: float, acc_im: float, a: ComplexSample,
             b: ComplexSample, stats: NumericStats | None) -> tuple[float, float]:
    # Single shared path for cmac_f16 and cdotp_cf16. Products of binary16
    # values are exact in binary32; each two-product sum and each
    # accumulator add rounds once in binary32.
    vals = (a.re, a.im, b.re, b.im)
    if stats is not None and not all(math.isfinite(v) for v in vals):
        stats.nonfinite += 1
    ar, ai = np.float32(a.re), np.float32(a.im)
    br, bi = np.float32(b.re), np.float32(b.im)
    tre = np.float32(ar * br) - np.float32(ai * bi)
    tim = np.float32(ar * bi) + np.float32(ai * br)
    return float(np.float32(acc_re) + tre), float(np.float32(acc_im) + tim)


def cmac_f16(acc: WideAccumulator, a: ComplexSample, b: ComplexSample,
             stats: NumericStats | None = None) -> WideAccumulator:
    """acc += a*b with binary16 operands widened into binary32 accumulation."""
    re, im = _f16_mac(acc.re, acc.im, a, b, stats)
    return WideAccumulator(re, im, Mode.F16)


def cdotp_cf16(acc: WideAccumulator, a: ComplexSample, b: ComplexSample,
               stats: NumericStats | None = None) -> WideAccumulator:
    """Fused complex dot-product step: numerically identical to cmac_f16,
    accounted as one fused op instead of four real MACs."""
    re, im = _f16_mac(acc.re, acc.im, a, b, stats)
    if stats is not None:
        stats.fused_ops += 1
    return WideAccumulator(re, im, Mode.CF16)


def narrow(acc: WideAccumulator, mode: Mode, shift: int = 0,
           stats: NumericStats | None = None) -> ComplexSample:
    """Close the widening contract: bring a wide accumulator back to 16 bits.

    Q16: optional extra arithmetic right shift, then saturate to Q1.15.
    F16/CF16: round-to-nearest-even to binary16.
    """
    if mode is Mode.Q16:
        re = _sra(int(acc.re), shift)
        im = _sra(int(acc.im), shift)
        sat_re = max(Q15_MIN, min(Q15_MAX, re))
        sat_im = max(Q15_MIN, min(Q15_MAX, im))
        if stats is not None and (sat_re != re or sat_im != im):
            stats.saturations += 1
        return ComplexSample(sat_re, sat_im, Mode.Q16)
    if mode in (Mode.F16, Mode.CF16):
        re = f16_quantize(acc.re)
        im = f16_quantize(acc.im)
        if stats is not None and not (math.isfinite(re) and math.isfinite(im)):
            stats.nonfinite += 1
        return ComplexSample(re, im, mode)
    raise ValueError(f"narrow undefined for mode {mode}")


# ---------------------------------------------------------------------------
# Shared division / square-root unit
# ---------------------------------------------------------------------------
# The divider and square-root unit is the scarce resource of the detection
# chain; callers pass a NumericStats so usage can be asserted. The hardware
# unit is 32-bit; REF64 runs the same entry points at float64 so the
# reference mode keeps oracle-grade precision (counts are identical).

def shared_divide(num: float, den: float, mode: Mode,
                  stats: NumericStats | None = None) -> float:
    if stats is not None:
        stats.divisions += 1
    if mode is Mode.REF64:
        return num / den
    return float(np.float32(num) / np.float32(den))


def shared_cdiv(num: complex, den: float, mode: Mode,
                stats: NumericStats | None = None) -> complex:
    """Complex-by-real quotient, counted as one division op (flop-count
    convention: one logical division per scaled matrix entry)."""
    if stats is not None:
        stats.divisions += 1
    if mode is Mode.REF64:
        return complex(num.real / den, num.imag / den)
    d = np.float32(den)
    return complex(np.float32(num.real) / d, np.float32(num.imag) / d)


def shared_sqrt(x: float, mode: Mode,
                stats: NumericStats | None = None) -> float:
    if stats is not None:
        stats.sqrts += 1
    if x < 0:
        raise ValueError(f"sqrt of negative value: {x}")
    if mode is Mode.REF64:
        return math.sqrt(x)
    return float(np.sqrt(np.float32(x)))


# ---------------------------------------------------------------------------
# Batch forms (same semantics, vectorized)
# ---------------------------------------------------------------------------

def cmac_q16_batch(acc_re: np.ndarray, acc_im: np.ndarray,
                   a_re: np.ndarray, a_im: np.ndarray,
                   b_re: np.ndarray, b_im: np.ndarray,
                   shift: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized cmac_q16 on raw int64 arrays held in the int32 domain."""
    prod_re = wrap_i32(a_re * b_re - a_im * b_im)
    prod_im = wrap_i32(a_re * b_im + a_im * b_re)
    re = wrap_i32(acc_re + _sra(prod_re, shift))
    im = wrap_i32(acc_im + _sra(prod_im, shift))
    return re, im


def cmul_q15(a_re, a_im, b_re, b_im, shift: int = 15):
    """One Q1.15 complex product (the cmac with a zero accumulator)."""
    return cmac_q16_batch(np.int64(0), np.int64(0), a_re, a_im, b_re, b_im, shift)


def cmac_f16_batch(acc: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized widening MAC: complex64 in, complex64 out. The complex64
    product and add are binary32 per component, matching the scalar path."""
    return acc + a * b


def cdotp_cf16_batch(acc: np.ndarray, a: np.ndarray, b: np.ndarray,
                     stats: NumericStats | None = None) -> np.ndarray:
    out = cmac_f16_batch(acc, a, b)
    if stats is not None:
        stats.fused_ops += int(np.broadcast(a, b).size)
    return out


def narrow_f16_batch(acc: np.ndarray, stats: NumericStats | None = None) -> np.ndarray:
    """Round a complex64 wide array to the binary16 grid (stays complex64)."""
    with np.errstate(over="ignore"):       # overflow to inf is the contract
        re = acc.real.astype(np.float16).astype(np.float32)
        im = acc.imag.astype(np.float16).astype(np.float32)
    if stats is not None:
        bad = np.count_nonzero(~np.isfinite(re)) + np.count_nonzero(~np.isfinite(im))
        stats.nonfinite += int(bad)
    return c64(re, im)


def narrow_q16_batch(acc_re: np.ndarray, acc_im: np.ndarray, shift: int = 0,
                     stats: NumericStats | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Saturating right shift from the wide accumulator to Q1.15."""
    re = _sra(acc_re, shift)
    im = _sra(acc_im, shift)
    sre = np.clip(re, Q15_MIN, Q15_MAX)
    sim = np.clip(im, Q15_MIN, Q15_MAX)
    if stats is not None:
        stats.saturations += int(np.count_nonzero(sre != re)
                                 + np.count_nonzero(sim != im))
    return sre, sim

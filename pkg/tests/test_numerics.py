"""Unit tests for the arithmetic-mode primitives."""

import math

import numpy as np
import pytest

from puschrx.numerics import (
    I32_MAX, I32_MIN, Q15_MAX, Q15_MIN, Q15_ONE,
    ComplexSample, Mode, NumericStats, WideAccumulator,
    c64, cdotp_cf16, cdotp_cf16_batch, cmac_f16, cmac_f16_batch,
    cmac_q16, cmac_q16_batch, cmul_q15, f16_array, f16_quantize,
    narrow, narrow_f16_batch, narrow_q16_batch,
    q15_array_from_complex, q15_array_to_complex, q15_from_float,
    q15_to_float, quantize_array, shared_cdiv, shared_divide, shared_sqrt,
    wrap_i32,
)


def test_mode_parse():
    assert Mode.parse("q16") is Mode.Q16
    assert Mode.parse("F16") is Mode.F16
    assert Mode.parse("Cf16") is Mode.CF16
    assert Mode.parse("ref64") is Mode.REF64
    with pytest.raises(ValueError):
        Mode.parse("int8")


def test_stats_merge_sums_every_counter():
    a = NumericStats(1, 2, 3, 4, 5)
    b = NumericStats(10, 20, 30, 40, 50)
    a.merge(b)
    assert (a.saturations, a.nonfinite, a.divisions, a.sqrts, a.fused_ops) \
        == (11, 22, 33, 44, 55)


def test_q15_round_trip_and_clamp():
    assert q15_from_float(0.0) == 0
    assert q15_from_float(1.0) == Q15_MAX          # 1.0 clamps to max code
    assert q15_from_float(-1.0) == Q15_MIN
    assert q15_from_float(-2.0) == Q15_MIN
    # every code survives a float round trip
    codes = np.arange(Q15_MIN, Q15_MAX + 1, 97)
    for c in codes:
        assert q15_from_float(q15_to_float(int(c))) == c


def test_quantize_array_grids():
    rng = np.random.default_rng(1)
    x = (rng.standard_normal(200) + 1j * rng.standard_normal(200)) * 0.4
    q = quantize_array(x, Mode.Q16)
    raw = q.real * Q15_ONE
    assert np.allclose(raw, np.rint(raw))          # exact Q1.15 grid
    f = quantize_array(x, Mode.F16)
    assert np.array_equal(f.real, f.real.astype(np.float16).astype(np.float64))
    assert np.array_equal(quantize_array(x, Mode.REF64), x)
    # idempotent
    assert np.array_equal(quantize_array(q, Mode.Q16), q)
    assert np.array_equal(quantize_array(f, Mode.F16), f)


def test_q15_array_round_trip():
    rng = np.random.default_rng(2)
    x = (rng.standard_normal(64) + 1j * rng.standard_normal(64)) * 0.3
    re, im = q15_array_from_complex(x)
    assert re.dtype == np.int64 and im.dtype == np.int64
    back = q15_array_to_complex(re, im)
    assert np.max(np.abs(back - x)) <= np.sqrt(2) * 0.5 / Q15_ONE + 1e-12


def test_wrap_i32_two_complement():
    assert wrap_i32(I32_MAX + 1) == I32_MIN
    assert wrap_i32(I32_MIN - 1) == I32_MAX
    assert wrap_i32(5) == 5
    arr = np.array([I32_MAX + 1, I32_MIN - 1, 0, -7], dtype=np.int64)
    assert list(wrap_i32(arr)) == [I32_MIN, I32_MAX, 0, -7]


def test_complex_sample_construction():
    z = 0.5 - 0.25j
    q = ComplexSample.from_complex(z, Mode.Q16)
    assert (q.re, q.im) == (16384, -8192)
    assert q.to_complex() == z
    f = ComplexSample.from_complex(complex(1 / 3, 0), Mode.F16)
    assert f.re == f16_quantize(1 / 3)
    r = ComplexSample.from_complex(z, Mode.REF64)
    assert r.to_complex() == z


def _cmac_q16_oracle(acc, a, b, shift):
    # full-width products, floor shift on each two-product sum, 32-bit wrap
    pr = wrap_i32(a.re * b.re - a.im * b.im)
    pi = wrap_i32(a.re * b.im + a.im * b.re)
    return (wrap_i32(acc[0] + (pr >> shift)), wrap_i32(acc[1] + (pi >> shift)))


def test_cmac_q16_matches_integer_oracle():
    rng = np.random.default_rng(3)
    acc = WideAccumulator.zero(Mode.Q16)
    want = (0, 0)
    for _ in range(500):
        a = ComplexSample(int(rng.integers(Q15_MIN, Q15_MAX + 1)),
                          int(rng.integers(Q15_MIN, Q15_MAX + 1)), Mode.Q16)
        b = ComplexSample(int(rng.integers(Q15_MIN, Q15_MAX + 1)),
                          int(rng.integers(Q15_MIN, Q15_MAX + 1)), Mode.Q16)
        acc = cmac_q16(acc, a, b, 15)
        want = _cmac_q16_oracle(want, a, b, 15)
        assert (acc.re, acc.im) == want


def test_cmac_q16_shift_validation():
    acc = WideAccumulator.zero(Mode.Q16)
    a = ComplexSample(1, 0, Mode.Q16)
    with pytest.raises(ValueError):
        cmac_q16(acc, a, a, -1)
    with pytest.raises(ValueError):
        cmac_q16(acc, a, a, 32)


def test_cmac_q16_truncates_toward_minus_inf():
    # (-1 code) * (1 code) >> 15 must floor to -1, not round to 0
    acc = cmac_q16(WideAccumulator.zero(Mode.Q16),
                   ComplexSample(-1, 0, Mode.Q16),
                   ComplexSample(1, 0, Mode.Q16), 15)
    assert acc.re == -1 and acc.im == 0


def test_cmac_f16_single_rounding_per_step():
    rng = np.random.default_rng(4)
    acc = WideAccumulator.zero(Mode.F16)
    wr, wi = np.float32(0), np.float32(0)
    for _ in range(300):
        a = ComplexSample.from_complex(complex(*rng.standard_normal(2)), Mode.F16)
        b = ComplexSample.from_complex(complex(*rng.standard_normal(2)), Mode.F16)
        acc = cmac_f16(acc, a, b)
        ar, ai = np.float32(a.re), np.float32(a.im)
        br, bi = np.float32(b.re), np.float32(b.im)
        wr = wr + (np.float32(ar * br) - np.float32(ai * bi))
        wi = wi + (np.float32(ar * bi) + np.float32(ai * br))
        assert acc.re == wr and acc.im == wi


def test_cdotp_matches_widening_mac_and_counts_fused():
    rng = np.random.default_rng(5)
    stats = NumericStats()
    acc_f = WideAccumulator.zero(Mode.F16)
    acc_c = WideAccumulator.zero(Mode.CF16)
    for _ in range(100):
        a = ComplexSample.from_complex(complex(*rng.standard_normal(2)), Mode.F16)
        b = ComplexSample.from_complex(complex(*rng.standard_normal(2)), Mode.F16)
        acc_f = cmac_f16(acc_f, a, b)
        acc_c = cdotp_cf16(acc_c, a, b, stats)
        assert acc_c.re == acc_f.re and acc_c.im == acc_f.im
    assert stats.fused_ops == 100


def test_narrow_q16_saturates_and_counts():
    stats = NumericStats()
    s = narrow(WideAccumulator(1 << 20, -(1 << 20), Mode.Q16), Mode.Q16,
               stats=stats)
    assert (s.re, s.im) == (Q15_MAX, Q15_MIN)
    assert stats.saturations == 1
    s = narrow(WideAccumulator(1 << 20, 0, Mode.Q16), Mode.Q16, shift=6,
               stats=stats)
    assert s.re == (1 << 14) and stats.saturations == 1   # shift rescued it


def test_narrow_f16_rounds_and_flags_nonfinite():
    stats = NumericStats()
    s = narrow(WideAccumulator(1.0 / 3.0, 0.0, Mode.F16), Mode.F16, stats=stats)
    assert s.re == f16_quantize(1 / 3)
    narrow(WideAccumulator(1e9, 0.0, Mode.F16), Mode.F16, stats=stats)
    assert stats.nonfinite == 1                           # overflowed to inf
    with pytest.raises(ValueError):
        narrow(WideAccumulator(0, 0, Mode.REF64), Mode.REF64)


def test_shared_ops_count_and_mode_precision():
    stats = NumericStats()
    d64 = shared_divide(1.0, 3.0, Mode.REF64, stats)
    d32 = shared_divide(1.0, 3.0, Mode.F16, stats)
    assert stats.divisions == 2
    assert d64 == 1.0 / 3.0
    assert d32 == float(np.float32(1.0) / np.float32(3.0))
    assert d64 != d32

    q = shared_cdiv(1.0 + 1.0j, 3.0, Mode.REF64, stats)
    assert stats.divisions == 3 and q == complex(1 / 3, 1 / 3)

    r = shared_sqrt(2.0, Mode.REF64, stats)
    assert stats.sqrts == 1 and r == math.sqrt(2.0)
    assert shared_sqrt(2.0, Mode.Q16, stats) == float(np.sqrt(np.float32(2.0)))
    with pytest.raises(ValueError):
        shared_sqrt(-1e-9, Mode.REF64, stats)


def test_batch_q16_matches_scalar_loop():
    rng = np.random.default_rng(6)
    n = 256
    ar = rng.integers(Q15_MIN, Q15_MAX + 1, n)
    ai = rng.integers(Q15_MIN, Q15_MAX + 1, n)
    br = rng.integers(Q15_MIN, Q15_MAX + 1, n)
    bi = rng.integers(Q15_MIN, Q15_MAX + 1, n)
    accr = np.zeros(n, dtype=np.int64)
    acci = np.zeros(n, dtype=np.int64)
    accr, acci = cmac_q16_batch(accr, acci, ar, ai, br, bi, 15)
    for k in range(n):
        s = cmac_q16(WideAccumulator.zero(Mode.Q16),
                     ComplexSample(int(ar[k]), int(ai[k]), Mode.Q16),
                     ComplexSample(int(br[k]), int(bi[k]), Mode.Q16), 15)
        assert (accr[k], acci[k]) == (s.re, s.im)

    stats_b = NumericStats()
    nr, ni = narrow_q16_batch(accr * 64, acci * 64, 0, stats_b)
    stats_s = NumericStats()
    for k in range(n):
        s = narrow(WideAccumulator(int(accr[k]) * 64, int(acci[k]) * 64,
                                   Mode.Q16), Mode.Q16, stats=stats_s)
        assert (nr[k], ni[k]) == (s.re, s.im)
    # scalar counts saturated samples, batch counts saturated components
    assert stats_b.saturations >= stats_s.saturations > 0


def test_cmul_q15_is_zero_acc_mac():
    r, i = cmul_q15(np.int64(12000), np.int64(-3000),
                    np.int64(5000), np.int64(700))
    s = cmac_q16(WideAccumulator.zero(Mode.Q16),
                 ComplexSample(12000, -3000, Mode.Q16),
                 ComplexSample(5000, 700, Mode.Q16), 15)
    assert (int(r), int(i)) == (s.re, s.im)


def test_batch_f16_matches_scalar_loop():
    rng = np.random.default_rng(7)
    n = 128
    a = f16_array(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    b = f16_array(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    acc = cmac_f16_batch(np.zeros(n, np.complex64), a, b)
    for k in range(n):
        s = cmac_f16(WideAccumulator.zero(Mode.F16),
                     ComplexSample(float(a[k].real), float(a[k].imag), Mode.F16),
                     ComplexSample(float(b[k].real), float(b[k].imag), Mode.F16))
        assert acc[k].real == np.float32(s.re) and acc[k].imag == np.float32(s.im)
    stats = NumericStats()
    out = cdotp_cf16_batch(np.zeros(n, np.complex64), a, b, stats)
    assert np.array_equal(out, acc) and stats.fused_ops == n


def test_narrow_f16_batch_counts_nonfinite_components():
    stats = NumericStats()
    big = c64(np.array([1e9, 1.0], np.float32), np.array([-1e9, 0.5], np.float32))
    out = narrow_f16_batch(big, stats)
    assert stats.nonfinite == 2
    assert out[1] == np.complex64(1.0 + 0.5j)

"""Register-tiled complex matrix product tests."""

import numpy as np
import pytest

from puschrx.beamforming import (
    REGISTER_BUDGET, BeamformerCoeffs, TileWindow, beamform, default_window,
    op_count,
)
from puschrx.numerics import (
    ComplexSample, Mode, NumericStats, WideAccumulator, cmac_q16, narrow,
    quantize_array,
)


def test_register_model():
    # fused complex ops hold one register per complex value
    assert TileWindow(4, 4).registers(Mode.CF16) == 24
    assert TileWindow(2, 4).registers(Mode.F16) == 28
    assert TileWindow(2, 4).registers(Mode.Q16) == 28
    assert TileWindow(4, 4).registers(Mode.F16) == 48 > REGISTER_BUDGET


def test_window_validation():
    TileWindow(4, 4).validate(Mode.CF16)
    with pytest.raises(ValueError):
        TileWindow(4, 4).validate(Mode.F16)
    with pytest.raises(ValueError):
        TileWindow(0, 4).validate(Mode.CF16)
    for mode in Mode:
        default_window(mode).validate(mode)


def test_coeffs_validation():
    with pytest.raises(ValueError):
        BeamformerCoeffs(np.zeros(4))
    with pytest.raises(ValueError):
        BeamformerCoeffs(np.zeros((2, 2)), replicas=0)
    c = BeamformerCoeffs(np.eye(3), replicas=2)
    assert c.n_b == 3 and c.n_rx == 3 and c.replicas == 2


def test_identity_coefficients_pass_through():
    rng = np.random.default_rng(0)
    b = (rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))) * 0.3
    out = beamform(BeamformerCoeffs(np.eye(4)), b, Mode.REF64)
    assert np.allclose(out, b, atol=1e-15)


def test_ref64_matches_matmul():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((8, 16)) + 1j * rng.standard_normal((8, 16))
    b = rng.standard_normal((16, 33)) + 1j * rng.standard_normal((16, 33))
    out = beamform(BeamformerCoeffs(a), b, Mode.REF64)
    assert np.linalg.norm(out - a @ b) / np.linalg.norm(a @ b) < 1e-12


def test_q16_matches_scalar_mac_chain():
    rng = np.random.default_rng(2)
    a = quantize_array((rng.standard_normal((3, 5)) +
                        1j * rng.standard_normal((3, 5))) * 0.2, Mode.Q16)
    b = quantize_array((rng.standard_normal((5, 4)) +
                        1j * rng.standard_normal((5, 4))) * 0.2, Mode.Q16)
    out = beamform(BeamformerCoeffs(a), b, Mode.Q16)
    for i in range(3):
        for k in range(4):
            acc = WideAccumulator.zero(Mode.Q16)
            for j in range(5):
                acc = cmac_q16(acc,
                               ComplexSample.from_complex(a[i, j], Mode.Q16),
                               ComplexSample.from_complex(b[j, k], Mode.Q16),
                               15)
            want = narrow(acc, Mode.Q16).to_complex()
            assert out[i, k] == want


def test_f16_error_and_cf16_identity():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((8, 32)) + 1j * rng.standard_normal((8, 32))
    b = rng.standard_normal((32, 16)) + 1j * rng.standard_normal((32, 16))
    f = beamform(BeamformerCoeffs(a), b, Mode.F16)
    c = beamform(BeamformerCoeffs(a), b, Mode.CF16)
    assert np.array_equal(f, c)
    ref = a @ b
    assert np.linalg.norm(f - ref) / np.linalg.norm(ref) < 5e-3


def test_cf16_counts_fused_ops():
    stats = NumericStats()
    a = np.ones((4, 8)) * 0.1
    b = np.ones((8, 6)) * 0.1
    beamform(BeamformerCoeffs(a), b, Mode.CF16, stats=stats)
    assert stats.fused_ops == 4 * 8 * 6


def test_window_and_workers_do_not_change_values():
    rng = np.random.default_rng(4)
    a = (rng.standard_normal((8, 16)) + 1j * rng.standard_normal((8, 16))) * 0.2
    b = (rng.standard_normal((16, 40)) + 1j * rng.standard_normal((16, 40))) * 0.2
    for mode in (Mode.Q16, Mode.F16):
        base = beamform(BeamformerCoeffs(a), b, mode)
        alt = beamform(BeamformerCoeffs(a), b, mode, window=TileWindow(1, 2))
        assert np.array_equal(base, alt)
        for nw in (1, 3, None):
            assert np.array_equal(base, beamform(BeamformerCoeffs(a), b, mode,
                                                 n_workers=nw))


def test_q16_saturation_counted():
    stats = NumericStats()
    a = np.full((1, 8), 0.99)          # row sum of products ~ 7.8 >> 1.0
    b = np.full((8, 3), 0.99)
    out = beamform(BeamformerCoeffs(a), b, Mode.Q16, stats=stats)
    assert stats.saturations == 3
    assert np.allclose(out.real, 32767 / 32768)


def test_input_shape_checked():
    with pytest.raises(ValueError):
        beamform(BeamformerCoeffs(np.eye(4)), np.zeros((3, 7)), Mode.REF64)


def test_op_count():
    counts = op_count((32, 64, 4096), None, Mode.CF16)
    assert counts["macs"] == 4 * 32 * 64 * 4096
    assert counts["fused_ops"] == counts["macs"] // 4
    f = op_count((32, 64, 4096), None, Mode.F16)
    assert f["fused_ops"] == 0 and f["macs"] == counts["macs"]
    # loads follow the tile decomposition: rows+cols operands per inner step
    w = TileWindow(2, 4)
    c = op_count((4, 8, 8), w, Mode.F16)
    assert c["loads"] == (2 * 2) * 8 * (2 + 4)
    with pytest.raises(ValueError):
        op_count((0, 8, 8), None, Mode.F16)

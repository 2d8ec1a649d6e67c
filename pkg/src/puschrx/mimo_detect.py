"""DMRS channel estimation and per-subcarrier MMSE detection.

The detector solves x = (H^H H + sigma2*I)^-1 H^H y per subcarrier through
a Gram build, a Cholesky factorization G = L L^H (L lower triangular; the
upper-triangular convention found elsewhere is this factor transposed) and
two triangular substitutions.

Division and square-root accounting: the factorization calls the shared
div/sqrt entry points exactly n sqrt + n(n-1)/2 + n division ops for size n.
The n(n-1)/2 are the off-diagonal column scalings (one logical division per
entry), the extra n are the diagonal reciprocals stored in the factor so the
substitutions can multiply instead of queueing on the divider.

Q16 pipeline: inputs are normalized by a power of two (default: the joint
max |re/im| over H and y, per problem), the Gram/right-hand side are
narrowed with a log2(N_B) headroom shift, and the solution's scale cancels
exactly, so x comes back in input units. All intermediate sums stay wide;
16-bit narrowing happens only where a kernel stores a value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    Mode,
    NumericStats,
    Q15_MAX,
    Q15_MIN,
    Q15_ONE,
    c64,
    f16_array,
    narrow_f16_batch,
    narrow_q16_batch,
    q15_array_from_complex,
    q15_array_to_complex,
    wrap_i32,
)
from . import workers


class NotPositiveDefinite(Exception):
    """Cholesky pivot was not strictly positive."""

    def __init__(self, pivot: int):
        super().__init__(f"non-positive pivot at index {pivot}")
        self.pivot = pivot


@dataclass(frozen=True)
class MmseProblem:
    h: np.ndarray            # N_B x N_TX channel estimate
    sigma2: float            # noise variance >= 0
    y: np.ndarray            # N_B received vector

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        y = np.asarray(self.y, dtype=np.complex128)
        if h.ndim != 2 or y.shape != (h.shape[0],):
            raise ValueError(f"inconsistent problem dims h={h.shape} y={y.shape}")
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "y", y)


@dataclass
class CholeskyFactor:
    l: np.ndarray            # lower triangular, real positive diagonal
    inv_diag: np.ndarray     # divider-unit reciprocals of the diagonal
    mode: Mode


@dataclass
class DetectError:
    index: int
    pivot: int
    message: str


# ---------------------------------------------------------------------------
# Channel estimation
# ---------------------------------------------------------------------------

def channel_estimate(y_pilot: np.ndarray, x_pilot_recip: np.ndarray,
                     mode: Mode, stats: NumericStats | None = None) -> np.ndarray:
    """h[i][j] = y[i] * recip[j]: one widened complex product per entry.

    Accepts leading batch axes: (..., N_B) x (..., N_TX) -> (..., N_B, N_TX).
    """
    y = np.asarray(y_pilot, dtype=np.complex128)
    r = np.asarray(x_pilot_recip, dtype=np.complex128)
    if not (np.isfinite(r.view(np.float64)).all()):
        raise ValueError("pilot reciprocals must be finite")
    if mode is Mode.Q16:
        yr, yi = q15_array_from_complex(y)
        rr, ri = q15_array_from_complex(r)
        pr = wrap_i32(yr[..., :, None] * rr[..., None, :]
                      - yi[..., :, None] * ri[..., None, :]) >> 15
        pi = wrap_i32(yr[..., :, None] * ri[..., None, :]
                      + yi[..., :, None] * rr[..., None, :]) >> 15
        sre, sim = narrow_q16_batch(pr, pi, 0, stats)
        return q15_array_to_complex(sre, sim)
    if mode in (Mode.F16, Mode.CF16):
        yw = f16_array(y)
        rw = f16_array(r)
        prod = yw[..., :, None] * rw[..., None, :]
        return narrow_f16_batch(prod, stats).astype(np.complex128)
    return y[..., :, None] * r[..., None, :]


# ---------------------------------------------------------------------------
# Gram matrix
# ---------------------------------------------------------------------------

def _gram_float(h: np.ndarray, sigma2: np.ndarray, mode: Mode,
                stats: NumericStats | None) -> np.ndarray:
    """Batched G = H^H H + sigma2 I; lower triangle computed, mirrored."""
    if mode is Mode.REF64:
        hw = h.astype(np.complex128)
        g = np.zeros(h.shape[:-2] + (h.shape[-1], h.shape[-1]), np.complex128)
    else:
        hw = f16_array(h)
        g = np.zeros(h.shape[:-2] + (h.shape[-1], h.shape[-1]), np.complex64)
    n_b, n_tx = h.shape[-2], h.shape[-1]
    for j in range(n_tx):
        for i in range(j, n_tx):
            acc = np.zeros(h.shape[:-2], dtype=g.dtype)
            for k in range(n_b):
                acc = acc + np.conj(hw[..., k, i]) * hw[..., k, j]
            g[..., i, j] = acc
    diag = np.arange(n_tx)
    s2 = np.asarray(sigma2, dtype=np.float64)
    # |h|^2 sums are real; drop the contraction residue so the mirrored
    # matrix equals its own conjugate transpose bit for bit
    g[..., diag, diag] = g[..., diag, diag].real
    g[..., diag, diag] += (s2[..., None] if s2.ndim else s2).astype(g.real.dtype)
    if mode is not Mode.REF64:
        g = narrow_f16_batch(g, stats)
    # hermitian closure: mirror the conjugate of the strict lower triangle
    iu = np.triu_indices(n_tx, 1)
    g[..., iu[0], iu[1]] = np.conj(g[..., iu[1], iu[0]])
    return g


def _gram_q16(hr, hi, sig_wide, headroom_shift: int,
              stats: NumericStats | None):
    """Wide-accumulated Q16 Gram, narrowed with a headroom shift."""
    n_b, n_tx = hr.shape[-2], hr.shape[-1]
    batch = hr.shape[:-2]
    gre = np.zeros(batch + (n_tx, n_tx), dtype=np.int64)
    gim = np.zeros(batch + (n_tx, n_tx), dtype=np.int64)
    for j in range(n_tx):
        for i in range(j, n_tx):
            # conj(h[:,i]) * h[:,j], per-MAC shift, wide wrap-add over k
            pr = wrap_i32(hr[..., :, i] * hr[..., :, j]
                          + hi[..., :, i] * hi[..., :, j]) >> 15
            pi = wrap_i32(hr[..., :, i] * hi[..., :, j]
                          - hi[..., :, i] * hr[..., :, j]) >> 15
            gre[..., i, j] = wrap_i32(pr.sum(axis=-1))
            gim[..., i, j] = wrap_i32(pi.sum(axis=-1))
    diag = np.arange(n_tx)
    gre[..., diag, diag] = wrap_i32(gre[..., diag, diag]
                                    + np.asarray(sig_wide)[..., None])
    gre, gim = narrow_q16_batch(gre, gim, headroom_shift, stats)
    iu = np.triu_indices(n_tx, 1)
    gre[..., iu[0], iu[1]] = gre[..., iu[1], iu[0]]
    gim[..., iu[0], iu[1]] = -gim[..., iu[1], iu[0]]
    return gre, gim


def gram_regularized(h: np.ndarray, sigma2, mode: Mode,
                     stats: NumericStats | None = None,
                     headroom_shift: int = 0) -> np.ndarray:
    """G = H^H H + sigma2 I, exactly hermitian by construction.

    In Q16 the optional headroom shift divides the narrowed result by
    2^shift (documented accumulation headroom; 0 keeps plain Q1.15).
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim < 2:
        raise ValueError("channel estimate must be at least 2-D")
    if mode is Mode.Q16:
        hr, hi = q15_array_from_complex(h)
        sig_wide = int(round(float(np.asarray(sigma2)) * Q15_ONE)) \
            if np.ndim(sigma2) == 0 else np.rint(np.asarray(sigma2) * Q15_ONE).astype(np.int64)
        gre, gim = _gram_q16(hr, hi, sig_wide, headroom_shift, stats)
        return q15_array_to_complex(gre, gim)
    return _gram_float(h, np.asarray(sigma2), mode, stats).astype(np.complex128)


# ---------------------------------------------------------------------------
# Cholesky and triangular solves (batched cores)
# ---------------------------------------------------------------------------

def _chol_float(g: np.ndarray, mode: Mode, stats: NumericStats | None):
    """Batched float Cholesky. Returns (l, inv_diag, pivots) where pivots[b]
    is the first non-positive pivot index or -1."""
    n = g.shape[-1]
    batch = g.shape[:-2]
    if mode is Mode.REF64:
        ldt, rdt = np.complex128, np.float64
    else:
        ldt, rdt = np.complex64, np.float32
    l = np.zeros(batch + (n, n), dtype=ldt)
    inv_diag = np.zeros(batch + (n,), dtype=rdt)
    pivots = np.full(batch, -1, dtype=np.int64)
    gw = g.astype(ldt)
    for j in range(n):
        acc = np.zeros(batch, dtype=ldt)
        for k in range(j):
            acc = acc + l[..., j, k] * np.conj(l[..., j, k])
        d = (gw[..., j, j] - acc).real
        bad = (d <= 0) & (pivots < 0)
        pivots = np.where(bad, j, pivots)
        d = np.where(d > 0, d, rdt(1.0))
        if stats is not None:
            stats.sqrts += int(np.prod(batch, dtype=int)) if batch else 1
            stats.divisions += int(np.prod(batch, dtype=int)) if batch else 1
        s = np.sqrt(d.astype(rdt))
        if mode is not Mode.REF64:
            s = s.astype(np.float16).astype(np.float32)
        l[..., j, j] = s.astype(rdt)
        inv_diag[..., j] = rdt(1.0) / s.astype(rdt)
        for i in range(j + 1, n):
            acc = np.zeros(batch, dtype=ldt)
            for k in range(j):
                acc = acc + l[..., i, k] * np.conj(l[..., j, k])
            num = gw[..., i, j] - acc
            if stats is not None:
                stats.divisions += int(np.prod(batch, dtype=int)) if batch else 1
            ent = num / s.astype(ldt) if mode is Mode.REF64 else \
                c64(num.real / s, num.imag / s)
            if mode is not Mode.REF64:
                ent = narrow_f16_batch(ent)
            l[..., i, j] = ent
    return l, inv_diag, pivots


def _count(batch) -> int:
    return int(np.prod(batch, dtype=int)) if batch else 1


def _chol_q16(gre, gim, mode_stats: NumericStats | None):
    """Batched Q1.15 Cholesky: wide integer inner products, float32 shared
    div/sqrt, every stored entry back on the Q15 grid."""
    n = gre.shape[-1]
    batch = gre.shape[:-2]
    lre = np.zeros(batch + (n, n), dtype=np.int64)
    lim = np.zeros(batch + (n, n), dtype=np.int64)
    inv_diag = np.zeros(batch + (n,), dtype=np.float32)
    pivots = np.full(batch, -1, dtype=np.int64)
    for j in range(n):
        acc = np.zeros(batch, dtype=np.int64)
        for k in range(j):
            acc = acc + (wrap_i32(lre[..., j, k] ** 2 + lim[..., j, k] ** 2) >> 15)
        d = gre[..., j, j] - acc
        bad = (d <= 0) & (pivots < 0)
        pivots = np.where(bad, j, pivots)
        d = np.where(d > 0, d, Q15_ONE)
        if mode_stats is not None:
            mode_stats.sqrts += _count(batch)
            mode_stats.divisions += _count(batch)
        s32 = np.sqrt((d / Q15_ONE).astype(np.float32))
        ljj = np.clip(np.rint(s32 * Q15_ONE), 1, Q15_MAX).astype(np.int64)
        lre[..., j, j] = ljj
        inv_diag[..., j] = np.float32(1.0) / (ljj / Q15_ONE).astype(np.float32)
        den = (ljj / Q15_ONE).astype(np.float32)
        for i in range(j + 1, n):
            accr = np.zeros(batch, dtype=np.int64)
            acci = np.zeros(batch, dtype=np.int64)
            for k in range(j):
                pr = wrap_i32(lre[..., i, k] * lre[..., j, k]
                              + lim[..., i, k] * lim[..., j, k]) >> 15
                pi = wrap_i32(lim[..., i, k] * lre[..., j, k]
                              - lre[..., i, k] * lim[..., j, k]) >> 15
                accr = accr + pr
                acci = acci + pi
            numr = gre[..., i, j] - accr
            numi = gim[..., i, j] - acci
            if mode_stats is not None:
                mode_stats.divisions += _count(batch)
            qr = (numr / Q15_ONE).astype(np.float32) / den
            qi = (numi / Q15_ONE).astype(np.float32) / den
            lre[..., i, j] = np.clip(np.rint(qr * Q15_ONE), Q15_MIN, Q15_MAX).astype(np.int64)
            lim[..., i, j] = np.clip(np.rint(qi * Q15_ONE), Q15_MIN, Q15_MAX).astype(np.int64)
    return lre, lim, inv_diag, pivots


def cholesky(g: np.ndarray, mode: Mode,
             stats: NumericStats | None = None) -> CholeskyFactor:
    """Factor one hermitian matrix: G = L L^H. Raises NotPositiveDefinite
    with the offending pivot index."""
    g = np.asarray(g, dtype=np.complex128)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"cholesky expects one square matrix, got {g.shape}")
    if mode is Mode.Q16:
        gre, gim = q15_array_from_complex(g)
        lre, lim, inv_diag, pivots = _chol_q16(gre[None], gim[None], stats)
        if pivots[0] >= 0:
            raise NotPositiveDefinite(int(pivots[0]))
        return CholeskyFactor(q15_array_to_complex(lre[0], lim[0]), inv_diag[0], mode)
    l, inv_diag, pivots = _chol_float(g[None], mode, stats)
    if pivots[0] >= 0:
        raise NotPositiveDefinite(int(pivots[0]))
    return CholeskyFactor(l[0].astype(np.complex128), inv_diag[0], mode)


def _solve_lower_float(l, inv_diag, b, mode: Mode):
    n = l.shape[-1]
    z = np.zeros_like(b)
    for i in range(n):
        acc = np.zeros(b.shape[:-1], dtype=b.dtype)
        for k in range(i):
            acc = acc + l[..., i, k] * z[..., k]
        num = b[..., i] - acc
        val = num * inv_diag[..., i].astype(b.real.dtype)
        if mode is not Mode.REF64:
            val = narrow_f16_batch(val)
        z[..., i] = val
    return z


def _solve_upper_float(l, inv_diag, z, mode: Mode):
    n = l.shape[-1]
    x = np.zeros_like(z)
    for i in range(n - 1, -1, -1):
        acc = np.zeros(z.shape[:-1], dtype=z.dtype)
        for k in range(i + 1, n):
            acc = acc + np.conj(l[..., k, i]) * x[..., k]
        num = z[..., i] - acc
        val = num * inv_diag[..., i].astype(z.real.dtype)
        if mode is not Mode.REF64:
            val = narrow_f16_batch(val)
        x[..., i] = val
    return x


def _q15_store(vr32: np.ndarray, vi32: np.ndarray):
    re = np.clip(np.rint(vr32 * Q15_ONE), Q15_MIN, Q15_MAX).astype(np.int64)
    im = np.clip(np.rint(vi32 * Q15_ONE), Q15_MIN, Q15_MAX).astype(np.int64)
    return re, im


def _solve_lower_q16(lre, lim, inv_diag, br, bi):
    n = lre.shape[-1]
    zr = np.zeros_like(br)
    zi = np.zeros_like(bi)
    for i in range(n):
        accr = np.zeros(br.shape[:-1], dtype=np.int64)
        acci = np.zeros(br.shape[:-1], dtype=np.int64)
        for k in range(i):
            pr = wrap_i32(lre[..., i, k] * zr[..., k] - lim[..., i, k] * zi[..., k]) >> 15
            pi = wrap_i32(lre[..., i, k] * zi[..., k] + lim[..., i, k] * zr[..., k]) >> 15
            accr = accr + pr
            acci = acci + pi
        numr = ((br[..., i] - accr) / Q15_ONE).astype(np.float32)
        numi = ((bi[..., i] - acci) / Q15_ONE).astype(np.float32)
        inv = inv_diag[..., i]
        zr[..., i], zi[..., i] = _q15_store(numr * inv, numi * inv)
    return zr, zi


def _solve_upper_q16(lre, lim, inv_diag, zr, zi):
    n = lre.shape[-1]
    xr = np.zeros_like(zr)
    xi = np.zeros_like(zi)
    for i in range(n - 1, -1, -1):
        accr = np.zeros(zr.shape[:-1], dtype=np.int64)
        acci = np.zeros(zr.shape[:-1], dtype=np.int64)
        for k in range(i + 1, n):
            # conj(l[k,i]) * x[k]
            pr = wrap_i32(lre[..., k, i] * xr[..., k] + lim[..., k, i] * xi[..., k]) >> 15
            pi = wrap_i32(lre[..., k, i] * xi[..., k] - lim[..., k, i] * xr[..., k]) >> 15
            accr = accr + pr
            acci = acci + pi
        numr = ((zr[..., i] - accr) / Q15_ONE).astype(np.float32)
        numi = ((zi[..., i] - acci) / Q15_ONE).astype(np.float32)
        inv = inv_diag[..., i]
        xr[..., i], xi[..., i] = _q15_store(numr * inv, numi * inv)
    return xr, xi


def solve_lower(factor: CholeskyFactor, b: np.ndarray) -> np.ndarray:
    """Forward substitution L z = b (diagonal applied via stored reciprocals)."""
    b = np.asarray(b, dtype=np.complex128)
    if np.any(factor.l[np.arange(factor.l.shape[-1]), np.arange(factor.l.shape[-1])].real == 0):
        raise ZeroDivisionError("singular factor: zero diagonal")
    if factor.mode is Mode.Q16:
        lre, lim = q15_array_from_complex(factor.l)
        br, bi = q15_array_from_complex(b)
        zr, zi = _solve_lower_q16(lre, lim, factor.inv_diag, br, bi)
        return q15_array_to_complex(zr, zi)
    if factor.mode is Mode.REF64:
        return _solve_lower_float(factor.l, factor.inv_diag, b, factor.mode)
    return _solve_lower_float(factor.l.astype(np.complex64), factor.inv_diag,
                              f16_array(b), factor.mode).astype(np.complex128)


def solve_upper_conjT(factor: CholeskyFactor, z: np.ndarray) -> np.ndarray:
    """Backward substitution L^H x = z; composed with solve_lower this
    solves G x = b."""
    z = np.asarray(z, dtype=np.complex128)
    if np.any(factor.l[np.arange(factor.l.shape[-1]), np.arange(factor.l.shape[-1])].real == 0):
        raise ZeroDivisionError("singular factor: zero diagonal")
    if factor.mode is Mode.Q16:
        lre, lim = q15_array_from_complex(factor.l)
        zr, zi = q15_array_from_complex(z)
        xr, xi = _solve_upper_q16(lre, lim, factor.inv_diag, zr, zi)
        return q15_array_to_complex(xr, xi)
    if factor.mode is Mode.REF64:
        return _solve_upper_float(factor.l, factor.inv_diag, z, factor.mode)
    return _solve_upper_float(factor.l.astype(np.complex64), factor.inv_diag,
                              f16_array(z), factor.mode).astype(np.complex128)


# ---------------------------------------------------------------------------
# MMSE detection
# ---------------------------------------------------------------------------

def _matvec_hermT_float(h, y, mode: Mode, stats):
    """b = H^H y with wide accumulation, narrowed per entry."""
    n_b, n_tx = h.shape[-2], h.shape[-1]
    if mode is Mode.REF64:
        hw, yw = h, y
        b = np.zeros(h.shape[:-2] + (n_tx,), dtype=np.complex128)
    else:
        hw, yw = f16_array(h), f16_array(y)
        b = np.zeros(h.shape[:-2] + (n_tx,), dtype=np.complex64)
    for i in range(n_tx):
        acc = np.zeros(h.shape[:-2], dtype=b.dtype)
        for k in range(n_b):
            acc = acc + np.conj(hw[..., k, i]) * yw[..., k]
        b[..., i] = acc
    if mode is not Mode.REF64:
        b = narrow_f16_batch(b, stats)
    return b


def _matvec_hermT_q16(hr, hi, yr, yi, headroom_shift: int, stats):
    n_b, n_tx = hr.shape[-2], hr.shape[-1]
    br = np.zeros(hr.shape[:-2] + (n_tx,), dtype=np.int64)
    bi = np.zeros(hr.shape[:-2] + (n_tx,), dtype=np.int64)
    for i in range(n_tx):
        pr = wrap_i32(hr[..., :, i] * yr + hi[..., :, i] * yi) >> 15
        pi = wrap_i32(hr[..., :, i] * yi - hi[..., :, i] * yr) >> 15
        br[..., i] = wrap_i32(pr.sum(axis=-1))
        bi[..., i] = wrap_i32(pi.sum(axis=-1))
    return narrow_q16_batch(br, bi, headroom_shift, stats)


def _headroom(n_b: int) -> int:
    return max(0, int(np.ceil(np.log2(n_b))))


def _prescale_exponent(h: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-problem power-of-two exponent normalizing max |re/im| into (0.5, 1]."""
    hmax = np.maximum(np.abs(h.real).max(axis=(-2, -1)), np.abs(h.imag).max(axis=(-2, -1)))
    ymax = np.maximum(np.abs(y.real).max(axis=-1), np.abs(y.imag).max(axis=-1))
    m = np.maximum(hmax, ymax)
    with np.errstate(divide="ignore"):
        e = np.ceil(np.log2(np.where(m > 0, m, 1.0)))
    return e


def _mmse_batch_q16(h, y, sigma2, stats):
    e = _prescale_exponent(h, y)
    scale = np.exp2(e)
    hs = h / scale[..., None, None]
    ys = y / scale[..., None]
    g_shift = _headroom(h.shape[-2])
    hr, hi = q15_array_from_complex(hs)
    yr, yi = q15_array_from_complex(ys)
    sig_wide = np.rint(np.asarray(sigma2) / np.exp2(2 * e) * Q15_ONE).astype(np.int64)
    gre, gim = _gram_q16(hr, hi, sig_wide, g_shift, stats)
    br, bi = _matvec_hermT_q16(hr, hi, yr, yi, g_shift, stats)
    lre, lim, inv_diag, pivots = _chol_q16(gre, gim, stats)
    zr, zi = _solve_lower_q16(lre, lim, inv_diag, br, bi)
    xr, xi = _solve_upper_q16(lre, lim, inv_diag, zr, zi)
    x = q15_array_to_complex(xr, xi)
    return x, pivots


def _mmse_batch_float(h, y, sigma2, mode: Mode, stats):
    g = _gram_float(h, np.asarray(sigma2), mode, stats)
    b = _matvec_hermT_float(h, y, mode, stats)
    l, inv_diag, pivots = _chol_float(g, mode, stats)
    if mode is Mode.REF64:
        z = _solve_lower_float(l, inv_diag, b, mode)
        x = _solve_upper_float(l, inv_diag, z, mode)
        return x, pivots
    z = _solve_lower_float(l, inv_diag, b, mode)
    x = _solve_upper_float(l, inv_diag, z, mode)
    return x.astype(np.complex128), pivots


def mmse_detect(problem: MmseProblem, mode: Mode,
                stats: NumericStats | None = None) -> np.ndarray:
    """Solve one detection problem; raises NotPositiveDefinite on failure."""
    h = problem.h[None]
    y = problem.y[None]
    if mode is Mode.Q16:
        x, pivots = _mmse_batch_q16(h, y, np.asarray([problem.sigma2]), stats)
    else:
        x, pivots = _mmse_batch_float(h, y, np.asarray([problem.sigma2]), mode, stats)
    if pivots[0] >= 0:
        raise NotPositiveDefinite(int(pivots[0]))
    return x[0]


def batch_mmse_arrays(h: np.ndarray, y: np.ndarray, sigma2,
                      mode: Mode, stats: NumericStats | None = None,
                      n_workers: int | None = None):
    """Vectorized detection over a leading batch axis.

    Returns (x, errors): failed problems keep NaN rows and produce one
    DetectError each; the batch never aborts.
    """
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if h.ndim != 3 or y.shape != h.shape[:2]:
        raise ValueError(f"expected h (B,N_B,N_TX) and y (B,N_B); got {h.shape} {y.shape}")
    n = h.shape[0]
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=np.float64), (n,))

    def chunk(start, stop):
        if mode is Mode.Q16:
            return _mmse_batch_q16(h[start:stop], y[start:stop],
                                   sigma2[start:stop], stats)
        return _mmse_batch_float(h[start:stop], y[start:stop],
                                 sigma2[start:stop], mode, stats)

    parts = workers.run_chunked(chunk, n, n_workers)
    x = np.concatenate([p[0] for p in parts], axis=0)
    pivots = np.concatenate([p[1] for p in parts], axis=0)
    errors = []
    for idx in np.nonzero(pivots >= 0)[0]:
        x[idx] = np.nan
        errors.append(DetectError(int(idx), int(pivots[idx]),
                                  f"non-positive pivot {int(pivots[idx])}"))
    return x, errors


def batch_mmse(problems, mode: Mode, stats: NumericStats | None = None,
               n_workers: int | None = None):
    """Per-subcarrier detection over a list of uniform MmseProblem."""
    if not problems:
        return np.zeros((0, 0), dtype=np.complex128), []
    h = np.stack([p.h for p in problems])
    y = np.stack([p.y for p in problems])
    sigma2 = np.array([p.sigma2 for p in problems])
    return batch_mmse_arrays(h, y, sigma2, mode, stats, n_workers)


def mmse_oracle(h: np.ndarray, sigma2, y: np.ndarray) -> np.ndarray:
    """Direct-inversion reference (independent route, no Cholesky)."""
    h = np.asarray(h, dtype=np.complex128)
    g = h.conj().T @ h + np.asarray(sigma2) * np.eye(h.shape[1])
    return np.linalg.inv(g) @ (h.conj().T @ np.asarray(y, dtype=np.complex128))

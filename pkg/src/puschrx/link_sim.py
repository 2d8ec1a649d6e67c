"""Link-level Monte-Carlo harness: 16QAM over a MIMO AWGN channel.

BER sweeps run every arithmetic mode against the same channel, symbol and
noise draws (paired trials), so mode-to-mode BER gaps reflect arithmetic
alone. Each trial owns a counter-based RNG stream derived from
(seed, trial index); results are therefore independent of batching and
worker count. Noise for different SNR points reuses each trial's unit draw
scaled by the point's sigma, which keeps REF64 curves monotone up to
decision-boundary effects.

SNR convention: per-receive-branch symbol SNR, E[|Hx|^2 / N_B] / sigma2.
With unit-power symbols and unit-variance channel entries this makes
sigma2 = N_TX / snr_linear.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .numerics import Mode, NumericStats
from .mimo_detect import batch_mmse_arrays, channel_estimate
from .io_formats import read_matrix

RNG_ALGORITHM = "numpy Philox4x32-64, per-trial SeedSequence(seed, spawn_key=(trial,))"

BER_CSV_HEADER = "mode,n_b,n_tx,snr_db,trials,bit_errors,ber,discarded"

# Gray axis labels: index 2*b0 + b1 -> level
_GRAY_LEVELS = np.array([-3.0, -1.0, 3.0, 1.0]) / np.sqrt(10.0)
_INNER_THRESH = 2.0 / np.sqrt(10.0)


@dataclass(frozen=True)
class Constellation16QAM:
    """Unit-energy 16QAM with Gray labels b0 b1 (I axis) b2 b3 (Q axis)."""

    points: np.ndarray = field(default_factory=lambda: _build_points())

    def label_bits(self, label: int) -> tuple:
        return ((label >> 3) & 1, (label >> 2) & 1, (label >> 1) & 1, label & 1)

    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


def _build_points() -> np.ndarray:
    pts = np.empty(16, dtype=np.complex128)
    for label in range(16):
        b0, b1, b2, b3 = (label >> 3) & 1, (label >> 2) & 1, (label >> 1) & 1, label & 1
        pts[label] = _GRAY_LEVELS[2 * b0 + b1] + 1j * _GRAY_LEVELS[2 * b2 + b3]
    pts.flags.writeable = False
    return pts


def qam16_mod(bits) -> np.ndarray:
    """Map bit groups of 4 to constellation points.

    Accepts a flat array with length divisible by 4 (returns a flat symbol
    vector) or any shape whose last axis is 4 (returns that shape minus the
    last axis).
    """
    b = np.asarray(bits)
    flat_in = not (b.ndim >= 2 and b.shape[-1] == 4)
    if flat_in:
        if b.size % 4:
            raise ValueError(f"bit count {b.size} not divisible by 4")
        b = b.reshape(-1, 4)
    if not np.isin(b, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    b = b.astype(np.int64)
    i = _GRAY_LEVELS[2 * b[..., 0] + b[..., 1]]
    q = _GRAY_LEVELS[2 * b[..., 2] + b[..., 3]]
    return i + 1j * q


def qam16_demod_hard(x) -> np.ndarray:
    """Minimum-distance hard decision, returned as (..., 4) bits.

    Per-axis sign/magnitude thresholds are exactly the min-distance rule
    for the Gray labeling: sign picks b0/b2, |.| < 2/sqrt(10) picks b1/b3.
    """
    x = np.asarray(x, dtype=np.complex128)
    out = np.empty(x.shape + (4,), dtype=np.uint8)
    out[..., 0] = x.real > 0
    out[..., 1] = np.abs(x.real) < _INNER_THRESH
    out[..., 2] = x.imag > 0
    out[..., 3] = np.abs(x.imag) < _INNER_THRESH
    return out


def awgn_mimo_channel(x, h, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """y = H x + n, n circular complex Gaussian with per-component
    variance sigma2/2. Accepts a leading batch axis on both x and h."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    x = np.asarray(x, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim == 2:
        clean = h @ x
    else:
        clean = np.einsum("...ij,...j->...i", h, x)
    n = rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape)
    return clean + n * np.sqrt(sigma2 / 2.0)


@dataclass(frozen=True)
class LinkConfig:
    n_tx: int = 4
    n_b: int = 4
    n_sc: int = 1                      # independent subcarrier problems per trial
    snr_db: tuple = (10.0,)
    trials: int = 1000                 # channel realizations per SNR point
    seed: int = 0
    modes: tuple = (Mode.Q16, Mode.F16, Mode.REF64)
    channel_source: str = "random-gaussian"   # or "file"
    channel_file: str | None = None
    channel_knowledge: str = "genie"          # or "lse"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_db:
            raise ValueError("snr list must be nonempty")
        if self.n_tx < 1 or self.n_b < self.n_tx or self.n_sc < 1:
            raise ValueError(f"bad dims n_b={self.n_b} n_tx={self.n_tx} n_sc={self.n_sc}")
        if self.channel_knowledge not in ("genie", "lse"):
            raise ValueError(f"unknown channel_knowledge {self.channel_knowledge!r}")
        if self.channel_source not in ("random-gaussian", "file"):
            raise ValueError(f"unknown channel_source {self.channel_source!r}")
        if self.channel_source == "file" and not self.channel_file:
            raise ValueError("channel_source=file needs channel_file")
        modes = tuple(Mode.parse(m) if not isinstance(m, Mode) else m for m in self.modes)
        if Mode.REF64 not in modes:
            modes = modes + (Mode.REF64,)   # reference row always present
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))


@dataclass
class BerPoint:
    mode: Mode
    n_b: int
    n_tx: int
    snr_db: float
    trials: int          # problems simulated at this point
    bit_errors: int
    ber: float
    discarded: int       # problems dropped on detector failure

    @property
    def symbol_count(self) -> int:
        return (self.trials - self.discarded) * self.n_tx

    @property
    def error_count(self) -> int:
        return self.bit_errors


def _trial_stream(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(trial,))))


def _draw_trials(cfg: LinkConfig):
    """Per-trial draws shared by every mode and SNR point."""
    n_prob = cfg.trials * cfg.n_sc
    bits = np.empty((n_prob, cfg.n_tx, 4), dtype=np.uint8)
    h = np.empty((n_prob, cfg.n_b, cfg.n_tx), dtype=np.complex128)
    unit_noise = np.empty((n_prob, cfg.n_b), dtype=np.complex128)
    pilot_noise = None
    if cfg.channel_knowledge == "lse":
        pilot_noise = np.empty((n_prob, cfg.n_tx, cfg.n_b), dtype=np.complex128)
    fixed_h = None
    if cfg.channel_source == "file":
        fixed_h, _, _ = read_matrix(cfg.channel_file)
        if fixed_h.shape != (cfg.n_b, cfg.n_tx):
            raise ValueError(f"channel file is {fixed_h.shape}, config wants "
                             f"({cfg.n_b}, {cfg.n_tx})")
    for t in range(cfg.trials):
        gen = _trial_stream(cfg.seed, t)
        lo, hi = t * cfg.n_sc, (t + 1) * cfg.n_sc
        bits[lo:hi] = gen.integers(0, 2, size=(cfg.n_sc, cfg.n_tx, 4), dtype=np.uint8)
        if fixed_h is None:
            h[lo:hi] = (gen.standard_normal((cfg.n_sc, cfg.n_b, cfg.n_tx))
                        + 1j * gen.standard_normal((cfg.n_sc, cfg.n_b, cfg.n_tx))) / np.sqrt(2)
        else:
            h[lo:hi] = fixed_h
        unit_noise[lo:hi] = (gen.standard_normal((cfg.n_sc, cfg.n_b))
                             + 1j * gen.standard_normal((cfg.n_sc, cfg.n_b))) / np.sqrt(2)
        if pilot_noise is not None:
            pilot_noise[lo:hi] = (gen.standard_normal((cfg.n_sc, cfg.n_tx, cfg.n_b))
                                  + 1j * gen.standard_normal((cfg.n_sc, cfg.n_tx, cfg.n_b))) / np.sqrt(2)
    return bits, h, unit_noise, pilot_noise


def _estimated_channel(h, pilot_noise, sigma2: float, mode: Mode,
                       stats: NumericStats | None):
    """LSE estimate from one all-ones pilot per transmit port: port j's
    pilot observation is H[:, j] + noise at the data-symbol noise level,
    estimated via the outer-product kernel with reciprocal 1."""
    y_pilot = np.swapaxes(h, -2, -1) + pilot_noise * np.sqrt(sigma2)
    recip = np.ones(y_pilot.shape[:-1] + (1,), dtype=np.complex128)
    est = channel_estimate(y_pilot, recip, mode, stats)[..., 0]
    return np.swapaxes(est, -2, -1)


def ber_sweep(cfg: LinkConfig, n_workers: int | None = None,
              stats: NumericStats | None = None) -> list:
    """Run the sweep; returns BerPoint rows ordered mode-major, SNR-minor."""
    bits, h, unit_noise, pilot_noise = _draw_trials(cfg)
    x = qam16_mod(bits)
    n_prob = x.shape[0]
    rows = []
    for mode in cfg.modes:
        for snr_db in cfg.snr_db:
            sigma2 = cfg.n_tx / (10.0 ** (snr_db / 10.0))
            y = np.einsum("bij,bj->bi", h, x) + unit_noise * np.sqrt(sigma2)
            if cfg.channel_knowledge == "lse":
                h_det = _estimated_channel(h, pilot_noise, sigma2, mode, stats)
            else:
                h_det = h
            xh, errors = batch_mmse_arrays(h_det, y, sigma2, mode,
                                           stats=stats, n_workers=n_workers)
            keep = np.ones(n_prob, dtype=bool)
            for e in errors:
                keep[e.index] = False
            bh = qam16_demod_hard(xh[keep])
            nerr = int(np.count_nonzero(bh != bits[keep]))
            kept = int(keep.sum())
            rows.append(BerPoint(
                mode=mode, n_b=cfg.n_b, n_tx=cfg.n_tx, snr_db=snr_db,
                trials=n_prob, bit_errors=nerr,
                ber=nerr / (4.0 * cfg.n_tx * kept) if kept else float("nan"),
                discarded=n_prob - kept))
    return rows


def ber_table_csv(rows) -> str:
    """Render sweep rows with the fixed header."""
    buf = io.StringIO()
    buf.write(BER_CSV_HEADER + "\n")
    for r in rows:
        buf.write(f"{r.mode.value},{r.n_b},{r.n_tx},{r.snr_db:g},"
                  f"{r.trials},{r.bit_errors},{r.ber:.6e},{r.discarded}\n")
    return buf.getvalue()

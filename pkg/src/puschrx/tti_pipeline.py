"""One 14-symbol uplink TTI: transform, beamform, estimate, detect.

The pipeline runs the same arithmetic regardless of buffering strategy;
strategies differ only in which transfers the schedule lists (and, when a
transfer cost is configured, in modeled latency). Detected symbols are
therefore bit-identical across strategies, worker counts and batch splits.

Metrics are analytic: per-kernel cycle and power figures are inputs read
from a table (a measured set ships as package data), never computed here.
Throughput follows streams x 32 bit x subcarriers / cycles x clock, with
transform/beamform steps counting receive streams and estimate/detect
steps counting layer streams.

Fixed-point note: the transform's output carries a 1/n block scale, so the
chain inserts one exact power-of-two renormalization over the whole
14-symbol block before beamforming (bookkeeping only; every renormalized
value stays on the Q15 grid, and pilot/data symbols keep their relative
scale). sigma2 arrives in unit-gain transform units; the detector's
regularizer is scaled by the squared chain gain internally.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

from .numerics import Mode, NumericStats, Q15_MAX, Q15_ONE, narrow_f16_batch, \
    q15_array_from_complex, q15_array_to_complex, wrap_i32
from .ofdm import make_plan, batch_fft
from .beamforming import BeamformerCoeffs, beamform
from .mimo_detect import batch_mmse_arrays, channel_estimate

IQ_BITS = 32            # 16-bit I + 16-bit Q per sample


class Buffering(str, Enum):
    PER_SYMBOL_L2 = "per_symbol_l2"
    L1_RESIDENT = "l1_resident"
    DOUBLE_BUFFERED = "double_buffered"

    @classmethod
    def parse(cls, text: str) -> "Buffering":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown buffering strategy {text!r}: "
                             f"expected one of {[b.value for b in cls]}") from None


def load_cycle_power_table(path=None):
    """Read (step, mode) -> (cycles, watts) from CSV. Defaults to the
    shipped measured table."""
    if path is None:
        text = resources.files("puschrx.data").joinpath(
            "cycle_power_table.csv").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    cycles, watts = {}, {}
    for row in csv.DictReader(io.StringIO(text)):
        key = (row["step"].strip(), row["mode"].strip())
        cycles[key] = int(row["cycles"])
        watts[key] = float(row["watts"])
    return cycles, watts


def _table_mode(kernel: str, mode: Mode) -> str | None:
    """Hardware table column for a chain mode; the f16 build pairs the
    widening-float chain with the fused beamformer."""
    if mode is Mode.Q16:
        return "q16"
    if mode in (Mode.F16, Mode.CF16):
        return "cf16" if kernel == "bf" else "f16"
    return None


@dataclass(frozen=True)
class TtiConfig:
    n_rx: int = 64
    n_b: int = 32
    n_tx: int = 4
    n_sc: int = 4096
    delta_f: float = 15e3
    symbols_per_tti: int = 14
    dmrs_symbols: tuple = (0, 1)
    mode: Mode = Mode.F16
    buffering: Buffering = Buffering.L1_RESIDENT
    f_ck: float = 800e6
    cycle_table: dict | None = None        # (step, mode) -> cycles
    power_table: dict | None = None        # (step, mode) -> watts
    che_combine: str = "average"           # or "nearest"
    window: int = 7                        # pipeline window length in symbols
    recompute_dmrs_second_window: bool = False
    transfer_cycles_per_word: float = 0.0  # model input; 0 = transfers free

    def __post_init__(self):
        if self.delta_f <= 0:
            raise ValueError("delta_f must be > 0")
        if not self.dmrs_symbols:
            raise ValueError("need at least one pilot symbol")
        for s in self.dmrs_symbols:
            if not 0 <= s < self.symbols_per_tti:
                raise ValueError(f"pilot symbol index {s} outside "
                                 f"[0, {self.symbols_per_tti})")
        if self.che_combine not in ("average", "nearest"):
            raise ValueError(f"unknown che_combine {self.che_combine!r}")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        object.__setattr__(self, "mode",
                           Mode.parse(self.mode) if not isinstance(self.mode, Mode) else self.mode)
        object.__setattr__(self, "buffering",
                           Buffering.parse(self.buffering)
                           if not isinstance(self.buffering, Buffering) else self.buffering)
        object.__setattr__(self, "dmrs_symbols", tuple(sorted(self.dmrs_symbols)))

    @property
    def data_symbols(self) -> tuple:
        return tuple(s for s in range(self.symbols_per_tti)
                     if s not in self.dmrs_symbols)

    @property
    def tti_budget_s(self) -> float:
        # one slot is 1 ms at 15 kHz spacing; halves per numerology step
        return 1e-3 * (15e3 / self.delta_f)


@dataclass(frozen=True)
class Transfer:
    kernel: str
    symbol: int
    what: str          # coeffs | grid_in | fft_out | bf_out | che_out | mmse_out
    direction: str     # load | store
    words: int


@dataclass(frozen=True)
class Step:
    index: int
    symbol: int
    kernel: str        # fft | bf | che | mmse
    streams: int       # stream count for the throughput formula
    inputs_residency: str
    outputs_residency: str
    transfers: tuple   # Transfer events attached to this step


@dataclass(frozen=True)
class TtiSchedule:
    cfg: TtiConfig
    steps: tuple

    def transfers(self, what: str | None = None):
        out = []
        for s in self.steps:
            for t in s.transfers:
                if what is None or t.what == what:
                    out.append(t)
        return out

    def validate(self):
        """Dependency ordering: fft(s) < bf(s) < mmse(s), and every detect
        step follows all pilot-estimate steps it consumes."""
        pos = {}
        for i, s in enumerate(self.steps):
            pos[(s.kernel, s.symbol)] = i
        che_syms = sorted(s.symbol for s in self.steps if s.kernel == "che")
        for s in self.steps:
            if s.kernel in ("bf", "che", "mmse"):
                if pos[("fft", s.symbol)] > pos[(s.kernel, s.symbol)]:
                    raise AssertionError(f"fft after {s.kernel} at symbol {s.symbol}")
            if s.kernel in ("che", "mmse"):
                if pos[("bf", s.symbol)] > pos[(s.kernel, s.symbol)]:
                    raise AssertionError(f"bf after {s.kernel} at symbol {s.symbol}")
            if s.kernel == "mmse":
                if self.cfg.che_combine == "average":
                    used = self.cfg.dmrs_symbols
                else:
                    used = (min(self.cfg.dmrs_symbols,
                                key=lambda d: (abs(s.symbol - d), d)),)
                for d in used:
                    che_steps = [i for i, st in enumerate(self.steps)
                                 if st.kernel == "che" and st.symbol == d]
                    if not che_steps:
                        raise AssertionError(f"no estimate step for pilot {d}")
                    if min(che_steps) > pos[("mmse", s.symbol)]:
                        raise AssertionError(
                            f"estimate of pilot {d} after detect of symbol {s.symbol}")
        if not che_syms:
            raise AssertionError("schedule has no estimate step")
        for s in self.cfg.data_symbols:
            if ("mmse", s) not in pos:
                raise AssertionError(f"no detect step for data symbol {s}")
        return True


def build_schedule(cfg: TtiConfig) -> TtiSchedule:
    """Order steps window by window; pilots of the first window are
    processed before any detect step that consumes them."""
    per_l2 = cfg.buffering is Buffering.PER_SYMBOL_L2
    grid_words = cfg.n_rx * cfg.n_sc
    bf_words = cfg.n_b * cfg.n_sc
    che_words = cfg.n_b * cfg.n_tx * cfg.n_sc
    coeff_words = cfg.n_b * cfg.n_rx
    steps = []
    coeffs_loaded = False
    estimates_done = set()

    def add(symbol, kernel, streams, transfers):
        steps.append(Step(len(steps), symbol, kernel, streams,
                          "L2" if per_l2 else "L1",
                          "L2" if per_l2 else "L1", tuple(transfers)))

    def needed_pilots(s):
        if cfg.che_combine == "average":
            return cfg.dmrs_symbols
        return (min(cfg.dmrs_symbols, key=lambda d: (abs(s - d), d)),)

    def add_che(symbol):
        tr = []
        if per_l2:
            tr.append(Transfer("che", symbol, "bf_out", "load", bf_words))
            tr.append(Transfer("che", symbol, "che_out", "store", che_words))
        add(symbol, "che", cfg.n_tx, tr)
        estimates_done.add(symbol)

    windows = [range(w, min(w + cfg.window, cfg.symbols_per_tti))
               for w in range(0, cfg.symbols_per_tti, cfg.window)]
    pending = []
    for wi, window in enumerate(windows):
        for s in window:
            tr = [Transfer("fft", s, "grid_in", "load", grid_words)]
            if per_l2:
                tr.append(Transfer("fft", s, "fft_out", "store", grid_words))
            add(s, "fft", cfg.n_rx, tr)
            tr = []
            if per_l2:
                tr.append(Transfer("bf", s, "fft_out", "load", grid_words))
            if per_l2 or not coeffs_loaded:
                tr.append(Transfer("bf", s, "coeffs", "load", coeff_words))
                coeffs_loaded = True
            if per_l2:
                tr.append(Transfer("bf", s, "bf_out", "store", bf_words))
            add(s, "bf", cfg.n_rx, tr)
        if wi and cfg.recompute_dmrs_second_window:
            for d in cfg.dmrs_symbols:   # refresh rather than hold across windows
                if d < window.start:
                    add_che(d)
        for s in window:
            if s in cfg.dmrs_symbols and s not in estimates_done:
                add_che(s)
        # detect once every pilot a symbol combines is in; a pilot in a later
        # window holds the dependent data symbols back until that window
        pending.extend(s for s in window if s not in cfg.dmrs_symbols)
        ready = [s for s in pending
                 if all(d in estimates_done for d in needed_pilots(s))]
        for s in ready:
            tr = []
            if per_l2:
                tr.append(Transfer("mmse", s, "bf_out", "load", bf_words))
                for d in cfg.dmrs_symbols:
                    tr.append(Transfer("mmse", s, "che_out", "load", che_words))
            tr.append(Transfer("mmse", s, "mmse_out", "store",
                               cfg.n_tx * cfg.n_sc))
            add(s, "mmse", cfg.n_tx, tr)
        pending = [s for s in pending if s not in ready]
    sched = TtiSchedule(cfg, tuple(steps))
    sched.validate()
    return sched


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass
class StepMetrics:
    kernel: str
    symbol: int
    cycles: int
    seconds: float
    bits: int
    throughput_bps: float
    watts: float
    energy_j: float


@dataclass
class MetricsReport:
    steps: list
    total_cycles: int
    compute_seconds: float
    stall_seconds: float
    latency_s: float
    total_bits: int
    throughput_bps: float
    energy_j: float
    power_w: float
    efficiency_bps_per_w: float
    budget_s: float
    over_budget: bool
    overlap_fraction: float

    def kernel_breakdown(self) -> dict:
        agg = {}
        for s in self.steps:
            c, e = agg.get(s.kernel, (0, 0.0))
            agg[s.kernel] = (c + s.cycles, e + s.energy_j)
        return agg

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("step,symbol,cycles,seconds,bits,throughput_gbps,watts,energy_j\n")
        for s in self.steps:
            buf.write(f"{s.kernel},{s.symbol},{s.cycles},{s.seconds:.9f},"
                      f"{s.bits},{s.throughput_bps/1e9:.4f},{s.watts:.3f},"
                      f"{s.energy_j:.6e}\n")
        buf.write(f"total,,{self.total_cycles},{self.latency_s:.9f},{self.total_bits},"
                  f"{self.throughput_bps/1e9:.4f},{self.power_w:.3f},{self.energy_j:.6e}\n")
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [
            f"latency        {self.latency_s*1e3:.3f} ms"
            + (f" (compute {self.compute_seconds*1e3:.3f} + stalls "
               f"{self.stall_seconds*1e3:.3f})" if self.stall_seconds else ""),
            f"budget         {self.budget_s*1e3:.3f} ms"
            + ("  EXCEEDED" if self.over_budget else "  ok"),
            f"throughput     {self.throughput_bps/1e9:.2f} Gbit/s",
            f"power          {self.power_w:.3f} W",
            f"energy         {self.energy_j*1e3:.3f} mJ",
            f"efficiency     {self.efficiency_bps_per_w/1e9:.3f} Gbit/s/W",
        ]
        if self.overlap_fraction:
            lines.append(f"overlap        {self.overlap_fraction*100:.1f}% of transfer hidden")
        for k, (c, e) in self.kernel_breakdown().items():
            lines.append(f"  {k:5s} {c:>9d} cycles  {e*1e3:8.3f} mJ")
        return "\n".join(lines)


def throughput(n_streams: int, iq_bits: int, n_sc: int, cycles: int,
               f_ck: float) -> float:
    """bit/s = streams x bits-per-sample x subcarriers / cycles x clock."""
    if cycles <= 0:
        raise ValueError("cycles must be > 0")
    return n_streams * iq_bits * n_sc / cycles * f_ck


def energy_report(schedule: TtiSchedule, cycle_table: dict,
                  power_table: dict, f_ck: float) -> MetricsReport:
    """Fold the per-step tables over a schedule; raises KeyError naming
    any step the tables do not cover."""
    cfg = schedule.cfg
    steps = []
    compute_s = 0.0
    energy = 0.0
    stall_s = 0.0
    hidden = 0.0
    total_transfer_s = 0.0
    prev_compute = None
    for s in schedule.steps:
        key = (s.kernel, _table_mode(s.kernel, cfg.mode))
        if key[1] is None or key not in cycle_table or key not in power_table:
            raise KeyError(f"cycle/power tables missing entry for step "
                           f"{s.kernel!r} in mode {cfg.mode.value!r}")
        cyc = cycle_table[key]
        sec = cyc / f_ck
        bits = s.streams * IQ_BITS * cfg.n_sc
        watts = power_table[key]
        steps.append(StepMetrics(s.kernel, s.symbol, cyc, sec, bits,
                                 throughput(s.streams, IQ_BITS, cfg.n_sc, cyc, f_ck),
                                 watts, sec * watts))
        compute_s += sec
        energy += sec * watts
        tr_words = sum(t.words for t in s.transfers)
        tr_s = tr_words * cfg.transfer_cycles_per_word / f_ck
        total_transfer_s += tr_s
        if cfg.buffering is Buffering.DOUBLE_BUFFERED and prev_compute is not None:
            stall = max(0.0, tr_s - prev_compute)
            hidden += tr_s - stall
            stall_s += stall
        else:
            stall_s += tr_s
        prev_compute = sec
    latency = compute_s + stall_s
    total_bits = cfg.n_rx * IQ_BITS * cfg.n_sc * cfg.symbols_per_tti
    return MetricsReport(
        steps=steps, total_cycles=sum(s.cycles for s in steps),
        compute_seconds=compute_s, stall_seconds=stall_s, latency_s=latency,
        total_bits=total_bits, throughput_bps=total_bits / latency,
        energy_j=energy, power_w=energy / latency,
        efficiency_bps_per_w=(total_bits / latency) / (energy / latency),
        budget_s=cfg.tti_budget_s, over_budget=latency > cfg.tti_budget_s,
        overlap_fraction=(hidden / total_transfer_s) if total_transfer_s else 0.0)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def _block_renormalize_q16(rows: np.ndarray) -> tuple[np.ndarray, int]:
    """Exact power-of-two up-scale of Q15-grid values so the block maximum
    fills the grid; pure bookkeeping, no rounding.  Returns the shift.

    One shift for the whole block: pilot and data symbols must keep their
    relative scale or the detector output picks up a spurious power of two.
    """
    re, im = q15_array_from_complex(rows)
    m = max(int(np.abs(re).max()), int(np.abs(im).max()))
    if m == 0:
        return rows, 0
    k = 0
    while (m << (k + 1)) <= Q15_MAX:
        k += 1
    if k == 0:
        return rows, 0
    return q15_array_to_complex(re << k, im << k), k


def _combine_estimates(est: np.ndarray, dmrs: tuple, data_symbol: int,
                       how: str, mode: Mode) -> np.ndarray:
    """est has one (n_sc, n_b, n_tx) slab per pilot symbol."""
    if how == "nearest" or len(dmrs) == 1:
        pick = min(range(len(dmrs)), key=lambda i: (abs(data_symbol - dmrs[i]), dmrs[i]))
        return est[pick]
    if mode is Mode.Q16:
        re, im = q15_array_from_complex(est)
        sr = np.zeros_like(re[0])
        si = np.zeros_like(im[0])
        for i in range(len(dmrs)):       # wide add, then arithmetic shift
            sr = wrap_i32(sr + re[i])
            si = wrap_i32(si + im[i])
        if len(dmrs) == 2:
            return q15_array_to_complex(sr >> 1, si >> 1)
        return q15_array_to_complex(np.rint(sr / len(dmrs)).astype(np.int64),
                                    np.rint(si / len(dmrs)).astype(np.int64))
    if mode is Mode.REF64:
        acc = np.zeros_like(est[0])
        for i in range(len(dmrs)):
            acc = acc + est[i]
        return acc / len(dmrs)
    acc = np.zeros(est.shape[1:], dtype=np.complex64)
    for i in range(len(dmrs)):
        acc = acc + est[i].astype(np.complex64)
    return narrow_f16_batch(acc * np.float32(1.0 / len(dmrs))).astype(np.complex128)


@dataclass
class TtiResult:
    detected: np.ndarray          # (n_data_symbols, n_sc, n_tx)
    data_symbol_indices: tuple
    estimates: np.ndarray         # (n_dmrs, n_sc, n_b, n_tx)
    detect_errors: list           # (symbol, subcarrier, pivot) triples
    metrics: MetricsReport | None
    schedule: TtiSchedule
    stats: NumericStats


def run_tti(cfg: TtiConfig, grid: np.ndarray, pilot_recip: np.ndarray,
            coeffs: BeamformerCoeffs, sigma2: float,
            n_workers: int | None = None) -> TtiResult:
    """Process one TTI of time-domain samples.

    grid: (symbols, n_rx, n_sc) time-domain rows; pilot_recip: reciprocal
    pilot values, broadcastable to (n_dmrs, n_sc, n_tx). Per-subcarrier
    detection failures are collected, never raised.
    """
    grid = np.asarray(grid, dtype=np.complex128)
    want = (cfg.symbols_per_tti, cfg.n_rx, cfg.n_sc)
    if grid.shape != want:
        raise ValueError(f"grid shape {grid.shape}, config wants {want}")
    if coeffs.a.shape != (cfg.n_b, cfg.n_rx):
        raise ValueError(f"coefficients are {coeffs.a.shape}, config wants "
                         f"({cfg.n_b}, {cfg.n_rx})")
    recip = np.broadcast_to(np.asarray(pilot_recip, dtype=np.complex128),
                            (len(cfg.dmrs_symbols), cfg.n_sc, cfg.n_tx))
    schedule = build_schedule(cfg)
    stats = NumericStats()
    mode = cfg.mode

    plan = make_plan(cfg.n_sc, mode)
    freq = batch_fft(plan, grid.reshape(-1, cfg.n_sc), mode)
    freq = freq.reshape(cfg.symbols_per_tti, cfg.n_rx, cfg.n_sc)
    # sigma2 arrives in unit-gain transform units; the fixed-point transform
    # scales by 1/n and the renormalization by 2^k, so the regularizer must
    # follow the squared chain gain to stay a faithful noise variance.
    chain_gain = 1.0
    if mode is Mode.Q16:
        freq, shift = _block_renormalize_q16(freq)
        chain_gain = float(2 ** shift) / cfg.n_sc

    beam = np.empty((cfg.symbols_per_tti, cfg.n_b, cfg.n_sc), dtype=np.complex128)
    for s in range(cfg.symbols_per_tti):
        beam[s] = beamform(coeffs, freq[s], mode, stats=stats, n_workers=n_workers)

    est = np.empty((len(cfg.dmrs_symbols), cfg.n_sc, cfg.n_b, cfg.n_tx),
                   dtype=np.complex128)
    for i, d in enumerate(cfg.dmrs_symbols):
        est[i] = channel_estimate(beam[d].T, recip[i], mode, stats=stats)

    data_syms = cfg.data_symbols
    detected = np.empty((len(data_syms), cfg.n_sc, cfg.n_tx), dtype=np.complex128)
    detect_errors = []
    for k, s in enumerate(data_syms):
        h = _combine_estimates(est, cfg.dmrs_symbols, s, cfg.che_combine, mode)
        xh, errs = batch_mmse_arrays(h, beam[s].T, sigma2 * chain_gain ** 2,
                                     mode, stats=stats, n_workers=n_workers)
        detected[k] = xh
        detect_errors.extend((s, e.index, e.pivot) for e in errs)

    metrics = None
    if _table_mode("fft", mode) is not None:
        ct = cfg.cycle_table
        pt = cfg.power_table
        if ct is None or pt is None:
            dct, dpt = load_cycle_power_table()
            ct = ct if ct is not None else dct
            pt = pt if pt is not None else dpt
        metrics = energy_report(schedule, ct, pt, cfg.f_ck)
    return TtiResult(detected, data_syms, est, detect_errors, metrics,
                     schedule, stats)


def oracle_tti(cfg: TtiConfig, grid: np.ndarray, pilot_recip: np.ndarray,
               coeffs: BeamformerCoeffs, sigma2: float) -> np.ndarray:
    """Independent-route reference chain built on library transforms and
    direct inversion; mirrors run_tti's REF64 semantics."""
    grid = np.asarray(grid, dtype=np.complex128)
    recip = np.broadcast_to(np.asarray(pilot_recip, dtype=np.complex128),
                            (len(cfg.dmrs_symbols), cfg.n_sc, cfg.n_tx))
    freq = np.fft.fft(grid, axis=-1)
    beam = np.einsum("br,srn->sbn", coeffs.a, freq)
    est = np.stack([beam[d].T[:, :, None] * recip[i][:, None, :]
                    for i, d in enumerate(cfg.dmrs_symbols)])
    out = []
    for s in cfg.data_symbols:
        if cfg.che_combine == "nearest" or len(cfg.dmrs_symbols) == 1:
            pick = min(range(len(cfg.dmrs_symbols)),
                       key=lambda i: (abs(s - cfg.dmrs_symbols[i]), cfg.dmrs_symbols[i]))
            h = est[pick]
        else:
            h = est.mean(axis=0)
        y = beam[s].T
        hh = np.conj(np.swapaxes(h, -2, -1))
        g = hh @ h + sigma2 * np.eye(cfg.n_tx)
        out.append(np.linalg.solve(g, (hh @ y[..., None]))[..., 0])
    return np.stack(out)

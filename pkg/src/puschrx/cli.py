"""Command-line front end.

Subcommands: kernel-bench, ber, tti, plan. Every run writes its outputs
plus a manifest.json into --out; delimited files carry a trailing comment
naming the manifest. Exit codes: 0 success, 1 numerical failure recorded,
2 usage or config error.

Worker count for parallel kernels comes from the PUSCHRX_WORKERS
environment variable (default: number of logical processors).
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .numerics import Mode, NumericStats
from .ofdm import make_plan, batch_fft
from .beamforming import BeamformerCoeffs, beamform, op_count, default_window
from .mimo_detect import batch_mmse_arrays, channel_estimate
from .link_sim import LinkConfig, ber_sweep, ber_table_csv, qam16_mod, qam16_demod_hard
from .spmd_plan import Topology, plan_fft, plan_beamform, plan_per_subcarrier
from .tti_pipeline import (Buffering, TtiConfig, build_schedule, energy_report,
                           load_cycle_power_table, run_tti, throughput, IQ_BITS)
from .io_formats import RunManifest, content_hash, manifest_trailer, write_matrix
from . import figures
from .workers import WORKERS_ENV  # noqa: F401  (documented contract)


class ConfigError(Exception):
    pass


def parse_config(path: str) -> dict:
    """key=value lines; # starts a comment; blank lines ignored."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip().lower()] = val.strip()
    return out


def _get(cfg: dict, key: str, conv, default):
    if key not in cfg:
        return default
    try:
        return conv(cfg[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


def _csv_floats(s: str) -> tuple:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _csv_ints(s: str) -> tuple:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _modes(s: str) -> tuple:
    return tuple(Mode.parse(v) for v in s.split(",") if v.strip())


def _new_manifest(args, command: str, cfg_text: str, seed: int) -> RunManifest:
    return RunManifest(
        command=command, config_path=getattr(args, "config", None),
        seed=seed, out_dir=str(args.out), tool_version=__version__,
        content_hash=content_hash([command, cfg_text, str(seed)]))


def _finish(manifest: RunManifest, out_dir: str, csv_paths: list) -> None:
    name = "manifest.json"
    for p in csv_paths:
        with open(p, "a", encoding="utf-8") as fh:
            fh.write(manifest_trailer(name, manifest.content_hash))
    for fname in sorted(os.listdir(out_dir)):
        p = os.path.join(out_dir, fname)
        if os.path.isfile(p) and fname != name:
            manifest.register(p)
    manifest.write(os.path.join(out_dir, name))


def _seed_of(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in cfg:
        return int(cfg["seed"])
    return int.from_bytes(os.urandom(4), "little")


def _dims(text: str, n: int, what: str) -> tuple:
    parts = text.lower().replace("x", " ").split()
    if len(parts) != n:
        raise ConfigError(f"--dims for {what} wants {n} numbers, got {text!r}")
    return tuple(int(p) for p in parts)


# ---------------------------------------------------------------------------
# kernel-bench
# ---------------------------------------------------------------------------

def _bench_once(kernel: str, dims: tuple, mode: Mode, rng) -> tuple:
    """Returns (wall_ns, extra dict)."""
    stats = NumericStats()
    if kernel == "fft":
        (n,) = dims
        plan = make_plan(n, mode)
        rows = (rng.standard_normal((8, n)) + 1j * rng.standard_normal((8, n))) * 0.2
        t0 = time.perf_counter_ns()
        batch_fft(plan, rows, mode)
        return time.perf_counter_ns() - t0, {}
    if kernel == "bf":
        n_b, n_rx, n_sc = dims
        a = (rng.standard_normal((n_b, n_rx)) + 1j * rng.standard_normal((n_b, n_rx))) / np.sqrt(2 * n_rx)
        b = (rng.standard_normal((n_rx, n_sc)) + 1j * rng.standard_normal((n_rx, n_sc))) * 0.3
        co = BeamformerCoeffs(a)
        t0 = time.perf_counter_ns()
        beamform(co, b, mode, stats=stats)
        dt = time.perf_counter_ns() - t0
        ops = op_count((n_b, n_rx, n_sc), default_window(mode), mode)
        return dt, {"macs": ops["macs"], "fused_ops": ops.get("fused_ops", 0)}
    if kernel == "che":
        n_b, n_tx, n_sc = dims
        y = (rng.standard_normal((n_sc, n_b)) + 1j * rng.standard_normal((n_sc, n_b))) * 0.3
        recip = np.exp(-1j * rng.uniform(0, 2 * np.pi, (n_sc, n_tx)))
        t0 = time.perf_counter_ns()
        channel_estimate(y, recip, mode, stats)
        return time.perf_counter_ns() - t0, {}
    n_b, n_tx, n_prob = dims
    h = (rng.standard_normal((n_prob, n_b, n_tx)) + 1j * rng.standard_normal((n_prob, n_b, n_tx))) / np.sqrt(2)
    y = (rng.standard_normal((n_prob, n_b)) + 1j * rng.standard_normal((n_prob, n_b))) / np.sqrt(2)
    t0 = time.perf_counter_ns()
    _, errs = batch_mmse_arrays(h, y, 0.1, mode, stats=stats)
    dt = time.perf_counter_ns() - t0
    return dt, {"detect_errors": len(errs)}


_BENCH_DIMS = {"fft": (1, "n"), "bf": (3, "n_b x n_rx x n_sc"),
               "che": (3, "n_b x n_tx x n_sc"), "mmse": (3, "n_b x n_tx x n_problems")}


def cmd_kernel_bench(args) -> int:
    mode = Mode.parse(args.mode)
    nd, shape_doc = _BENCH_DIMS[args.kernel]
    dims = _dims(args.dims, nd, f"{args.kernel} ({shape_doc})")
    seed = args.seed if args.seed is not None else int.from_bytes(os.urandom(4), "little")
    rng = np.random.default_rng(seed)
    cycles_tab, _ = load_cycle_power_table(args.table)
    from .tti_pipeline import _table_mode
    hw = _table_mode(args.kernel, mode)
    rows = []
    for rep in range(args.reps):
        wall_ns, extra = _bench_once(args.kernel, dims, mode, rng)
        rows.append((rep, wall_ns, extra))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "kernel_bench.csv")
    extra_keys = sorted({k for _, _, e in rows for k in e})
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("kernel,mode,dims,rep,wall_ns,table_throughput_gbps"
                 + "".join(f",{k}" for k in extra_keys) + "\n")
        for rep, wall_ns, extra in rows:
            if hw is not None and (args.kernel, hw) in cycles_tab:
                # receive streams for fft/bf, layer count for che/mmse
                n_streams = 64 if args.kernel == "fft" else dims[1]
                n_sc = dims[-1] if args.kernel != "fft" else dims[0]
                thpt = throughput(n_streams, IQ_BITS, n_sc,
                                  cycles_tab[(args.kernel, hw)], 800e6) / 1e9
                tcol = f"{thpt:.2f}"
            else:
                tcol = ""
            fh.write(f"{args.kernel},{mode.value},{args.dims},{rep},{wall_ns},{tcol}"
                     + "".join(f",{extra.get(k, '')}" for k in extra_keys) + "\n")
    manifest = _new_manifest(args, "kernel-bench", f"{args.kernel} {args.dims} {mode.value}", seed)
    _finish(manifest, args.out, [path])
    print(path)
    return 0


# ---------------------------------------------------------------------------
# ber
# ---------------------------------------------------------------------------

def _link_config(cfg: dict, seed: int) -> LinkConfig:
    return LinkConfig(
        n_tx=_get(cfg, "n_tx", int, 4),
        n_b=_get(cfg, "n_b", int, 4),
        n_sc=_get(cfg, "n_sc", int, 1),
        snr_db=_get(cfg, "snr_db", _csv_floats, (10.0,)),
        trials=_get(cfg, "trials", int, 1000),
        seed=seed,
        modes=_get(cfg, "modes", _modes, (Mode.Q16, Mode.F16, Mode.REF64)),
        channel_source=_get(cfg, "channel_source", str, "random-gaussian"),
        channel_file=_get(cfg, "channel_file", str, None),
        channel_knowledge=_get(cfg, "channel_knowledge", str, "genie"))


def cmd_ber(args) -> int:
    cfg_text = ""
    cfg_dict = {}
    if args.config:
        cfg_dict = parse_config(args.config)
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg_text = fh.read()
    seed = _seed_of(args, cfg_dict)
    try:
        link = _link_config(cfg_dict, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = ber_sweep(link)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "fig9_ber.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(ber_table_csv(rows))
    figures.render_ber_figure(rows, os.path.join(args.out, "fig9_ber.png"))
    manifest = _new_manifest(args, "ber", cfg_text, seed)
    _finish(manifest, args.out, [csv_path])
    print(csv_path)
    bad = any(np.isnan(r.ber) or r.discarded == r.trials for r in rows)
    return 1 if bad else 0


# ---------------------------------------------------------------------------
# tti
# ---------------------------------------------------------------------------

def _tti_config(cfg: dict, mode_override: str | None) -> TtiConfig:
    mode = Mode.parse(mode_override) if mode_override else \
        Mode.parse(_get(cfg, "mode", str, "f16"))
    table_path = _get(cfg, "cycle_power_table", str, None)
    ct = pt = None
    if table_path:
        ct, pt = load_cycle_power_table(table_path)
    return TtiConfig(
        n_rx=_get(cfg, "n_rx", int, 64),
        n_b=_get(cfg, "n_b", int, 32),
        n_tx=_get(cfg, "n_tx", int, 4),
        n_sc=_get(cfg, "n_sc", int, 4096),
        delta_f=_get(cfg, "delta_f", float, 15e3),
        dmrs_symbols=_get(cfg, "dmrs_symbols", _csv_ints, (0, 1)),
        mode=mode,
        buffering=Buffering.parse(_get(cfg, "buffering", str, "l1_resident")),
        f_ck=_get(cfg, "f_ck", float, 800e6),
        cycle_table=ct, power_table=pt,
        che_combine=_get(cfg, "che_combine", str, "average"),
        window=_get(cfg, "window", int, 7),
        transfer_cycles_per_word=_get(cfg, "transfer_cycles_per_word", float, 0.0))


def _synth_tti_inputs(cfg: TtiConfig, seed: int, snr_db: float):
    """Loopback scenario: known 16QAM layers through a per-subcarrier
    Gaussian channel, observed in the beam domain and back-projected to
    antenna time samples through the pseudo-inverse of the coefficients."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(99,)))
    a = (rng.standard_normal((cfg.n_b, cfg.n_rx))
         + 1j * rng.standard_normal((cfg.n_b, cfg.n_rx))) / np.sqrt(2 * cfg.n_rx)
    h = (rng.standard_normal((cfg.n_sc, cfg.n_b, cfg.n_tx))
         + 1j * rng.standard_normal((cfg.n_sc, cfg.n_b, cfg.n_tx))) / np.sqrt(2 * cfg.n_b)
    sigma2 = cfg.n_tx / (10.0 ** (snr_db / 10.0)) / cfg.n_b
    bits = rng.integers(0, 2, size=(cfg.symbols_per_tti, cfg.n_sc, cfg.n_tx, 4),
                        dtype=np.uint8)
    x = qam16_mod(bits)
    pilot_recip = np.ones((cfg.n_sc, cfg.n_tx), dtype=np.complex128)
    for d in cfg.dmrs_symbols:
        x[d] = 1.0   # all-ones pilots match the unit reciprocals
    beam = np.einsum("nbt,snt->sbn", h, x)
    noise = (rng.standard_normal(beam.shape) + 1j * rng.standard_normal(beam.shape))
    beam = beam + noise * np.sqrt(sigma2 / 2.0)
    freq = np.einsum("rb,sbn->srn", np.linalg.pinv(a), beam)
    grid = np.fft.ifft(freq, axis=-1)
    # Near full scale: the fixed-point transform scales by 1/4 per stage, so
    # small inputs leave the output with only a handful of LSBs.  The noise
    # variance rides along with the squared gain.
    gain = 0.9 / max(np.abs(grid.real).max(), np.abs(grid.imag).max())
    return grid * gain, pilot_recip, BeamformerCoeffs(a), sigma2 * gain * gain, bits, x


def cmd_tti(args) -> int:
    cfg_text = ""
    cfg_dict = {}
    if args.config:
        cfg_dict = parse_config(args.config)
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg_text = fh.read()
    try:
        cfg = _tti_config(cfg_dict, args.mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    seed = _seed_of(args, cfg_dict)
    snr_db = _get(cfg_dict, "snr_db", float, 20.0)
    grid, recip, coeffs, sigma2, bits, _ = _synth_tti_inputs(cfg, seed, snr_db)
    result = run_tti(cfg, grid, recip, coeffs, sigma2)
    os.makedirs(args.out, exist_ok=True)

    dump = os.path.join(args.out, "detected_symbols.bin")
    write_matrix(dump, result.detected.reshape(-1, cfg.n_tx), cfg.mode, seed)
    data_bits = bits[list(result.data_symbol_indices)]
    ber = float(np.mean(qam16_demod_hard(result.detected) != data_bits))

    csv_paths = []
    txt_path = os.path.join(args.out, "metrics.txt")
    lines = [f"mode {cfg.mode.value}, buffering {cfg.buffering.value}",
             f"loopback uncoded BER {ber:.3e} over "
             f"{len(result.data_symbol_indices)} data symbols",
             f"detect errors {len(result.detect_errors)}"]
    if result.metrics is not None:
        mpath = os.path.join(args.out, "metrics.csv")
        with open(mpath, "w", encoding="utf-8") as fh:
            fh.write(result.metrics.to_csv())
        csv_paths.append(mpath)
        lines.append(result.metrics.to_text())
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    # analytic breakdown for both tabulated hardware modes
    ct = cfg.cycle_table
    pt = cfg.power_table
    if ct is None or pt is None:
        ct, pt = load_cycle_power_table()
    reports = []
    for label, m in (("q16", Mode.Q16), ("f16", Mode.F16)):
        c = TtiConfig(n_rx=cfg.n_rx, n_b=cfg.n_b, n_tx=cfg.n_tx, n_sc=cfg.n_sc,
                      delta_f=cfg.delta_f, dmrs_symbols=cfg.dmrs_symbols,
                      mode=m, buffering=cfg.buffering, f_ck=cfg.f_ck)
        reports.append((label, energy_report(build_schedule(c), ct, pt, cfg.f_ck)))
    bpath = os.path.join(args.out, "fig12_energy_breakdown.csv")
    with open(bpath, "w", encoding="utf-8") as fh:
        fh.write("mode,step,cycles,energy_j,time_share,energy_share,"
                 "tti_gbps,tti_w,tti_gbps_per_w\n")
        for label, rep in reports:
            br = rep.kernel_breakdown()
            tot_c = sum(c for c, _ in br.values())
            tot_e = sum(e for _, e in br.values())
            for k, (c, e) in br.items():
                fh.write(f"{label},{k},{c},{e:.6e},{c/tot_c:.4f},{e/tot_e:.4f},"
                         f"{rep.throughput_bps/1e9:.2f},{rep.power_w:.3f},"
                         f"{rep.efficiency_bps_per_w/1e9:.3f}\n")
    csv_paths.append(bpath)
    figures.render_energy_breakdown_figure(
        reports, os.path.join(args.out, "fig12_energy_breakdown.png"))

    manifest = _new_manifest(args, "tti", cfg_text, seed)
    _finish(manifest, args.out, csv_paths)
    print(txt_path)
    if result.detect_errors or not np.isfinite(result.detected.view(np.float64)).all():
        return 1
    return 0


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------

def _topology(path: str | None) -> Topology:
    if not path:
        return Topology()
    cfg = parse_config(path)
    kwargs = {}
    for key in ("cores", "banks", "cores_per_tile", "tiles_per_subgroup",
                "subgroups_per_group", "groups", "row_capacity"):
        if key in cfg:
            kwargs[key] = int(cfg[key])
    try:
        return Topology(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"bad topology: {exc}") from None


def cmd_plan(args) -> int:
    topo = _topology(args.topology)
    try:
        if args.planner == "fft":
            n, ants = _dims(args.dims, 2, "fft (n x antennas)")
            asg = plan_fft(n, ants, topo)
            expected = ants * (n // 16)
        elif args.planner == "beamform":
            n_b, n_rx, n_sc = _dims(args.dims, 3, "beamform (n_b x n_rx x n_sc)")
            asg = plan_beamform(n_b, n_rx, n_sc, topo)
            expected = n_sc
        else:
            (n_sc,) = _dims(args.dims, 1, "per-subcarrier (n_sc)")
            asg = plan_per_subcarrier(n_sc, topo)
            expected = n_sc
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "assignment.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(asg.to_csv())
    seed = args.seed if args.seed is not None else 0
    manifest = _new_manifest(args, f"plan {args.planner}", args.dims, seed)
    manifest.outputs["meta"] = {k: v for k, v in asg.meta.items()
                                if not isinstance(v, tuple)}
    _finish(manifest, args.out, [path])
    print(path)
    if len(asg.items) != expected:
        print(f"coverage gap: {len(asg.items)} items, expected {expected}",
              file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="puschrx",
        description="Software uplink receive chain: kernels, link simulation, "
                    "partition planning, TTI pipeline.",
        epilog=f"Parallel kernels read the worker count from ${WORKERS_ENV} "
               f"(default: logical processor count).")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    kb = sub.add_parser("kernel-bench", help="time one kernel and report "
                        "table-based throughput")
    kb.add_argument("kernel", choices=("fft", "bf", "che", "mmse"))
    kb.add_argument("--dims", required=True,
                    help="fft: n; bf: n_b x n_rx x n_sc; che: n_b x n_tx x n_sc; "
                         "mmse: n_b x n_tx x n_problems")
    kb.add_argument("--mode", default="f16")
    kb.add_argument("--reps", type=int, default=3)
    kb.add_argument("--seed", type=int)
    kb.add_argument("--table", help="cycle/power table CSV override")
    kb.add_argument("--out", default="puschrx_out")
    kb.set_defaults(fn=cmd_kernel_bench)

    ber = sub.add_parser("ber", help="BER-vs-SNR sweep (fig9 outputs)")
    ber.add_argument("--config", required=True)
    ber.add_argument("--seed", type=int)
    ber.add_argument("--out", default="puschrx_out")
    ber.set_defaults(fn=cmd_ber)

    tti = sub.add_parser("tti", help="one-TTI loopback run with metrics "
                         "(fig12 outputs)")
    tti.add_argument("--config")
    tti.add_argument("--mode", help="override the config's arithmetic mode")
    tti.add_argument("--seed", type=int)
    tti.add_argument("--out", default="puschrx_out")
    tti.set_defaults(fn=cmd_tti)

    pl = sub.add_parser("plan", help="emit a partition plan CSV")
    pl.add_argument("planner", choices=("fft", "beamform", "per-subcarrier"))
    pl.add_argument("--dims", required=True)
    pl.add_argument("--topology", help="topology config file")
    pl.add_argument("--seed", type=int)
    pl.add_argument("--out", default="puschrx_out")
    pl.set_defaults(fn=cmd_plan)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Headless figure rendering tests."""

from puschrx.figures import render_ber_figure, render_energy_breakdown_figure
from puschrx.link_sim import LinkConfig, ber_sweep
from puschrx.numerics import Mode
from puschrx.tti_pipeline import (TtiConfig, build_schedule, energy_report,
                                  load_cycle_power_table)


def test_render_ber_figure(tmp_path):
    rows = ber_sweep(LinkConfig(n_tx=2, n_b=4, n_sc=2, snr_db=(5.0, 25.0),
                                trials=30, seed=1, modes=(Mode.Q16,)))
    path = tmp_path / "ber.png"
    assert render_ber_figure(rows, path) == str(path)
    assert path.stat().st_size > 1000


def test_render_ber_figure_drops_zero_points(tmp_path):
    # all-zero BER must not crash the log axis
    rows = ber_sweep(LinkConfig(n_tx=1, n_b=8, n_sc=1, snr_db=(40.0,),
                                trials=20, seed=1, modes=(Mode.REF64,)))
    assert all(r.ber == 0.0 for r in rows)
    path = tmp_path / "flat.png"
    render_ber_figure(rows, path)
    assert path.stat().st_size > 1000


def test_render_energy_breakdown(tmp_path):
    cycles, watts = load_cycle_power_table()
    reports = []
    for label, mode in (("q16", Mode.Q16), ("f16", Mode.F16)):
        cfg = TtiConfig(mode=mode)
        reports.append((label, energy_report(build_schedule(cfg), cycles,
                                             watts, cfg.f_ck)))
    path = tmp_path / "breakdown.png"
    assert render_energy_breakdown_figure(reports, path) == str(path)
    assert path.stat().st_size > 1000

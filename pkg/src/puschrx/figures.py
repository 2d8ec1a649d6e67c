"""Plot rendering for the report outputs.

Every figure is rendered headless to a file next to the delimited data it
visualizes; nothing here feeds back into computation.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_MODE_STYLE = {
    "q16": dict(color="#c44e52", marker="s"),
    "f16": dict(color="#4c72b0", marker="o"),
    "cf16": dict(color="#55a868", marker="^"),
    "ref64": dict(color="#444444", marker="x", linestyle="--"),
}


def render_ber_figure(rows, path) -> str:
    """Semilog BER-vs-SNR curves, one line per arithmetic mode.

    Zero-error points have no log-scale position; they are dropped from
    the line (the CSV keeps them).
    """
    by_mode = {}
    dims = None
    for r in rows:
        by_mode.setdefault(r.mode.value, []).append(r)
        dims = (r.n_b, r.n_tx)
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for mode, pts in by_mode.items():
        pts = sorted(pts, key=lambda r: r.snr_db)
        xs = [p.snr_db for p in pts if p.ber > 0]
        ys = [p.ber for p in pts if p.ber > 0]
        ax.semilogy(xs, ys, label=mode, **_MODE_STYLE.get(mode, {}))
    ax.set_xlabel("SNR per receive branch [dB]")
    ax.set_ylabel("uncoded BER")
    if dims:
        ax.set_title(f"MMSE detection, {dims[0]}x{dims[1]}, 16QAM")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_energy_breakdown_figure(reports, path) -> str:
    """Stacked runtime and energy shares per kernel, one bar pair per
    labelled report: reports is a list of (label, MetricsReport)."""
    kernels = ("fft", "bf", "che", "mmse")
    colors = dict(zip(kernels, ("#4c72b0", "#dd8452", "#55a868", "#c44e52")))
    labels, bars = [], []
    for label, rep in reports:
        br = rep.kernel_breakdown()
        tot_c = sum(c for c, _ in br.values()) or 1
        tot_e = sum(e for _, e in br.values()) or 1.0
        labels.append(f"{label}\nruntime")
        bars.append([br.get(k, (0, 0.0))[0] / tot_c for k in kernels])
        labels.append(f"{label}\nenergy")
        bars.append([br.get(k, (0, 0.0))[1] / tot_e for k in kernels])
    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(bars), 4.2))
    x = range(len(bars))
    bottom = [0.0] * len(bars)
    for ki, k in enumerate(kernels):
        vals = [b[ki] for b in bars]
        ax.bar(x, vals, bottom=bottom, label=k, color=colors[k], width=0.6)
        bottom = [b + v for b, v in zip(bottom, vals)]
    ax.set_xticks(list(x), labels)
    ax.set_ylabel("share of total")
    ax.set_ylim(0, 1.02)
    ax.legend(ncols=len(kernels), loc="upper center", bbox_to_anchor=(0.5, -0.12))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)

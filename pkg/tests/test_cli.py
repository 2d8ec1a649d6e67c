"""End-to-end command-line tests (subprocess level)."""

import json
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "puschrx.cli"]


def run(*argv):
    return subprocess.run(CLI + list(argv), capture_output=True, text=True)


def test_version():
    r = run("--version")
    assert r.returncode == 0
    assert r.stdout.strip() == "0.1.0"


def test_plan_fft_outputs(tmp_path):
    out = tmp_path / "o"
    r = run("plan", "fft", "--dims", "4096 x 4", "--out", str(out))
    assert r.returncode == 0, r.stderr
    csv = (out / "assignment.csv").read_text().strip().split("\n")
    assert csv[0] == "item,core,locality_class"
    assert len(csv) == 1 + 1024 + 1                   # header, items, trailer
    assert csv[-1].startswith("# manifest: manifest.json run=")
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "plan fft"
    assert "assignment.csv" in man["outputs"]
    assert man["outputs"]["meta"]["cores_per_fft"] == 256


def test_plan_beamform_and_per_subcarrier(tmp_path):
    r = run("plan", "beamform", "--dims", "32x64x128", "--out",
            str(tmp_path / "a"))
    assert r.returncode == 0, r.stderr
    meta = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert meta["outputs"]["meta"]["replicas"] == 2
    r = run("plan", "per-subcarrier", "--dims", "64", "--out",
            str(tmp_path / "b"))
    assert r.returncode == 0, r.stderr


def test_plan_usage_errors(tmp_path):
    assert run("plan", "fft", "--dims", "4096", "--out",
               str(tmp_path)).returncode == 2         # wants n x antennas
    assert run("plan", "fft", "--dims", "8 x 1", "--out",
               str(tmp_path)).returncode == 2         # length below minimum
    assert run("plan", "nonsense", "--dims", "4",
               "--out", str(tmp_path)).returncode == 2


def test_kernel_bench(tmp_path):
    out = tmp_path / "kb"
    r = run("kernel-bench", "bf", "--dims", "8x16x32", "--mode", "cf16",
            "--reps", "2", "--seed", "1", "--out", str(out))
    assert r.returncode == 0, r.stderr
    lines = (out / "kernel_bench.csv").read_text().strip().split("\n")
    assert lines[0] == "kernel,mode,dims,rep,wall_ns,table_throughput_gbps,fused_ops,macs"
    assert len(lines) == 1 + 2 + 1
    first = lines[1].split(",")
    assert first[0] == "bf" and first[1] == "cf16"
    assert first[7] == str(4 * 8 * 16 * 32)           # mac count column
    assert r.stdout.strip().endswith("kernel_bench.csv")


def test_kernel_bench_ref64_has_no_table_column(tmp_path):
    out = tmp_path / "kb"
    r = run("kernel-bench", "fft", "--dims", "64", "--mode", "ref64",
            "--reps", "1", "--seed", "1", "--out", str(out))
    assert r.returncode == 0, r.stderr
    row = (out / "kernel_bench.csv").read_text().strip().split("\n")[1]
    assert row.split(",")[5] == ""                    # no hardware row to quote


@pytest.fixture()
def ber_cfg(tmp_path):
    p = tmp_path / "ber.cfg"
    p.write_text("n_tx = 2\nn_b = 4\nn_sc = 2\nsnr_db = 6, 12\ntrials = 40\n"
                 "seed = 5\nmodes = q16, f16, ref64\n")
    return p


def test_ber_outputs_and_rerun_identical(tmp_path, ber_cfg):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    r1 = run("ber", "--config", str(ber_cfg), "--out", str(out1))
    r2 = run("ber", "--config", str(ber_cfg), "--out", str(out2))
    assert r1.returncode == 0, r1.stderr
    csv1 = (out1 / "fig9_ber.csv").read_bytes()
    assert csv1 == (out2 / "fig9_ber.csv").read_bytes()
    text = csv1.decode()
    assert text.startswith("mode,n_b,n_tx,snr_db,trials,bit_errors,ber,discarded\n")
    assert (out1 / "fig9_ber.png").stat().st_size > 1000
    man = json.loads((out1 / "manifest.json").read_text())
    assert set(man["outputs"]) == {"fig9_ber.csv", "fig9_ber.png"}


def test_ber_config_errors(tmp_path):
    assert run("ber", "--config", str(tmp_path / "missing.cfg"),
               "--out", str(tmp_path)).returncode == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("just words\n")
    assert run("ber", "--config", str(bad), "--out", str(tmp_path)).returncode == 2
    neg = tmp_path / "neg.cfg"
    neg.write_text("trials = 0\n")
    assert run("ber", "--config", str(neg), "--out", str(tmp_path)).returncode == 2


@pytest.fixture()
def tti_cfg(tmp_path):
    p = tmp_path / "tti.cfg"
    p.write_text("n_rx = 8\nn_b = 4\nn_tx = 1\nn_sc = 16\nmode = f16\n"
                 "snr_db = 30\nseed = 9\n")
    return p


def test_tti_outputs(tmp_path, tti_cfg):
    out = tmp_path / "t"
    r = run("tti", "--config", str(tti_cfg), "--out", str(out))
    assert r.returncode == 0, r.stderr
    text = (out / "metrics.txt").read_text()
    assert "loopback uncoded BER 0.000e+00" in text
    assert "detect errors 0" in text
    assert "EXCEEDED" in text                         # table latency over budget
    assert (out / "metrics.csv").exists()
    assert (out / "detected_symbols.bin").exists()
    fig12 = (out / "fig12_energy_breakdown.csv").read_text().strip().split("\n")
    assert fig12[0].startswith("mode,step,cycles,energy_j")
    assert {ln.split(",")[0] for ln in fig12[1:-1]} == {"q16", "f16"}
    assert (out / "fig12_energy_breakdown.png").stat().st_size > 1000


def test_tti_mode_override_and_rerun(tmp_path, tti_cfg):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    r1 = run("tti", "--config", str(tti_cfg), "--mode", "ref64",
             "--out", str(out1))
    assert r1.returncode == 0, r1.stderr
    assert "mode ref64" in (out1 / "metrics.txt").read_text()
    assert not (out1 / "metrics.csv").exists()        # no table row for ref64
    r2 = run("tti", "--config", str(tti_cfg), "--mode", "ref64",
             "--out", str(out2))
    assert (out1 / "detected_symbols.bin").read_bytes() \
        == (out2 / "detected_symbols.bin").read_bytes()


def test_tti_q16_smoke(tmp_path, tti_cfg):
    out = tmp_path / "q"
    r = run("tti", "--config", str(tti_cfg), "--mode", "q16", "--out", str(out))
    assert r.returncode == 0, r.stderr
    assert "detect errors 0" in (out / "metrics.txt").read_text()

"""A7: render cycle/sweep/spectrum panels from real simulator CSVs."""

import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from figrender import FigureSpec, MissingColumnError, render
from figrender.tables import classify, read_table

LOG2 = math.log(2.0)
LMGQUENCH = shutil.which("lmgquench")


def run_cli(*args):
    proc = subprocess.run([LMGQUENCH, *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def results_dir(tmp_path_factory):
    """Reference CSVs produced through the simulator's public CLI (N=20)."""
    out = tmp_path_factory.mktemp("results")
    base = ["--n", "20", "--t-r", "50", "--grid-points", "31",
            "--set", "plateau_samples=64", "--set", "spectrum_grid_points=7",
            "--out", str(out)]
    run_cli("spectrum", *base)
    run_cli("cycle", *base, "--tau-q-ratio", "40")
    run_cli("sweep", *base, "--tau-q-ratio", "1", "--tau-q-ratio", "10",
            "--tau-q-ratio", "40")
    return out


@pytest.fixture(scope="session")
def cycle_inputs(results_dir):
    d = results_dir / "cycle_tq40"
    return tuple(str(d / f) for f in
                 ("jx_trace.csv", "energy_distributions.csv",
                  "jx_distributions.csv", "summary.csv"))


def test_cycle_panel_renders(cycle_inputs, tmp_path):
    out = tmp_path / "cycle.png"
    spec = FigureSpec(inputs=cycle_inputs, kind="cycle-panel", output=str(out))
    fig = render(spec)
    assert out.exists() and out.stat().st_size > 10_000
    axes = fig.get_axes()
    assert len(axes) == 3
    assert axes[1].get_yscale() == "log"  # energy panel is logarithmic
    labels = {line.get_label() for line in axes[0].get_lines()}
    assert {"forward", "backward"} <= labels


def test_render_is_deterministic_and_readonly(cycle_inputs, tmp_path):
    before = [open(p, "rb").read() for p in cycle_inputs]
    out1, out2 = tmp_path / "a.png", tmp_path / "b.png"
    render(FigureSpec(inputs=cycle_inputs, kind="cycle-panel", output=str(out1)))
    render(FigureSpec(inputs=cycle_inputs, kind="cycle-panel", output=str(out2)))
    assert out1.read_bytes() == out2.read_bytes()
    assert [open(p, "rb").read() for p in cycle_inputs] == before


def test_sweep_panel_has_log2_reference(results_dir, tmp_path):
    out = tmp_path / "sweep.png"
    spec = FigureSpec(inputs=(str(results_dir / "sweep.csv"),),
                      kind="sweep-panel", output=str(out))
    fig = render(spec)
    assert out.exists()
    ax = fig.get_axes()[0]
    assert ax.get_xscale() == "log"
    horiz = [ln for ln in ax.get_lines()
             if len(set(ln.get_ydata())) == 1 and ln.get_ydata()[0] == pytest.approx(LOG2)]
    assert horiz, "log 2 reference line missing"


def test_spectrum_panel(results_dir, tmp_path):
    out = tmp_path / "spectrum.png"
    fig = render(FigureSpec(inputs=(str(results_dir / "spectrum.csv"),),
                            kind="spectrum-panel", output=str(out)))
    assert out.exists()
    labels = {line.get_label() for line in fig.get_axes()[0].get_lines()}
    assert "even" in labels and "odd" in labels


def test_null_quench_curves_overlap(tmp_path):
    """A null-quench cycle's initial and final distributions coincide."""
    out_dir = tmp_path / "null"
    run_cli("cycle", "--n", "20", "--t-r", "50", "--lambda1", "3.5",
            "--grid-points", "31", "--set", "plateau_samples=64",
            "--out", str(out_dir), "--tau-q-ratio", "20")
    d = out_dir / "cycle_tq20"
    inputs = tuple(str(d / f) for f in
                   ("jx_trace.csv", "energy_distributions.csv", "jx_distributions.csv"))
    fig = render(FigureSpec(inputs=inputs, kind="cycle-panel",
                            output=str(tmp_path / "null.png")))
    jx_ax = fig.get_axes()[2]
    line = jx_ax.get_lines()[0]  # final distribution curve
    table = read_table(str(d / "jx_distributions.csv"))
    p0 = np.array([float(v) for v in table["p_initial"]])
    pf = np.asarray(line.get_ydata(), dtype=float)
    assert np.max(np.abs(np.sort(p0) - np.sort(pf))) < 1e-9


def test_missing_column_is_named(tmp_path, cycle_inputs):
    broken = tmp_path / "broken.csv"
    lines = open(cycle_inputs[1]).read().splitlines()
    lines[1] = lines[1].replace("p_final", "p_fin")
    broken.write_text("\n".join(lines) + "\n")
    # classification still sees a jx-like table? ensure a named error surfaces
    with pytest.raises((MissingColumnError, ValueError)) as err:
        render(FigureSpec(inputs=(cycle_inputs[0], str(broken), cycle_inputs[2]),
                          kind="cycle-panel", output=str(tmp_path / "x.png")))
    assert "p_fin" in str(err.value) or "energy_dist" in str(err.value) \
        or "classify" in str(err.value) or "p_final" in str(err.value)


def test_cli_end_to_end(results_dir, tmp_path):
    from figrender.cli import main
    out = tmp_path / "cli_sweep.png"
    rc = main(["render", "sweep-panel", "--in", str(results_dir / "sweep.csv"),
               "--out", str(out)])
    assert rc == 0 and out.exists()
    rc = main(["render", "sweep-panel", "--in", str(results_dir / "spectrum.csv"),
               "--out", str(tmp_path / "nope.png")])
    assert rc == 1


def test_empty_data_fails(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("# header only\ntau_q_ratio,delta_s,e_dis_ratio,delta_i_h,delta_i_jx\n")
    with pytest.raises(ValueError):
        render(FigureSpec(inputs=(str(empty),), kind="sweep-panel",
                          output=str(tmp_path / "y.png")))


def test_classify(results_dir):
    assert classify(str(results_dir / "sweep.csv")) == "sweep"
    assert classify(str(results_dir / "spectrum.csv")) == "spectrum"
    assert classify(str(results_dir / "cycle_tq40" / "jx_trace.csv")) == "trace"

import csv

import numpy as np
import pytest

import blurflow.cli as cli
from blurflow.bench import AffineMotion, make_case
from blurflow.cli import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, main
from blurflow.io import read_flo, read_image, read_kernel, write_flo, write_image
from blurflow.pipeline import PipelineError


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    case = make_case("t", 40, seed=0, motion=AffineMotion(np.eye(2), np.array([1.0, 0.5])),
                     blur_dirs=(0.4,) * 4, blur_length=5, kernel_size=7)
    b = case.blurred()
    for j in range(4):
        write_image(d / f"f{j}.png", b[j])
    (d / "motion.csv").write_text("0,5,0.4\n1,5,0.4\n2,5,0.4\n3,5,0.4\n")
    write_flo(d / "gt.flo", case.gt_flow)
    (d / "small.cfg").write_text("kernel.kernel_size = 7\n")
    return d


def _run_args(d, *extra):
    return ["run", "--frame1", str(d / "f1.png"), "--frame2", str(d / "f2.png"),
            "--config", str(d / "small.cfg"), "--log-level", "WARNING", *extra]


def test_run_writes_outputs(inputs, tmp_path, capsys):
    rc = main(_run_args(inputs, "--motion", str(inputs / "motion.csv"), "--motion-index", "1",
                        "--out-flo", str(tmp_path / "w.flo"), "--out-kernel1", str(tmp_path / "k1.txt"),
                        "--out-kernel2", str(tmp_path / "k2.txt"), "--out-vis", str(tmp_path / "v.png"),
                        "--gt", str(inputs / "gt.flo"), "--out-err", str(tmp_path / "e.png"),
                        "--prev", str(inputs / "f0.png"), "--next", str(inputs / "f3.png")))
    assert rc == EXIT_OK
    w = read_flo(tmp_path / "w.flo")
    assert w.shape == (40, 40, 2)
    k1 = read_kernel(tmp_path / "k1.txt")
    assert k1.shape == (7, 7) and k1.sum() == pytest.approx(1.0, abs=1e-6)
    assert read_image(tmp_path / "v.png").shape == (40, 40, 3)
    assert read_image(tmp_path / "e.png").shape == (40, 40, 3)
    out = capsys.readouterr().out
    assert out.startswith("AEE ")
    assert float(out.split()[1]) < 0.5


def test_run_is_deterministic(inputs, tmp_path):
    for name in ("a.flo", "b.flo"):
        assert main(_run_args(inputs, "--auto", "--seed", "3", "--out-flo", str(tmp_path / name))) == EXIT_OK
    assert (tmp_path / "a.flo").read_bytes() == (tmp_path / "b.flo").read_bytes()


@pytest.mark.parametrize("extra", [
    ["--motion", "missing.csv"],
    ["--motion", "{d}/motion.csv", "--motion-index", "3"],
    ["--motion", "{d}/motion.csv", "--out-err", "e.png"],
    ["--auto", "--mode", "nonDF"],
    ["--motion", "{d}/motion.csv", "--mode", "auto"],
    ["--motion", "{d}/motion.csv", "--next", "{d}/nope.png"],
])
def test_run_input_errors(inputs, tmp_path, extra, capsys):
    extra = [e.format(d=inputs) for e in extra]
    rc = main(_run_args(inputs, *extra, "--out-flo", str(tmp_path / "w.flo")))
    assert rc == EXIT_INPUT
    assert "blurflow:" in capsys.readouterr().err


def test_mismatched_frames(inputs, tmp_path):
    write_image(tmp_path / "small.png", np.zeros((20, 20)))
    args = ["run", "--frame1", str(inputs / "f1.png"), "--frame2", str(tmp_path / "small.png"),
            "--auto", "--out-flo", str(tmp_path / "w.flo")]
    assert main(args) == EXIT_INPUT


def test_bad_config_key(inputs, tmp_path):
    (tmp_path / "bad.cfg").write_text("solver.bogus = 1\n")
    args = ["run", "--frame1", str(inputs / "f1.png"), "--frame2", str(inputs / "f2.png"), "--auto",
            "--config", str(tmp_path / "bad.cfg"), "--out-flo", str(tmp_path / "w.flo")]
    assert main(args) == EXIT_INPUT


def test_numerical_failure_exit_code(inputs, tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise PipelineError("level 0, flow solve: nan")

    monkeypatch.setattr(cli, "run", broken)
    rc = main(_run_args(inputs, "--auto", "--out-flo", str(tmp_path / "w.flo")))
    assert rc == EXIT_NUMERICAL
    assert not (tmp_path / "w.flo").exists()


def test_invalid_log_level(inputs, tmp_path):
    args = ["run", "--frame1", str(inputs / "f1.png"), "--frame2", str(inputs / "f2.png"), "--auto",
            "--log-level", "LOUD", "--out-flo", str(tmp_path / "w.flo")]
    assert main(args) == EXIT_INPUT


def test_bench_writes_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    rc = main(["bench", "--out", str(out), "--size", "32", "--modes", "moblur", "nonGCDF",
               "--kernel-size", "7", "--lambdas", "0", "90", "--noise", "0.02"])
    assert rc == EXIT_OK
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    # per case: 2 modes + 2 lambdas + 1 density per mode
    assert len(rows) == 3 * (2 + 2 + 2)
    assert {r["case"] for r in rows} == {"translation", "zoom", "rotation"}
    assert all(np.isfinite(float(r["AEE"])) for r in rows)
    assert capsys.readouterr().out.startswith("case,mode,lambda")


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "0.1.0" in capsys.readouterr().out

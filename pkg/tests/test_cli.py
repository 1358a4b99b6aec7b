import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from poisson_deconv.cli import main, run_replay
from poisson_deconv.image import metrics, read_image, write_image


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim64(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim64")
    assert run("simulate", "--size", 64, "--peak", 30, "--psf", "moving_average:7", "--seed", 1, "--out", out) == 0
    return out


def test_simulate_default_example(tmp_path):
    code = run("simulate", "--phantom", "lines_gaussians", "--size", 128, "--peak", 30,
               "--psf", "moving_average:7", "--seed", 1, "--out", tmp_path)
    assert code == 0
    for name in ("truth", "blurred", "noisy"):
        img = read_image(tmp_path / f"{name}.raw")
        assert img.shape == (128, 128)
    assert read_image(tmp_path / "truth.raw").max() == pytest.approx(30)
    noisy = read_image(tmp_path / "noisy.raw")
    assert np.array_equal(noisy, np.round(noisy)) and noisy.min() >= 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["seed"] == 1
    assert manifest["config"]["psf"] == "moving_average:7"
    assert set(manifest) >= {"config", "inputs", "outputs", "timestamp", "version"}


def test_simulate_delta_psf_blurred_equals_truth(tmp_path):
    assert run("simulate", "--size", 32, "--psf", "delta", "--out", tmp_path) == 0
    np.testing.assert_array_equal(read_image(tmp_path / "blurred.raw"), read_image(tmp_path / "truth.raw"))


def test_simulate_seeded(tmp_path):
    for sub in ("a", "b", "c"):
        seed = 2 if sub == "c" else 1
        run("simulate", "--size", 32, "--psf", "moving_average:3", "--seed", seed, "--out", tmp_path / sub)
    a, b, c = (read_image(tmp_path / s / "noisy.raw") for s in "abc")
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_simulate_pgm_and_input_image(tmp_path):
    src = tmp_path / "src.pgm"
    write_image(np.arange(256.0).reshape(16, 16), src)
    assert run("simulate", "--input", src, "--psf", "delta", "--peak", 10, "--format", "pgm",
               "--out", tmp_path / "o") == 0
    truth = read_image(tmp_path / "o" / "truth.pgm")
    assert truth.max() == 10


def test_deconvolve_trivial_inverse_problem(tmp_path):
    run("simulate", "--size", 16, "--psf", "delta", "--peak", 2, "--out", tmp_path)
    code = run("deconvolve", "--input", tmp_path / "truth.raw", "--psf", "delta", "--dict", "identity",
               "--lambda", 0, "--algo", "tseng", "--n-iter", 500, "--out", tmp_path / "d")
    assert code == 0
    restored = read_image(tmp_path / "d" / "restored.raw")
    truth = read_image(tmp_path / "truth.raw")
    assert np.abs(restored - truth).max() < 1e-4


def test_deconvolve_outputs(sim64, tmp_path):
    code = run("deconvolve", "--input", sim64 / "noisy.raw", "--psf", "moving_average:7", "--lambda", 0.5,
               "--n-iter", 20, "--out", tmp_path)
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["lambda"] == 0.5 and summary["algo"] == "fb" and summary["iterations"] == 20
    assert isinstance(summary["support_size"], int)
    rows = (tmp_path / "objective.csv").read_text().splitlines()
    assert rows[0] == "iteration,objective,support_size,mu,step_norm" and len(rows) == 21
    assert not (tmp_path / "gcv.csv").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["dict"] == "tidwt:J=2" and manifest["config"]["n_iter"] == 20


@pytest.mark.slow
def test_deconvolve_gcv_improves_on_observation(tmp_path):
    sim = tmp_path / "sim"
    run("simulate", "--phantom", "lines_gaussians", "--size", 128, "--peak", 30,
        "--psf", "moving_average:7", "--seed", 1, "--out", sim)
    code = run("deconvolve", "--input", sim / "noisy.raw", "--psf", "moving_average:7",
               "--reference", sim / "truth.raw", "--out", tmp_path)
    assert code == 0
    truth = read_image(sim / "truth.raw")
    restored = read_image(tmp_path / "restored.raw")
    noisy = read_image(sim / "noisy.raw")
    assert metrics(truth, restored).mae < metrics(truth, noisy).mae
    assert json.loads((tmp_path / "summary.json").read_text())["algo"] == "tseng"
    with open(tmp_path / "gcv.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 12


def test_sweep_table(sim64, tmp_path):
    code = run("sweep", "--input", sim64 / "noisy.raw", "--psf", "moving_average:7", "--grid", "1e-3:1:12log",
               "--n-iter", 10, "--reference", sim64 / "truth.raw", "--out", tmp_path)
    assert code == 0
    with open(tmp_path / "gcv.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert list(rows[0]) == ["lambda", "gcv", "df", "residual_ss", "mae", "mse", "selected"]
    gcvs = [float(r["gcv"]) for r in rows]
    best = int(np.argmin(gcvs))
    assert [int(r["selected"]) for r in rows] == [int(i == best) for i in range(12)]
    selected = json.loads((tmp_path / "selected.json").read_text())
    assert selected["lambda"] == float(rows[best]["lambda"])


def test_sweep_without_reference(sim64, tmp_path):
    assert run("sweep", "--input", sim64 / "noisy.raw", "--psf", "moving_average:7", "--grid", "0.01:1:3log",
               "--n-iter", 5, "--out", tmp_path) == 0
    header = (tmp_path / "gcv.csv").read_text().splitlines()[0]
    assert header == "lambda,gcv,df,residual_ss,selected"


def test_metrics_command(sim64, capsys):
    assert run("metrics", sim64 / "truth.raw", sim64 / "truth.raw") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["mae"] == 0 and report["mse"] == 0 and "normalized_mae" in report


def test_metrics_size_mismatch(sim64, tmp_path):
    write_image(np.zeros((8, 8)), tmp_path / "small.raw")
    assert run("metrics", sim64 / "truth.raw", tmp_path / "small.raw") == 3


def test_missing_psf_is_usage_error(sim64, tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("deconvolve", "--input", sim64 / "noisy.raw", "--out", tmp_path)
    assert exc.value.code == 2


@pytest.mark.parametrize("extra", [["--dict", "curvelets"], ["--lambda", "big"], ["--psf", "box:3"]])
def test_bad_specs_are_usage_errors(sim64, tmp_path, extra):
    args = ["deconvolve", "--input", sim64 / "noisy.raw", "--psf", "moving_average:7", "--n-iter", 1,
            "--out", tmp_path] + extra
    assert run(*args) == 2


def test_data_errors(tmp_path):
    write_image(-np.ones((16, 16)), tmp_path / "neg.raw")
    assert run("deconvolve", "--input", tmp_path / "neg.raw", "--psf", "delta", "--out", tmp_path / "o") == 3
    assert run("deconvolve", "--input", tmp_path / "missing.raw", "--psf", "delta", "--out", tmp_path / "o") == 3
    write_image(np.ones((16, 16)), tmp_path / "ok.raw")
    write_image(np.ones((8, 8)), tmp_path / "ref.raw")
    assert run("deconvolve", "--input", tmp_path / "ok.raw", "--psf", "delta", "--reference", tmp_path / "ref.raw",
               "--out", tmp_path / "o") == 3


def test_numerical_failure_exit_code(sim64, tmp_path):
    code = run("deconvolve", "--input", sim64 / "noisy.raw", "--psf", "moving_average:7", "--lambda", 0.1,
               "--algo", "tseng", "--sigma", 1e40, "--n-iter", 2, "--out", tmp_path)
    assert code == 4


def test_config_precedence(sim64, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda": 0.7, "n_fb": 3, "dictionary": "dwt:J=2"}))
    assert run("deconvolve", "--input", sim64 / "noisy.raw", "--psf", "moving_average:7", "--config", cfg,
               "--n-iter", 4, "--out", tmp_path / "o") == 0
    resolved = json.loads((tmp_path / "o" / "manifest.json").read_text())["config"]
    assert resolved["lam"] == 0.7 and resolved["dict"] == "dwt:J=2" and resolved["n_iter"] == 4
    cfg.write_text(json.dumps({"colour": "red"}))
    assert run("deconvolve", "--input", sim64 / "noisy.raw", "--psf", "delta", "--config", cfg,
               "--out", tmp_path / "p") == 2


def test_replay_bit_exact(tmp_path):
    run("simulate", "--size", 32, "--psf", "moving_average:3", "--seed", 5, "--out", tmp_path / "s")
    run("deconvolve", "--input", tmp_path / "s" / "noisy.raw", "--psf", "moving_average:3", "--lambda", "gcv",
        "--grid", "0.01:1:3log", "--n-iter", 10, "--out", tmp_path / "d")
    for name in ("s", "d"):
        run("replay", tmp_path / name / "manifest.json", "--out", tmp_path / f"{name}2")
    for name, files in (("s", ["truth.raw", "blurred.raw", "noisy.raw"]), ("d", ["restored.raw"])):
        for f in files:
            assert (tmp_path / name / f).read_bytes() == (tmp_path / f"{name}2" / f).read_bytes()
    assert (tmp_path / "d" / "gcv.csv").read_text() == (tmp_path / "d2" / "gcv.csv").read_text()


def test_replay_in_place(tmp_path):
    run("simulate", "--size", 16, "--psf", "delta", "--seed", 3, "--out", tmp_path)
    before = (tmp_path / "noisy.raw").read_bytes()
    run_replay(tmp_path / "manifest.json")
    assert (tmp_path / "noisy.raw").read_bytes() == before


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "poisson_deconv", "metrics", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "reference" in proc.stdout

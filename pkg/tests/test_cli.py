import json
import shutil
import subprocess
import sys

import pytest

from radkernel import cli

CONFIG = """\
potential: {dimension: 3, family: pure, lambda1: -0.2}
samples:
  x: [0.5, 1.0, 2.0]
  y: [0.7, 1.5]
  cos_theta: [-0.5, 0.5, 1.0]
  t: [0.5, 1.0]
kernel: {source: oracle}
verify: {envelope: TwoSidedThm12, source: oracle}
supersolution: {r_range: [0.01, 100], times: [0.1, 1.0, 10.0]}
mu_star: {bracket: [2, 3], tol: 0.05}
"""

OUTPUTS = {
    "harmonic": ["harmonic_profile.csv", "harmonic_fit.json"],
    "classify": ["classify.json"],
    "a2": ["a2.json", "ball_masses.csv"],
    "kernel": ["kernel_slice.csv", "kernel_slice.json"],
    "verify": ["fit_report.json", "ratio_scatter.csv"],
    "supersolution": ["supersolution.json"],
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(CONFIG)
    return path


def test_exponents(capsys):
    assert cli.main(["exponents", "--N", "3", "--lam", "-0.25"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["a_plus"] == pytest.approx(-0.5, abs=1e-12)


@pytest.mark.parametrize("command", sorted(OUTPUTS))
def test_subcommand_outputs(config, tmp_path, command):
    out = tmp_path / "out"
    assert cli.main([command, str(config), "-o", str(out), "-q"]) == 0
    for name in OUTPUTS[command]:
        assert (out / name).stat().st_size > 0
    for name in OUTPUTS[command]:
        if name.endswith(".json"):
            assert "config_hash" in json.loads((out / name).read_text())["provenance"]


def test_classify_verdict(config, tmp_path):
    cli.main(["classify", str(config), "-o", str(tmp_path), "-q"])
    assert json.loads((tmp_path / "classify.json").read_text())["report"]["verdict"] == "Subcritical"


def test_mu_star_step_well(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["mu-star", "-o", str(out), "-q", "--family", "zero", "--dimension", "3",
                     "--set", "mu_star.bracket=[2, 3]", "--set", "mu_star.tol=0.05"])
    assert code == 0
    mu = json.loads((out / "mu_star.json").read_text())["result"]["mu_star"]
    assert mu == pytest.approx(2.4674, abs=0.05)


def test_deterministic_outputs(config, tmp_path):
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        for command in ("harmonic", "kernel", "verify"):
            assert cli.main([command, str(config), "-o", str(out), "-q"]) == 0
        runs.append(out)
    names = sorted(p.name for p in runs[0].iterdir())
    assert names == sorted(p.name for p in runs[1].iterdir())
    for name in names:
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()


def test_config_hash_tracks_overrides(config, tmp_path):
    cli.main(["harmonic", str(config), "-o", str(tmp_path / "a"), "-q"])
    cli.main(["harmonic", str(config), "-o", str(tmp_path / "b"), "-q", "--lambda1", "-0.1"])
    ha = json.loads((tmp_path / "a" / "harmonic_fit.json").read_text())["provenance"]["config_hash"]
    hb = json.loads((tmp_path / "b" / "harmonic_fit.json").read_text())["provenance"]["config_hash"]
    assert ha != hb


def test_random_samples_seeded(tmp_path):
    cfg = tmp_path / "r.yaml"
    cfg.write_text("potential: {dimension: 3, family: zero}\n"
                   "kernel: {source: oracle}\n"
                   "samples: {random: {n: 20, x: [0.1, 5], y: [0.1, 5], t: [0.1, 2]}}\n")
    texts = []
    for seed in (1, 1, 2):
        out = tmp_path / f"s{len(texts)}"
        assert cli.main(["kernel", str(cfg), "-o", str(out), "-q", "--seed", str(seed)]) == 0
        texts.append((out / "kernel_slice.csv").read_text())
    assert texts[0] == texts[1] != texts[2]


def test_output_dir_from_environment(config, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["harmonic", str(config), "-q"]) == 0
    assert (tmp_path / "env" / "harmonic_fit.json").exists()
    assert cli.main(["harmonic", str(config), "-q", "-o", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "harmonic_fit.json").exists()


def test_exit_code_invalid_input(config, tmp_path, capsys):
    assert cli.main(["harmonic", str(config), "-o", str(tmp_path), "--lambda1", "-0.3"]) == 2
    assert "radkernel harmonic" in capsys.readouterr().err
    assert cli.main(["harmonic", "-o", str(tmp_path)]) == 2
    assert cli.main(["harmonic", str(config), "-o", str(tmp_path), "--set", "oops"]) == 2


def test_exit_code_unmet_hypothesis(config, tmp_path):
    args = ["verify", str(config), "-o", str(tmp_path), "-q", "--set", "verify.envelope=PolynomialProp11"]
    assert cli.main(args) == 2


def test_exit_code_numerical(config, tmp_path):
    args = ["kernel", str(config), "-o", str(tmp_path), "-q", "--family", "zero",
            "--set", "kernel.source=solver", "--set", "solver.r_max=18.0",
            "--set", "samples.t=[5.0]", "--set", "solver.l_max=0", "--set", "solver.outflow_tol=1.0e-30"]
    assert cli.main(args) == 3


def test_exit_code_io(tmp_path):
    assert cli.main(["harmonic", str(tmp_path / "missing.yaml"), "-o", str(tmp_path)]) == 4
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = tmp_path / "c.yaml"
    cfg.write_text("potential: {dimension: 3, family: zero}\n")
    assert cli.main(["harmonic", str(cfg), "-o", str(blocker / "sub")]) == 4


@pytest.mark.skipif(shutil.which("radkernel") is None, reason="console script not installed")
def test_console_script(config, tmp_path):
    res = subprocess.run(["radkernel", "exponents", "--N", "4", "--lam", "0"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["a_minus"] == -2.0


def test_module_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "radkernel.cli", "exponents", "--N", "3", "--lam", "0"],
                         capture_output=True, text=True)
    assert res.returncode == 0

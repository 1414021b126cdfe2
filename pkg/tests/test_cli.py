import json
import subprocess
import sys

import pytest

from gefsplit import cli, experiments

QUICK = """
[DEFAULT]
seed = 1

[noisy-lattice]

[centering]

[counterexample]
samples = 20000
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_list_shows_catalog(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "variance" in out and "σ² = ζ(3)/(16π)" in out
    assert "cone-integral" in out
    assert len(experiments.EXPERIMENTS) >= 12


def test_describe(capsys):
    assert cli.main(["describe", "mean-count"]) == 0
    out = capsys.readouterr().out
    assert "R = 5.0" in out and "samples = 5000" in out


def test_describe_unknown(capsys):
    assert cli.main(["describe", "nope"]) == 2


def test_unknown_experiment_exits_2(tmp_path, capsys):
    path = write(tmp_path, "[centering]\n\n[not-an-experiment]\nx = 1\n")
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert ":3:" in err and "not-an-experiment" in err


@pytest.mark.parametrize("body,needle", [
    ("[mean-count]\nR = five\n", ":2: [mean-count] R"),
    ("[mean-count]\nwidth = 3\n", "unknown parameter"),
    ("[mean-count]\nR = 12\n", ":2: [mean-count] R: R must lie"),
    ("[DEFAULT]\nseed = 1\n[counterexample]\nepsilon = 0.5\n", ":4: [counterexample] epsilon"),
    ("[counterexample]\nepsilon = 0.9\n", "epsilon"),
    ("no header\n", "no section headers"),
    ("[centering]\nenabled = false\n", "no enabled experiments"),
])
def test_config_errors_before_compute(tmp_path, capsys, body, needle):
    path = write(tmp_path, body)
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    assert needle in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_flags_override_file(tmp_path):
    path = write(tmp_path, "[mean-count]\nsamples = 5000\nseed = 4\n")
    plan = cli.load_config(path, seed=9, samples=50)
    assert plan == [("mean-count", {"samples": 50, "seed": 9})]


def test_lists_and_types_are_parsed(tmp_path):
    path = write(tmp_path, "[moderate-deviations]\nc = 1, 2.5\n[pathwise]\ntransforms = abs, tent\n")
    plan = dict(cli.load_config(path))
    assert plan["moderate-deviations"]["c"] == [1.0, 2.5]
    assert plan["pathwise"]["transforms"] == ["abs", "tent"]


def test_run_is_byte_reproducible(tmp_path):
    path = write(tmp_path, QUICK)
    assert cli.main(["run", str(path), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", str(path), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "results.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "results.jsonl").read_bytes()
    for rec in map(json.loads, a.decode().splitlines()):
        assert {"name", "params", "estimate", "stderr", "n", "seed", "target", "target_source", "pass"} <= set(rec)
    csv_text = (tmp_path / "a" / "counterexample-profile.csv").read_bytes()
    assert csv_text.startswith(b"epsilon,a,b,gap,lower_bound,normalized\r\n")


def test_failed_criterion_exits_1_and_names_it(tmp_path, capsys):
    # a dense lattice is not noisy, so asking it to pass must fail criterion 7
    path = write(tmp_path, "[noisy-lattice]\nM_pass = 0.3\n")
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "criteria: 7" in err


def test_mean_count_end_to_end(tmp_path):
    path = write(tmp_path, "[mean-count]\nR = 5\nsamples = 5000\nseed = 1\n")
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 0
    rec = json.loads((tmp_path / "o" / "results.jsonl").read_text().splitlines()[0])
    assert rec["criterion"] == 1 and rec["pass"] is True and rec["n"] == 5000


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "gefsplit", "list"], capture_output=True, text=True, check=True)
    assert "counterexample" in out.stdout

import csv
import json
import subprocess
import sys


from elrlab.cli import main
from elrlab.runlog import COLUMNS, from_csv

SMALL = """mode = {mode}
n = 30
p = 40
sigma = 0.1
delta = 0.4
epochs = {epochs}
seed = 0
{extra}
"""


def cfg(tmp_path, name, mode="CE", epochs=20, extra=""):
    path = tmp_path / f"{name}.cfg"
    path.write_text(SMALL.format(mode=mode, epochs=epochs, extra=extra))
    return str(path)


def test_run_writes_files_and_manifest_reproduces(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    c = cfg(tmp_path, "ce")
    assert main(["run", c, "--out", str(out1), "--save-targets", "--save-weights"]) == 0
    for f in ("metrics.csv", "manifest.json", "targets.csv", "weights.txt"):
        assert (out1 / f).exists()
    man = json.loads((out1 / "manifest.json").read_text())
    assert {"config", "seed", "dataset_fingerprint", "version", "duration_s"} <= set(man)
    log = from_csv((out1 / "metrics.csv").read_text())
    assert len(log) == 21
    assert main(["run", "--manifest", str(out1 / "manifest.json"), "--out", str(out2)]) == 0
    assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()
    assert not list(out1.glob("*.tmp"))


def test_seed_override_changes_run(tmp_path):
    c = cfg(tmp_path, "ce")
    main(["run", c, "--out", str(tmp_path / "a")])
    main(["run", c, "--out", str(tmp_path / "b"), "--seed", "5"])
    assert (tmp_path / "a/metrics.csv").read_bytes() != (tmp_path / "b/metrics.csv").read_bytes()


def test_missing_mode_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("n = 5\np = 3\n")
    assert main(["run", str(p)]) == 2
    assert "'mode'" in capsys.readouterr().err


def test_unknown_key_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("mode = CE\nn = 5\np = 3\nlamda = 1\n")
    assert main(["run", str(p)]) == 2
    assert "bad.cfg:4" in capsys.readouterr().err


def test_bad_dataset_is_config_error(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("mode = CE\nn = 5\np = 3\nclasses = 5\n")
    assert main(["run", str(p)]) == 2


def test_divergence_exits_3(tmp_path):
    p = tmp_path / "div.cfg"
    p.write_text("mode = KL\nn = 40\np = 5\nclasses = 3\ndelta = 0.6\n"
                 "eta = 1e307\nepochs = 30\narch = mlp\n")
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 3
    assert json.loads((tmp_path / "o/manifest.json").read_text())["diverged"]


def test_gradcheck(capsys):
    assert main(["gradcheck"]) == 0
    out = capsys.readouterr().out
    worst = [float(line.split()[-1]) for line in out.splitlines() if "worst" in line]
    assert worst and max(worst) <= 1e-6
    assert main(["gradcheck", "--mutate", "elr-sign"]) == 1
    assert "FAIL mode=ELR" in capsys.readouterr().err


def test_gradcheck_more_trials():
    assert main(["gradcheck", "--trials", "1000"]) == 0


def test_separability_all_separable_when_p_exceeds_n(tmp_path, capsys):
    assert main(["separability", "--n", "20", "--p", "25", "--delta", "0.4", "--trials", "50",
                 "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "separability.csv").open()))
    assert len(rows) == 50 and all(r["separable"] == "true" for r in rows)
    assert "separable=50 non_separable=0 undecided=0" in capsys.readouterr().err


def test_separability_outside_regime_reports_only(capsys):
    assert main(["separability", "--n", "50", "--p", "10", "--delta", "0.4", "--trials", "20"]) == 0
    assert "trials=20" in capsys.readouterr().err


def test_compare_long_format(tmp_path):
    a = cfg(tmp_path, "ce")
    b = cfg(tmp_path, "elr", mode="ELR", extra="lambda = 3")
    assert main(["compare", a, b, "--out", str(tmp_path / "cmp"), "--jobs", "2"]) == 0
    rows = list(csv.DictReader((tmp_path / "cmp/compare.csv").open()))
    assert {r["mode"] for r in rows} == {"CE", "ELR"}
    assert {r["metric"] for r in rows} <= set(COLUMNS)
    assert (tmp_path / "cmp/elr/metrics.csv").exists()


def test_compare_needs_two_and_same_dataset(tmp_path):
    a = cfg(tmp_path, "ce")
    assert main(["compare", a]) == 2
    b = tmp_path / "other.cfg"
    b.write_text(SMALL.format(mode="ELR", epochs=20, extra="").replace("delta = 0.4", "delta = 0.2"))
    assert main(["compare", a, str(b)]) == 2


def test_sweep_parallel_matches_serial(tmp_path):
    c = cfg(tmp_path, "elr", mode="ELR")
    assert main(["sweep", c, "--runs", "3", "--jobs", "2", "--out", str(tmp_path / "p")]) == 0
    assert main(["sweep", c, "--runs", "3", "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "p/sweep.csv").read_bytes() == (tmp_path / "s/sweep.csv").read_bytes()
    assert (tmp_path / "p/seed2/metrics.csv").exists()


def test_usage_errors():
    assert main([]) == 2
    assert main(["run"]) == 2
    assert main(["gradcheck", "--jobs", "0"]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "elrlab", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "elrlab" in r.stdout


def test_separability_without_out_writes_nothing(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["separability", "--n", "10", "--p", "3", "--delta", "0.4", "--trials", "2"]) == 0
    assert not list(tmp_path.iterdir())

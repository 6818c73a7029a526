import csv
import io
import os
import subprocess
import sys

import pytest

from qising import __version__
from qising.cli import ConfigError, fmt, read_config, run


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    lines = text.splitlines()
    assert lines[-1].startswith(f"# qising v{__version__} ")
    return list(csv.reader(io.StringIO("\n".join(lines[:-1]))))


def test_fmt():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(True) == "true" and fmt(3) == "3" and fmt(float("nan")) == "nan" and fmt(None) == ""


def test_predict_example(capsys):
    code, out, _ = call(capsys, "predict", "--geometry", "halfplane", "--point", "0,1")
    assert code == 0
    rows = table(out)
    assert rows[0] == ["x", "y", "energy"] and rows[1][2] == "0.225079079039"
    assert "\r" not in out


def test_predict_variants(capsys):
    code, out, _ = call(capsys, "predict", "--what", "spin", "--point", "0,1", "--point", "1,1", "--bc", "free")
    assert code == 0 and float(table(out)[1][1]) > 0
    code, out, _ = call(capsys, "predict", "--geometry", "box", "--what", "metric", "--point", "0.5,0.5",
                        "--width", "1", "--height", "1")
    assert code == 0 and float(table(out)[1][2]) == pytest.approx(3.70815, abs=1e-4)
    code, out, _ = call(capsys, "predict", "--geometry", "rectangle", "--what", "spin-ratio",
                        "--point", "0,0.5", "--k", "0.6")
    assert code == 0


@pytest.mark.parametrize("argv", [
    ["predict", "--geometry", "halfplane", "--point", "0,-1"],
    ["predict", "--geometry", "disk", "--what", "spin"],
    ["predict", "--point", "1"],
    ["special", "--what", "K", "--k", "1.5"],
    ["special", "--what", "pfaffian", "--matrix", "1,2"],
    ["sample", "--tau", "-1"],
    ["ladder", "--theta", "1", "--theta-star", "-1"],
    ["sample", "--observable", "magnet:0,1"],
])
def test_bad_input_exits_2(capsys, argv):
    code, _, err = call(capsys, *argv)
    assert code == 2 and err.startswith("qising: error:")


def test_usage_errors_exit_2(capsys):
    assert call(capsys)[0] == 2
    assert call(capsys, "predict", "--no-such-flag")[0] == 2
    assert call(capsys, "frobnicate")[0] == 2


def test_special(capsys):
    code, out, _ = call(capsys, "special", "--what", "K")
    rows = table(out)
    assert float(rows[1][1]) == pytest.approx(1.85407467730, abs=1e-10)
    code, out, _ = call(capsys, "special", "--what", "pfaffian")
    n, pf, det = table(out)[1]
    assert (n, float(pf)) == ("4", 8.0) and float(det) == pytest.approx(64.0)


def test_ladder(capsys):
    code, out, _ = call(capsys, "ladder", "--theta", "0.5", "--theta-star", "1", "-n", "4")
    rows = table(out)
    assert code == 0 and rows[0] == ["n", "D_n", "Dstar_n", "L_n", "Lstar_n"]
    assert float(rows[2][1]) == pytest.approx(0.934215, abs=1e-6)
    assert rows[-2][0] == "magnetization" and rows[-1][0] == "xi"
    code, out, _ = call(capsys, "ladder", "--theta", "0.5", "--theta-star", "1", "-n", "4", "--swap-regime")
    assert table(out)[-2][1] == "0"


def test_ladder_critical_warns(capsys):
    code, out, _ = call(capsys, "ladder", "--theta", "1", "--theta-star", "1", "-n", "3")
    assert code == 0 and table(out)[-1][0] == "critical_check_WARN"


def test_correlator(capsys):
    code, out, _ = call(capsys, "correlator", "--kind", "energy", "--source", "0.5,0", "--point", "1.5,0")
    rows = table(out)
    assert float(rows[1][4]) == pytest.approx(0.318309886184, abs=1e-9)
    assert abs(float(rows[1][5])) < 1e-9
    assert call(capsys, "correlator")[0] == 2


def test_sample_and_metadata(capsys, tmp_path):
    out_file = tmp_path / "s.csv"
    argv = ["sample", "--width", "4", "--height", "4", "--sweeps", "200", "--burnin", "20", "--seed", "3",
            "--observable", "energy+:1,2", "--observable", "one", "-o", str(out_file)]
    assert call(capsys, *argv)[0] == 0
    text = out_file.read_text()
    rows = table(text)
    assert rows[2][0] == "one" and rows[2][1] == "1"
    meta = text.splitlines()[-1]
    for key in ("seed=3", "params=delta=0.5;tau=0.5;theta=1", "domain=4x4;bc=plus", "sweeps=200;burnin=20"):
        assert key in meta
    assert call(capsys, *argv)[0] == 0
    assert out_file.read_text() == text


def test_sample_flattened(capsys):
    code, out, _ = call(capsys, "sample", "--width", "3", "--height", "1", "--sweeps", "100", "--burnin", "10",
                        "--epsilon", "0.1,0.05", "--observable", "spin:0,0.5,2,0.5")
    rows = table(out)
    assert code == 0 and rows[1][0].endswith("@eps=0.1") and rows[2][0].endswith("@eps=0.05")


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\ntau = 0.25\ntheta=0.5  # critical\nwidth=3\nheight=2\nsweeps=100\nburnin=10\n")
    assert read_config(cfg)["tau"] == "0.25"
    code, out, _ = call(capsys, "sample", "--config", str(cfg), "--theta", "0.7")
    assert code == 0 and "tau=0.25;theta=0.7" in out.splitlines()[-1]
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour=blue\n")
    assert call(capsys, "sample", "--config", str(bad))[0] == 2
    broken = tmp_path / "broken.cfg"
    broken.write_text("no equals sign\n")
    with pytest.raises(ConfigError):
        read_config(broken)
    assert call(capsys, "sample", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def test_threads_give_identical_bytes():
    argv = [sys.executable, "-m", "qising", "sample", "--width", "4", "--height", "3", "--sweeps", "150",
            "--burnin", "10", "--chains", "3", "--observable", "energy:1,1.5"]
    outs = [subprocess.run(argv, env=dict(os.environ, QISING_THREADS=t), capture_output=True).stdout
            for t in ("1", "2")]
    assert outs[0] and outs[0] == outs[1]


def test_verify_exit_code(capsys):
    code, out, _ = call(capsys, "verify")
    rows = table(out)
    statuses = {r[1] for r in rows[1:]}
    assert code == 0 and "FAIL" not in statuses and "WARN" in statuses

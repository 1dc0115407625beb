import json
import subprocess
import sys

import pytest

from whittaker.cli import main
from whittaker.simulation import read_pgm


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_coeff_exact(capsys):
    assert run(capsys, "coeff", "--family", "A", "--r", "3", "--n", "1,1,1") == (0, "5\n", "")
    code, out, _ = run(capsys, "coeff", "--r", "1", "--n", "3")
    assert out.strip() == "1/36"


def test_coeff_table(capsys, tmp_path):
    dest = tmp_path / "t.csv"
    code, _, _ = run(capsys, "coeff", "--family", "A", "--r", "2", "--table", "2", "--out", str(dest))
    rows = dest.read_text().splitlines()
    assert code == 0 and len(rows) == 1 + 9
    assert json.loads((tmp_path / "t.csv.manifest.json").read_text())["outputs"] == [str(dest)]


def test_hitprob_entrance_and_exact(capsys):
    code, out, _ = run(capsys, "hitprob", "--entrance", "--n", "1", "--m", "1")
    assert code == 0 and out.strip() == "0.87987642040882441"
    code, out, _ = run(capsys, "hitprob", "--from", "2,2", "--to", "1,1", "--exact")
    assert code == 0 and out.strip() == "8/9"


def test_verify_exit_codes(capsys):
    assert run(capsys, "verify", "iq", "--r", "2", "--max", "3")[0] == 0
    code, out, _ = run(capsys, "verify", "mfrpp", "--perturb")
    assert code == 1 and out.startswith("FAIL")
    assert run(capsys, "verify", "root", "--which", "G2")[0] == 0


def test_operator_dump(capsys):
    code, out, _ = run(capsys, "operator", "dump", "--kind", "M", "--r", "1", "--roof", "2")
    data = json.loads(out)
    assert code == 0 and [[2], [1], "4"] in data["entries"]


def test_simulate_is_byte_identical(capsys, tmp_path):
    outs = []
    for name in ("a", "b"):
        pgm = tmp_path / f"{name}.pgm"
        events = tmp_path / f"{name}.csv"
        code, summary, _ = run(capsys, "simulate", "--shape", "6x6", "--init", "6", "--stop", "absorb:6,1",
                               "--seed", "3", "--out", str(pgm), "--events", str(events))
        assert code == 0
        outs.append((pgm.read_bytes(), events.read_bytes(), json.loads(summary)["events"]))
    assert outs[0] == outs[1]
    img = read_pgm(tmp_path / "a.pgm")
    assert img.shape == (6, 6) and img[5, 0] == 0


def test_seed_from_environment(capsys, monkeypatch, tmp_path):
    monkeypatch.setenv("WHITTAKER_SEED", "11")
    run(capsys, "simulate", "--shape", "4x4", "--init", "4", "--out", str(tmp_path / "env.pgm"))
    run(capsys, "simulate", "--shape", "4x4", "--init", "4", "--seed", "11", "--out", str(tmp_path / "arg.pgm"))
    assert (tmp_path / "env.pgm").read_bytes() == (tmp_path / "arg.pgm").read_bytes()
    assert json.loads((tmp_path / "env.pgm.manifest.json").read_text())["seed"] == 11


def test_config_defaults_and_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "A", "r": 3, "n": "1,1,1"}))
    assert run(capsys, "coeff", "--config", str(cfg))[1] == "5\n"
    assert run(capsys, "coeff", "--config", str(cfg), "--n", "2,2,2")[1] == "73\n"


def test_sample_k_csv(capsys):
    code, out, _ = run(capsys, "sample-k", "--sigma", "2,3", "--reps", "5", "--seed", "1")
    rows = out.strip().splitlines()
    assert code == 0 and len(rows) == 6
    assert all(0 <= int(r.split(",")[-1]) <= 2 for r in rows[1:])


def test_ldp_solve(capsys):
    code, out, _ = run(capsys, "ldp", "solve", "--boundary", "2,3")
    assert code == 0 and json.loads(out)["x"]["1,1"] == pytest.approx(1.2)


def test_mc_phi(capsys):
    code, out, _ = run(capsys, "mc", "phi", "--y", "0.5", "--t", "4", "--dt", "0.01", "--paths", "20000",
                       "--seed", "5", "--threads", "1")
    data = json.loads(out)
    assert code == 0 and data["ok"] and data["count"] == 20000


def test_render_roundtrip(capsys, tmp_path):
    src = tmp_path / "a.pgm"
    run(capsys, "simulate", "--shape", "3,2,1", "--init", "2", "--out", str(src))
    dst = tmp_path / "b.pgm"
    code, _, _ = run(capsys, "render", str(src), "--pgm", str(dst), "--svg", str(tmp_path / "b.svg"))
    assert code == 0 and (read_pgm(src) == read_pgm(dst)).all()


def test_bad_input_exits_2(capsys):
    code, _, err = run(capsys, "coeff", "--family", "A", "--r", "2", "--n", "1")
    assert code == 2 and "error" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "whittaker", "coeff", "--family", "G2", "--n", "1,1"],
                         capture_output=True, text=True, check=True)
    assert res.stdout == "4\n"

import json

import numpy as np
import pytest

from wdistortion.cli import build_parser, load_config, main, read_sweep_csv
from wdistortion.coding import EncodedMessage
from wdistortion.distortion import SymbolSequence, distortion_profile
from wdistortion.pooling import PoolingPmf
from wdistortion.transport import CostMatrix, sandwich_bounds, w2sq_exact


def strip_stamp(text):
    return "\n".join(line for line in text.splitlines() if not line.startswith("# generated:"))


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_pmf(capsys):
    code, out, _ = run(["verify-pmf", "--sigma", "1.0"], capsys)
    assert code == 0
    assert "symmetry,true" in out and "monotonicity,true" in out and "normalization,true" in out
    code, out, _ = run(["verify-pmf", "--sigma", "1.0", "--family", "--format", "json"], capsys)
    assert code == 0 and all(json.loads(out)["checks"].values())


def test_verify_pmf_table(tmp_path, capsys):
    p = tmp_path / "t.json"
    p.write_text("[[0, 0.5], [1, 0.25]]")
    assert run(["verify-pmf", "--table", str(p)], capsys)[0] == 0


def test_transport_matches_library(tmp_path, capsys):
    inst = {"A": 3, "mu": [0.5, 0.3, 0.2], "nu": [0.2, 0.3, 0.5], "cost": [[0, 1, 2], [1, 0, 1], [2, 1, 0]]}
    p = tmp_path / "inst.json"
    p.write_text(json.dumps(inst))
    code, out, _ = run(["transport", str(p)], capsys)
    assert code == 0
    got = json.loads(out)
    lo, mid, hi = sandwich_bounds(inst["mu"], inst["nu"], inst["cost"])
    assert (got["lower"], got["value"], got["upper"]) == (lo, mid, hi)
    assert np.allclose(got["plan"], w2sq_exact(inst["mu"], inst["nu"], inst["cost"])[1].mass)


def test_transport_toml_and_uniform_cost(tmp_path, capsys):
    p = tmp_path / "inst.toml"
    p.write_text("A = 2\nmu = [0.75, 0.25]\nnu = [0.5, 0.5]\ncost = 1.0\n")
    code, out, _ = run(["transport", str(p)], capsys)
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.25)


def test_distortion_matches_library(tmp_path, capsys):
    rng = np.random.default_rng(3)
    x, xh = rng.integers(1, 3, 31), rng.integers(1, 3, 31)
    (tmp_path / "x.txt").write_text(" ".join(map(str, x)))
    (tmp_path / "xh.txt").write_text("\n".join(map(str, xh)))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sigma": 0.5, "A": 2, "cost": 1.0, "tol": 1e-10}))
    code, out, _ = run(["distortion", str(tmp_path / "x.txt"), str(tmp_path / "xh.txt"), "--config", str(cfg)], capsys)
    assert code == 0
    rows = [line.split(",") for line in out.splitlines() if line and not line.startswith("#")][1:]
    prof = distortion_profile(SymbolSequence.from_array(x, 11, 2), SymbolSequence.from_array(xh, 11, 2),
                              PoolingPmf.geometric(0.5), CostMatrix.uniform(2))
    assert [float(r[1]) for r in rows] == prof.tolist()
    block = float(out.split("# block_average: ")[1])
    assert block == pytest.approx(float(np.mean(prof)), abs=1e-15)


def test_encode_decode_round_trip(tmp_path, capsys):
    x = [1, 3, 2, 2, 3, 1, 1, 2, 3, 3, 3]
    (tmp_path / "x.txt").write_text(" ".join(map(str, x)))
    msg = tmp_path / "m.bin"
    assert run(["encode", str(tmp_path / "x.txt"), "--A", "3", "--k", "3", "--C", "1", "-o", str(msg)], capsys)[0] == 0
    assert EncodedMessage.from_bytes(msg.read_bytes()).counts.tolist() == [[0, 2], [2, 0], [0, 1]]
    code, out, _ = run(["decode", str(msg), "--C", "1", "--block-length", "11", "--seed", "4"], capsys)
    assert code == 0
    xh = [int(t) for t in out.split()]
    assert len(xh) == 11 and xh[0] == 1 and xh[10] == 1
    for j in range(3):
        assert sorted(xh[1 + 3 * j:4 + 3 * j]) == sorted(x[1 + 3 * j:4 + 3 * j])


def test_decode_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nope")
    code, _, err = run(["decode", str(bad)], capsys)
    assert code == 1 and "error" in err


def test_simulate(capsys):
    code, out, _ = run(["simulate", "--pmf", "0.5,0.5", "--length", "9", "--k", "3", "--seed", "1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["bits"] == 6 and doc["rate"] == pytest.approx(6 / 9)
    for j in range(3):
        assert sorted(doc["x"][3 * j:3 * j + 3]) == sorted(doc["xhat"][3 * j:3 * j + 3])


SWEEP = ["sweep", "--scheme", "permutation", "--pmf", "0.5,0.5", "--sigma-grid", "4,8,16,32", "--trials", "4",
         "--seed", "9"]


def test_sweep_determinism_and_round_trip(tmp_path, capsys):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert run(SWEEP + ["-o", str(a)], capsys)[0] == 0
    assert run(SWEEP + ["-o", str(b), "--workers", "2"], capsys)[0] == 0
    assert strip_stamp(a.read_text()) == strip_stamp(b.read_text())
    assert run(["sweep", "--config", str(a), "-o", str(c)], capsys)[0] == 0
    assert strip_stamp(a.read_text()) == strip_stamp(c.read_text())
    res = read_sweep_csv(a)
    assert len(res.rows) == 4 and res.config["seed"] == 9
    assert load_config(a)["sigma_grid"] == [4.0, 8.0, 16.0, 32.0]


def test_sweep_config_file_and_json_summary(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        'scheme = "independent"\nA = 2\npmf = [0.5, 0.5]\ncost = 1.0\nsigma_grid = [4.0, 8.0, 16.0, 32.0]\n'
        "trials = 4\nseed = 2\n[N_policy]\nmin_windows = 64\nsigma_multiple = 16.0\n"
    )
    code, out, _ = run(["sweep", "--config", str(cfg), "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["scheme"] == "independent" and len(doc["rows"]) == 4
    assert "slope" in doc["fits"]["distortion"] and doc["region"]["rows"][0]["alpha"] is None


def test_sweep_infeasible_is_validation_error(capsys):
    code, _, err = run(SWEEP + ["--N", "5", "--k", "8"], capsys)
    assert code == 1 and "infeasible" in err


def test_region_exit_codes(tmp_path, capsys):
    ok = ["region", "--measured", "perm,-0.34,-1.0", "--synthetic=-3,-0.5"]
    code, out, _ = run(ok, capsys)
    assert code == 0 and "synthetic,synthetic,-3.0,-0.5,not_achievable" in out
    code, _, err = run(["region", "--measured", "bug,-3,-0.5"], capsys)
    assert code == 2 and "region assertion failed" in err


def test_limits(capsys):
    code, out, _ = run(["limits", "fidelity", "--seed", "1"], capsys)
    assert code == 0
    last = [line for line in out.splitlines() if line and line[0].isdigit()][-1].split(",")
    assert float(last[1]) == 0.0 and float(last[3]) == 0.0
    code, out, _ = run(["limits", "realism", "--sigma-grid", "1,10,100", "--format", "json"], capsys)
    assert code == 0 and json.loads(out)["rows"][0]["target"] == pytest.approx(0.3)


def test_usage_errors(capsys):
    code, _, err = run(["verify-pmf", "--sigma", "1", "--bogus"], capsys)
    assert code == 1 and "usage:" in err
    code, _, err = run(["nope"], capsys)
    assert code == 1 and "usage:" in err
    code, _, err = run(["verify-pmf", "--sigma", "-1"], capsys)
    assert code == 1 and "sigma" in err


def test_help_documents_every_flag(capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    for name, p in sub.choices.items():
        for action in p._actions:
            assert action.help, f"{name} {action.option_strings} lacks help"
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--help"])
    assert exc.value.code == 0
    assert "--workers" in capsys.readouterr().out

import json

import pytest

from qsep import cli
from qsep.io import read_dataset, read_json

FAST = {"epochs": 400}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "fast.json").write_text(json.dumps(FAST))
    assert cli.main(["calibrate", "--out", str(d / "cal")]) == 0
    assert cli.main(["gen", "--protocol", "linear", "--source", str(d / "cal" / "source.json"),
                     "--shots", "2000", "--out", str(d / "lin")]) == 0
    return d


def test_calibrate_outputs(workdir, tmp_path):
    src = read_json(workdir / "cal" / "source.json")
    assert abs(src["achieved_purity"] - 0.914) <= 1e-3
    assert abs(src["achieved_concurrence"] - 0.927) <= 1e-3
    assert read_json(workdir / "cal" / "provenance.json")["command"] == "calibrate"
    assert cli.main(["calibrate", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "source.json").read_bytes() == (workdir / "cal" / "source.json").read_bytes()
    assert cli.main(["calibrate", "--purity", "1", "--concurrence", "1", "--out", str(tmp_path)]) == 0
    src = read_json(tmp_path / "source.json")
    assert (src["v"], src["d"]) == pytest.approx((1.0, 1.0))


def test_calibrate_infeasible(tmp_path, capsys):
    code = cli.main(["calibrate", "--purity", "0.5", "--concurrence", "0.99", "--out", str(tmp_path)])
    assert code == cli.EXIT_CONFIG
    assert "not achievable" in capsys.readouterr().err


def test_gen_linear(workdir):
    train = read_dataset(workdir / "lin" / "train.csv")
    test = read_dataset(workdir / "lin" / "test.csv")
    assert len(train) == len(test) == 495
    prov = read_json(workdir / "lin" / "provenance.json")
    assert prov["protocol"]["shots"] == 2000
    assert prov["config"]["seed"] == 20180601


def test_gen_theory_seed_independent(tmp_path):
    for seed in ("1", "2"):
        assert cli.main(["gen", "--protocol", "linear", "--theory", "--seed", seed,
                         "--out", str(tmp_path / seed)]) == 0
    for name in ("train.csv", "test.csv", "train.json"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


def test_train_and_eval(workdir):
    out = workdir / "model"
    args = ["train", "--data", str(workdir / "lin" / "train.csv"), "--arch", "linear",
            "--config", str(workdir / "fast.json"), "--out", str(out)]
    assert cli.main(args) == 0
    first = (out / "model.json").read_bytes()
    assert cli.main(args) == 0
    assert (out / "model.json").read_bytes() == first
    model = read_json(out / "model.json")
    assert model["arch"] == "linear" and len(model["weights"]) == 5
    assert model["train_config"]["epochs"] == 400
    report = read_json(out / "train_report.json")
    assert len(report["losses"]) == 400
    ev = workdir / "eval"
    assert cli.main(["eval", "--model", str(out / "model.json"),
                     "--data", str(workdir / "lin" / "test.csv"), "--out", str(ev)]) == 0
    rep = read_json(ev / "eval_report.json")
    assert rep["overall_match_rate"] > 0.9
    assert set(rep["baselines"]) == {"chsh_any", "chsh_fixed"}
    assert (ev / "mismatches.csv").exists() and (ev / "provenance.json").exists()


def test_flags_override_config(workdir, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epochs": 50, "arch": "mlp", "nne": 3}))
    assert cli.main(["train", "--data", str(workdir / "lin" / "train.csv"), "--config", str(cfg),
                     "--epochs", "20", "--out", str(tmp_path)]) == 0
    model = read_json(tmp_path / "model.json")
    assert model["arch"] == "mlp" and model["n_ne"] == 3
    assert model["train_config"]["epochs"] == 20


def test_plan_mismatch_exit(workdir, tmp_path):
    assert cli.main(["gen", "--protocol", "linear", "--theory", "--plan", "xyz",
                     "--out", str(tmp_path / "d")]) == 0
    code = cli.main(["eval", "--model", str(workdir / "model" / "model.json"),
                     "--data", str(tmp_path / "d" / "test.csv"), "--out", str(tmp_path / "e")])
    assert code == cli.EXIT_PLAN


def test_degenerate_exit(workdir, tmp_path):
    lines = (workdir / "lin" / "train.csv").read_text().splitlines()
    kept = [lines[0]] + [ln for ln in lines[1:] if ln.split(",")[7] == "1"]
    (tmp_path / "d.csv").write_text("\n".join(kept) + "\n")
    code = cli.main(["train", "--data", str(tmp_path / "d.csv"), "--out", str(tmp_path)])
    assert code == cli.EXIT_DEGENERATE


@pytest.mark.parametrize("argv", [
    ["gen", "--shots", "0"],
    ["train", "--arch", "mlp", "--nne", "0", "--data", "x.csv"],
    ["train", "--arch", "linear", "--nne", "4", "--data", "x.csv"],
    ["train", "--data", "missing.csv"],
    ["eval", "--data", "x.csv"],
])
def test_invalid_config_exit(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_bad_config_file(tmp_path):
    (tmp_path / "c.json").write_text('{"bogus": 1}')
    assert cli.main(["gen", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 2
    (tmp_path / "c.json").write_text("not json")
    assert cli.main(["gen", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as err:
        cli.main(["gen", "--protocol", "cubic"])
    assert err.value.code == 2

import json
import math
import os

import pytest

import cli
from services.field_calculus import FieldCalculator

from conftest import config_dict


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    # the error document is the last stderr line
    lines = err.strip().splitlines()
    return code, out, lines[-1] if lines else ""


class TestCommands:
    def test_h_eval_from_samples(self, capsys, config_file):
        path = config_file(config_dict(d=1, k=1))
        code, out, _ = run(capsys, "--config", path, *"h-eval --w 1.0 --samples 0.0 --method exact".split())
        assert code == 0
        doc = json.loads(out)
        assert doc["h"] == pytest.approx(math.exp(-1.0))
        assert doc["lambda_h"] == pytest.approx(math.exp(-1.0))

    def test_global_flags_after_subcommand(self, capsys, config_file):
        path = config_file(config_dict(d=1, k=1))
        code, out, _ = run(capsys, "h-eval", "--config", path, *"--seed 3 --w 1.0 --samples 0.0".split())
        assert code == 0
        assert json.loads(out)["w"] == 1.0

    def test_h_eval_from_field_file(self, capsys, config_file, tmp_path):
        field = tmp_path / "field.csv"
        field.write_text("w,value\n0.0,0.0\nmode,step\ninf,0.0\n-inf,1.0\n", encoding="utf-8")
        path = config_file(config_dict(d=1, k=1))
        code, out, _ = run(capsys, "--config", path, "h-eval", "--w", "1.0", "--field", str(field))
        assert code == 0
        assert json.loads(out)["h"] == pytest.approx(math.exp(-1.0))

    def test_dmono_check(self, capsys, config_file):
        path = config_file(config_dict(dist={"type": "det", "a": 1.0}))
        code, out, _ = run(capsys, "--config", path, *"dmono-check --gaps 0 0.5 2 --samples 500".split())
        assert code == 0
        doc = json.loads(out)
        assert [c["mean"] for c in doc["cells"]] == pytest.approx([2.0, 1.5, 1.0])
        assert doc["is_d_monotone"]

    def test_dmono_check_class_index(self, capsys, config_file):
        path = config_file(config_dict())
        code, _, err = run(capsys, "--config", path, "dmono-check", "--class-index", "3")
        assert code == 2
        assert json.loads(err)["error_code"] == "PARAM_RANGE"

    def test_speed_range_fallback(self, capsys, config_file):
        path = config_file(config_dict(d=1, k=1))
        code, out, _ = run(capsys, "--config", path, "speed-range")
        assert code == 0
        doc = json.loads(out)
        assert doc["analytic_fallback"]
        assert doc["v_min"] == doc["v_max"] == pytest.approx(1.0)

    def test_speed_range_report_files(self, capsys, config_file, tmp_path):
        path = config_file(config_dict(d=1, k=1))
        out_dir = str(tmp_path / "out")
        code, _, _ = run(capsys, "--config", path, "--seed", "5", "--out", out_dir, "speed-range")
        assert code == 0
        names = sorted(os.listdir(out_dir))
        assert len(names) == 2
        assert names[0].startswith("speed_range_report_") and names[0].endswith("_5.csv")

    def test_simulate_to_file(self, capsys, config_file, tmp_path):
        path = config_file(config_dict(left=0.0, speed=2.0))
        out_dir = str(tmp_path / "sim")
        args = ["--config", path, "--out", out_dir, *"simulate --n 10 --horizon 3 --record-every 1".split()]
        code, _, _ = run(capsys, *args)
        assert code == 0
        (name,) = os.listdir(out_dir)
        with open(os.path.join(out_dir, name), encoding="utf-8") as fh:
            assert len(fh.read().splitlines()) == 5

    def test_simulate_to_stdout(self, capsys, config_file):
        path = config_file(config_dict())
        code, out, _ = run(capsys, "--config", path, "simulate", "--n", "5", "--horizon", "2")
        assert code == 0
        assert out.splitlines()[0].startswith("t,")

    def test_phi1_bound_experiment(self, capsys, config_file, tmp_path):
        path = config_file(config_dict(left=0.0, speed=2.0))
        out_dir = str(tmp_path / "phi1")
        options = "--n-list 10 20 --burn-in 5 --window 10 --batches 5 --replicas 2".split()
        args = ["--config", path, "--out", out_dir, "phi1-bound", *options]
        code, _, _ = run(capsys, *args)
        assert code in (0, 1)
        assert any(name.endswith(".json") for name in os.listdir(out_dir))

    def test_fixed_point_two_sided(self, capsys, config_file):
        path = config_file(config_dict(left=0.0, right=4.0, speed=1.0))
        code, out, _ = run(capsys, "--config", path, "fixed-point")
        assert code == 0
        doc = json.loads(out)
        assert 0.0 < doc["load"] < 1.0
        assert doc["frame"]["right"] == 4.0

    def test_fixed_point_to_csv_path(self, capsys, config_file, tmp_path):
        path = config_file(config_dict(left=0.0, right=4.0, speed=1.0))
        target = tmp_path / "runs" / "fp.csv"
        code, _, _ = run(capsys, "--config", path, "fixed-point", "--out", str(target))
        assert code == 0
        assert sorted(os.listdir(tmp_path / "runs")) == ["fp.csv", "fp.json"]
        field = FieldCalculator.from_csv(str(target))
        assert field.at(0.0) > field.at(4.0)
        with open(tmp_path / "runs" / "fp.json", encoding="utf-8") as fh:
            assert json.load(fh)["classification"] == "regulated"

    def test_simulate_to_csv_path(self, capsys, config_file, tmp_path):
        path = config_file(config_dict(left=0.0, speed=2.0))
        target = tmp_path / "run.csv"
        options = "simulate --n 10 --horizon 3 --record-every 1".split()
        code, _, _ = run(capsys, "--config", path, "--out", str(target), *options)
        assert code == 0
        assert target.read_text(encoding="utf-8").startswith("t,")


class TestErrors:
    def test_missing_config(self, capsys):
        code, _, err = run(capsys, "h-eval", "--w", "0.5", "--samples", "0")
        assert code == 2
        assert json.loads(err)["error"] == "ValidationError"

    def test_unreadable_config(self, capsys, tmp_path):
        code, _, err = run(capsys, "--config", str(tmp_path / "none.json"), "speed-range")
        assert code == 2
        assert json.loads(err)["error_code"] == "IO_ERROR"

    def test_k_exceeds_d(self, capsys, config_file):
        path = config_file(config_dict(d=2, k=3))
        code, _, err = run(capsys, "--config", path, "speed-range")
        assert code == 2
        assert json.loads(err)["error_code"] == "K_EXCEEDS_D"

    def test_h_eval_needs_a_field(self, capsys, config_file):
        code, _, err = run(capsys, "--config", config_file(config_dict()), "h-eval", "--w", "0.5")
        assert code == 2
        assert "field" in json.loads(err)["message"]

    def test_unknown_command(self, capsys):
        with pytest.raises(SystemExit):
            cli.main(["teleport"])

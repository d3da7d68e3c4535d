import csv
import json
from pathlib import Path

import pytest

from oqslab import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def load(name, tmp_path, **changes):
    config = json.loads((CONFIGS / name).read_text())
    config["output"] = str(tmp_path / Path(config["output"]).name)
    config.update(changes)
    return config


def write_config(tmp_path, config, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_repeatable_csv(name, tmp_path):
    a = load(name, tmp_path / "a")
    b = load(name, tmp_path / "b")
    cli.run(a, threads=1)
    cli.run(b, threads=3)
    assert Path(a["output"] + ".csv").read_bytes() == Path(b["output"] + ".csv").read_bytes()
    meta = json.loads(Path(a["output"] + ".meta.json").read_text())
    assert meta["rows"] > 0 and meta["backend"] in ("cython", "python")


def test_divisibility_rows(tmp_path):
    config = load("divisibility.json", tmp_path, seeds=list(range(100)))
    meta = cli.run(config, threads=4)
    assert meta["rows"] == 200
    with open(config["output"] + ".csv") as fh:
        rows = list(csv.DictReader(fh))
    flags = {(r["seed"], r["commuting_flag"]) for r in rows}
    assert len(flags) == 200
    commuting = [float(r["residual"]) for r in rows if r["commuting_flag"] == "1"]
    assert max(commuting) < 1e-9


def test_main_success(tmp_path, capsys):
    path = write_config(tmp_path, load("simulate.json", tmp_path))
    assert cli.main(["--config", path]) == 0
    assert "wrote" in capsys.readouterr().out


def test_main_overrides(tmp_path):
    config = load("divisibility.json", tmp_path)
    path = write_config(tmp_path, config)
    out = str(tmp_path / "other")
    assert cli.main(["divisibility", "--config", path, "--out", out, "--seeds", "3,4"]) == 0
    with open(out + ".csv") as fh:
        assert {r["seed"] for r in csv.DictReader(fh)} == {"3", "4"}


def test_config_errors_listed(tmp_path, capsys):
    config = load("divisibility.json", tmp_path, seeds=[])
    config["time_grid"] = {"t0": 1.0, "t1": 0.5, "steps": 4}
    assert cli.main(["--config", write_config(tmp_path, config)]) == 2
    err = capsys.readouterr().err
    assert "seeds" in err and "t1" in err


def test_validate_only(tmp_path, capsys):
    good = write_config(tmp_path, load("simulate.json", tmp_path))
    assert cli.main(["--config", good, "--validate-only"]) == 0
    bad = load("simulate.json", tmp_path)
    bad["command"] = "nope"
    assert cli.main(["--config", write_config(tmp_path, bad, "bad.json"), "--validate-only"]) == 2
    assert "command" in capsys.readouterr().out


def test_size_limit(tmp_path, capsys):
    config = load("simulate.json", tmp_path)
    config["model"] = {"random": {"d_S": 64, "d_E": 128}}
    assert cli.main(["--config", write_config(tmp_path, config)]) == 2
    assert "SizeLimit" in capsys.readouterr().err


def test_bad_json(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"command": "simulate",\n  "seeds": [1,,2]}')
    assert cli.main(["--config", str(path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert cli.main(["--config", str(tmp_path / "none.json")]) == 2


def test_numerical_failure(tmp_path, capsys):
    config = load("spinboson_periodic.json", tmp_path)
    config["model"]["beta"] = 2 ** 0.5
    assert cli.main(["--config", write_config(tmp_path, config)]) == 3
    assert "spinboson.periodicity_semigroup_check" in capsys.readouterr().err


def test_validate_messages():
    assert cli.validate([]) == ["config: must be a JSON object"]
    problems = cli.validate({"command": "simulate", "seeds": [-1], "time_grid": {"t1": 1},
                             "output": "x", "tolerances": {"bogus": 1.0}, "model": 3})
    text = "\n".join(problems)
    for key in ("seeds", "steps", "tolerances.bogus", "model"):
        assert key in text

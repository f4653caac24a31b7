import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from rdmft_lattice.__main__ import cli, run
from rdmft_lattice.config import RunConfig
from rdmft_lattice.emit import emit_csv
from rdmft_lattice.errors import ConfigError
from rdmft_lattice.settings import Settings

CONFIGS = Path(__file__).parent.parent / "configs"
SQUARE = str(CONFIGS / "square.json")
RING = str(CONFIGS / "ring6.json")


def invoke(*args):
    result = CliRunner().invoke(cli, list(args), catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result.output


def test_basis_square():
    output = invoke("basis", "--config", SQUARE, "--sector", "2,0")
    assert "R=10" in output
    assert "adapted R=3" in output


def test_basis_csv(tmp_path):
    path = tmp_path / "basis.csv"
    invoke("basis", "--config", RING, "--csv", str(path), "--quiet")
    table = pd.read_csv(path)
    assert list(table.columns) == ["sector", "r", "orbitals", "vertex"]
    assert list(table.orbitals) == ["0 1 5", "0 2 4", "1 2 3", "3 4 5"]


def test_polytope_ring():
    output = invoke("polytope", "--config", RING, "--sector", "0")
    facets = [line for line in output.splitlines() if line.startswith("facet")]
    assert len(facets) == 4
    assert "n0+n1-n2 >= 0" in facets[0]
    assert "simplex=True" in output


def test_polytope_square_reports_gram_eigenvalues():
    output = invoke("polytope", "--config", SQUARE)
    assert "independent: n2u" in output
    line = next(line for line in output.splitlines() if line.startswith("C eigenvalues:"))
    eigenvalues = [float(v) for v in line.split(":")[1].split()]
    assert eigenvalues == pytest.approx([0.0, 1.0, 1.5], abs=1e-12)
    null = [line for line in output.splitlines() if line.startswith("  null w:")]
    assert len(null) == 1
    vector = np.array([float(v) for v in null[0].split(":")[1].split()])
    assert np.allclose(np.sort(np.abs(vector)), np.array([1.0, 1.0, 2.0]) / np.sqrt(6.0), atol=1e-10)


def test_functional_grid(tmp_path):
    path = tmp_path / "functional.csv"
    invoke(
        "functional",
        "--config",
        SQUARE,
        "--grid",
        "0.1:0.9:5",
        "--csv",
        str(path),
        "--no-progress",
    )
    table = pd.read_csv(path)
    assert list(table.columns) == ["n2u", "F", "converged", "margin", "dF/dn2u"]
    assert len(table) == 5
    assert table.F.iloc[2] == pytest.approx(0.0, abs=1e-8)


def test_functional_skips_outside_points():
    output = invoke("functional", "--config", RING, "--point", "1,1,1", "--point", "0.5,0.5,0.5")
    assert "evaluated 2 of 3 points" in output


def test_functional_ray():
    output = invoke("functional", "--config", SQUARE, "--facet", "1", "--ray", "--quiet")
    beta = float(output.split("beta=")[1].split()[0])
    assert beta == pytest.approx(0.5, abs=0.02)


def test_ground_state_all_sectors(tmp_path):
    path = tmp_path / "energies.csv"
    invoke("ground-state", "--config", RING, "--sector", "all", "--csv", str(path), "--quiet")
    table = pd.read_csv(path)
    assert len(table) == 6
    assert table.R.sum() == 20


def test_square_figure_two(tmp_path):
    path = tmp_path / "energy.csv"
    invoke("square", "--figure", "2", "--u-max", "100", "--u-points", "12", "--csv", str(path))
    table = pd.read_csv(path)
    assert (table.rel_err_strong[table.u >= 25] < 1e-3).all()


def test_square_writes_both_tables(tmp_path):
    path = tmp_path / "square.csv"
    invoke("square", "--u", "1", "--u", "4", "--grid-n2", "9", "--csv", str(path), "--quiet")
    assert len(pd.read_csv(tmp_path / "square-functional.csv")) == 18
    assert len(pd.read_csv(tmp_path / "square-energy.csv")) == 2


def test_dry_run():
    assert "config ok" in invoke("functional", "--config", SQUARE, "--dry-run")


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"lattice": {"D": 1, "L": 1}, "particles": 2}}))
    assert run(["basis", "--config", str(bad)]) == 2
    assert run(["basis", "--nonsense"]) == 2
    assert run(["basis", "--config", RING, "--sector", "0,1"]) == 2
    empty = tmp_path / "empty.json"
    empty.write_text(
        json.dumps(
            {
                "model": {"lattice": {"L": 4, "spinful": False}, "particles": 4},
                "sector": {"K": [0]},
            }
        )
    )
    assert run(["ground-state", "--config", str(empty)]) == 1
    assert run(["basis", "--config", RING, "--quiet"]) == 0


def test_config_errors_carry_pointer():
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_json(json.dumps({"model": {"lattice": {"L": 1}, "particles": 2}}))
    assert excinfo.value.pointer == "/model/lattice/L"
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_json(json.dumps({"seed": 1, "colour": "red"}))
    assert excinfo.value.pointer == "/colour"


def test_config_round_trip(tmp_path):
    config = RunConfig.from_path(CONFIGS / "square.json")
    path = tmp_path / "out" / "square.json"
    config.to_path(path)
    assert RunConfig.from_path(path).model_dump() == config.model_dump()
    assert json.loads(RunConfig.schema_json())["title"] == "RunConfig"


def test_emit_csv(tmp_path):
    empty = emit_csv([], tmp_path / "empty.csv", ["a", "b"])
    assert empty.read_bytes() == b"a,b\r\n"
    rows = [{"a": 0.1, "b": 1 / 3}]
    first = emit_csv(rows, tmp_path / "first.csv").read_bytes()
    second = emit_csv(rows, tmp_path / "second.csv").read_bytes()
    assert first == second
    assert first == b"a,b\r\n0.10000000000000001,0.33333333333333331\r\n"


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("RDMFT_LOG_LEVEL", "DEBUG")
    assert Settings(_env_file=None).log_level == "DEBUG"


def test_invalid_sector_exits_with_usage_code(tmp_path):
    assert run(["basis", "--config", SQUARE, "--sector", "2,0.3"]) == 2
    assert run(["basis", "--config", SQUARE, "--sector", "2,1"]) == 2
    config = json.loads(Path(SQUARE).read_text())
    config["sector"] = {"K": [2], "Mz": 1.0, "S": 0.0}
    bad = tmp_path / "sector.json"
    bad.write_text(json.dumps(config))
    assert run(["basis", "--config", str(bad)]) == 2


def test_sector_values_checked_on_load():
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_json(json.dumps({"sector": {"K": [2], "Mz": 0.25}}))
    assert excinfo.value.pointer == "/sector"
    with pytest.raises(ConfigError):
        RunConfig.from_json(json.dumps({"sector": {"K": [2], "Mz": 1.0, "S": 0.0}}))


def test_tolerances_reach_search_options():
    config = RunConfig.from_json(
        json.dumps({"tolerances": {"constraint": 1e-9, "value": 1e-4}, "seed": 7})
    )
    options = config.search_options()
    assert options.constraint_tolerance == 1e-9
    assert options.value_tolerance == 1e-4
    assert options.seed == 7

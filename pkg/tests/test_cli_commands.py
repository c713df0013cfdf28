import json
from pathlib import Path
from unittest.mock import patch

import pytest
from typer.testing import CliRunner

from usctec.cli import app
from usctec.repro import FAIL
from usctec.repro import NOTE
from usctec.repro import PASS
from usctec.repro import Check

EXAMPLE2_SYSTEM = {
    "N": 6,
    "L": 2,
    "S": 1,
    "e": ["3/5", "3/5", "4/5", "4/5", 1, 1],
    "realizations": [{"s": [3, 3, 4, 4, 5, 5], "prob": "1/2"}, {"s": [3, 1, 2, 2, 3, 5], "prob": "1/2"}],
}


@pytest.fixture
def runner():
    """Create a CLI runner for testing."""
    return CliRunner()


def invoke_json(runner, args):
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    return json.loads(result.stdout)


def test_solve_lp(runner):
    """Test water-filling on six machines."""
    data = invoke_json(runner, ["solve-lp", "--l", "3", "--s", "3,3,4,4,5,5"])
    assert data["c"] == "1/8"
    assert data["theta"] == ["3/8", "3/8", "1/2", "1/2", "5/8", "5/8"]
    assert data["clamped"] == []


def test_solve_lp_with_caps(runner):
    """Test capped machines are reported from 1."""
    data = invoke_json(runner, ["solve-lp", "--l", "1", "--s", "1,3", "--sigma", "1,1/2"])
    assert data["theta"] == ["1/2", "1/2"]
    assert data["clamped"] == [2]


def test_divide(runner):
    """Test division output is labelled from machine 1."""
    data = invoke_json(runner, ["divide", "--theta", "3/8,3/8,1/2,1/2,5/8,5/8", "--k", "3"])
    assert data["gamma"] == ["3/8", "1/4", "1/8", "1/8", "1/8"]
    assert data["supports"] == [[1, 5, 6], [3, 4, 5], [2, 3, 6], [2, 3, 4], [2, 4, 6]]


def test_assign(runner):
    """Test a fractional row splits into two groups."""
    data = invoke_json(runner, ["assign", "--mu-row", "1/2,1/2,1,1/2,1/2", "--k", "3"])
    assert data["groups"] == [{"mass": "1/2", "machines": [1, 3, 5]}, {"mass": "1/2", "machines": [2, 3, 4]}]


def test_assign_with_columns(runner):
    """Test column ranges are realized when r and L are given."""
    data = invoke_json(runner, ["assign", "--mu-row", "1/2,1/2,1,1/2,1/2", "--k", "3", "--r", "8", "--L", "2"])
    assert [group["columns"] for group in data["groups"]] == [[0, 2], [2, 4]]


def test_place_scenario(runner):
    """Test overflow-aware placement on the heterogeneous-storage scenario."""
    data = invoke_json(runner, ["place", "example2"])
    assert data["expected_time"] == "1301/5600"
    assert data["disabled"] == [1]
    assert data["passes"][0]["overflow"] == {"rho_hat": "3/5", "machines": [1]}
    assert data["passes"][1]["overflow"] is None
    assert data["storage"][0]["measure"] == "3/5"


def test_place_system_file(runner):
    """Test a system file gives the same placement as the scenario."""
    with runner.isolated_filesystem():
        Path("system.json").write_text(json.dumps(EXAMPLE2_SYSTEM))
        data = invoke_json(runner, ["place", "system.json"])
        assert data["expected_time"] == "1301/5600"


def test_place_geometry(runner):
    """Test the geometry CSV."""
    result = runner.invoke(app, ["place", "example2", "--geometry"])
    assert result.exit_code == 0
    lines = result.stdout.splitlines()
    assert lines[0] == "machine,start,end,tags"
    assert "1,3/16,3/8,common" in lines


def test_cyclic(runner):
    """Test cyclic placement with full storage."""
    data = invoke_json(runner, ["cyclic", "table1", "--q", "12"])
    assert data["expected_time"] == "189/3965"
    assert data["expected_time_5dp"] == "0.04766"
    assert data["storage_size"] == "12/1"


def test_cyclic_storage_level_scenario(runner):
    """Test the table1:Q scenario form."""
    data = invoke_json(runner, ["cyclic", "table1:12", "--q", "12"])
    assert data["storage"][0]["measure"] == "1/1"


def test_simulate(runner):
    """Test a verified coded round."""
    data = invoke_json(runner, ["simulate", "example1"])
    assert data["expected_time"] == "1/8"
    assert data["verification"]["passed"] is True
    assert data["verification"]["rounds"][0]["q"] == 8


def test_simulate_fixed_size(runner):
    """Test explicit matrix sizes."""
    data = invoke_json(runner, ["simulate", "example1", "--q", "8", "--r", "4", "--seed", "3"])
    assert data["verification"]["seed"] == 3
    assert data["verification"]["rounds"][0]["r"] == 4


def test_simulate_csv_matrices(runner):
    """Test matrices read from CSV files."""
    with runner.isolated_filesystem():
        Path("a.csv").write_text("\n".join(",".join(str(3 * i + j) for j in range(3)) for i in range(8)))
        Path("b.csv").write_text("1,0\n0,1\n1,1\n")
        data = invoke_json(runner, ["simulate", "example1", "--a-csv", "a.csv", "--b-csv", "b.csv"])
        assert (data["verification"]["rounds"][0]["q"], data["verification"]["rounds"][0]["r"]) == (8, 2)


def test_simulate_too_many_stragglers(runner):
    """Test a failed verification exits with code 3."""
    result = runner.invoke(app, ["simulate", "example1", "--stragglers", "2"])
    assert result.exit_code == 3
    assert "verification" in result.output


def test_simulate_named_stragglers(runner):
    """Test withholding one named machine of a group still decodes."""
    data = invoke_json(runner, ["simulate", "example1", "--stragglers", "1:1=5"])
    assert data["verification"]["passed"] is True
    assert data["verification"]["stragglers"] is None
    assert data["verification"]["withheld"] == "1:1=5"


def test_simulate_named_stragglers_too_many(runner):
    """Test withholding two machines of a three-machine group exits with code 3."""
    result = runner.invoke(app, ["simulate", "example1", "--stragglers", "1:1=1,5"])
    assert result.exit_code == 3
    assert "verification" in result.output


def test_simulate_stragglers_malformed(runner):
    """Test unreadable straggler text is an input error."""
    result = runner.invoke(app, ["simulate", "example1", "--stragglers", "1=2"])
    assert result.exit_code == 1
    assert "block:group=machines" in result.output


def test_simulate_cyclic(runner):
    """Test the cyclic strategy can be simulated."""
    data = invoke_json(runner, ["simulate", "example1", "--strategy", "cyclic", "--cyclic-q", "6"])
    assert data["strategy"] == "cyclic"
    assert data["verification"]["passed"] is True


def test_compare(runner):
    """Test the comparison CSV for one storage level."""
    result = runner.invoke(app, ["compare", "--table1", "--q", "12"])
    assert result.exit_code == 0
    lines = result.stdout.splitlines()
    assert lines[0] == "Q_over_N,strategy,storage_size,expected_time_exact,expected_time_5dp"
    assert lines[1] == "12/12,cyclic,12/1,189/3965,0.04766"
    assert len(lines) == 3


def test_compare_to_file(runner):
    """Test writing the comparison to a file."""
    with runner.isolated_filesystem():
        result = runner.invoke(app, ["compare", "example1", "--q", "6", "--output", "out.csv", "--pretty"])
        assert result.exit_code == 0
        assert "Written to out.csv" in result.output
        assert Path("out.csv").read_text().splitlines()[1] == "6/6,cyclic,6/1,1/8,0.12500"


def test_compare_needs_a_system(runner):
    """Test compare without a system or --table1."""
    result = runner.invoke(app, ["compare"])
    assert result.exit_code == 1
    assert "Give a system or --table1" in result.output


def test_export_fig_csv(runner):
    """Test the geometry CSV export."""
    with runner.isolated_filesystem():
        result = runner.invoke(app, ["export-fig", "example2", "--csv", "geometry.csv"])
        assert result.exit_code == 0
        lines = Path("geometry.csv").read_text().splitlines()
        assert lines[1:4] == ["1,0/1,3/16,s1", "1,3/16,3/8,common", "1,3/8,3/5,s2"]


def test_export_fig_png_without_matplotlib(runner):
    """Test PNG export reports a missing plotting extra."""
    with runner.isolated_filesystem(), patch.dict("sys.modules", {"matplotlib": None}):
        result = runner.invoke(app, ["export-fig", "example2", "--png", "geometry.png"])
        assert result.exit_code == 1
        assert "matplotlib" in result.output


def test_repro_pass(runner):
    """Test repro with every check passing."""
    with patch("usctec.cli.run_repro") as mock_run_repro:
        mock_run_repro.return_value = [Check(name="Example1.c = 1/8", status=PASS)]
        result = runner.invoke(app, ["repro"])
        assert result.exit_code == 0
        assert "PASS" in result.stdout
        assert "All gating checks passed" in result.stdout


def test_repro_note_does_not_fail(runner):
    """Test informational checks never fail the run."""
    with patch("usctec.cli.run_repro") as mock_run_repro:
        mock_run_repro.return_value = [
            Check(name="Example1.c = 1/8", status=PASS),
            Check(name="Table1.usctec[Q=6].storage", status=NOTE, detail="got 5.1, reference 5.2"),
        ]
        result = runner.invoke(app, ["repro"])
        assert result.exit_code == 0
        assert "NOTE" in result.stdout


def test_repro_fail(runner):
    """Test a failing check exits with code 3."""
    with patch("usctec.cli.run_repro") as mock_run_repro:
        mock_run_repro.return_value = [Check(name="Example2.passes", status=FAIL, detail="got 1, expected 2")]
        result = runner.invoke(app, ["repro"])
        assert result.exit_code == 3
        assert "acceptance" in result.output
        assert "Example2.passes" in result.output


def test_repro_json(runner):
    """Test repro as JSON."""
    with patch("usctec.cli.run_repro") as mock_run_repro:
        mock_run_repro.return_value = [Check(name="Relaxed.expected_time", status=PASS)]
        data = invoke_json(runner, ["repro", "--json"])
        assert data == [{"name": "Relaxed.expected_time", "status": "PASS", "detail": ""}]

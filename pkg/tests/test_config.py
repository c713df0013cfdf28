from pathlib import Path
from fractions import Fraction

import pytest
from pydantic import ValidationError

from usctec.config import THREADS_ENV
from usctec.config import SystemConfig
from usctec.config import load_config
from usctec.config import load_system
from usctec.config import parse_system
from usctec.config import load_settings
from usctec.config import get_config_paths
from usctec.config import get_default_settings
from usctec.simulator import example2

EXAMPLE2_JSON = """
{
  "N": 6, "L": 2, "S": 1,
  "e": ["3/5", "3/5", "4/5", "4/5", 1, 1],
  "realizations": [
    {"s": [3, 3, 4, 4, 5, 5], "prob": "1/2"},
    {"s": [3, 1, 2, 2, 3, 5], "prob": "1/2"}
  ],
  "field": {"prime": 2147483647},
  "matrices": {"q": 8, "v": 4, "r": 2, "seed": 7}
}
"""

EXAMPLE2_YAML = """
N: 6
L: 2
S: 1
e: [0.6, 0.6, 0.8, 0.8, 1, 1]
realizations:
  - s: [3, 3, 4, 4, 5, 5]
    prob: 1/2
  - s: [3, 1, 2, 2, 3, 5]
    prob: 1/2
"""


@pytest.fixture(autouse=True)
def no_threads_env(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)


class TestSettings:
    """Tool settings from TOML."""

    def test_defaults(self):
        """Test default settings."""
        defaults = get_default_settings()
        assert defaults["prime"] == 2**31 - 1
        assert defaults["lcm_bound"] == 10_000
        assert defaults["threads"] == 1

    def test_missing_explicit_file(self):
        """Test an explicit path must exist."""
        with pytest.raises(FileNotFoundError):
            load_config(Path("nonexistent.toml"))

    def test_standalone_file(self, tmp_path):
        """Test a usctec.toml is read whole."""
        path = tmp_path / "usctec.toml"
        path.write_text("prime = 101\nseed = 3\n")
        assert load_config(path) == {"prime": 101, "seed": 3}

    def test_pyproject_table(self, tmp_path):
        """Test pyproject.toml is read from [tool.usctec]."""
        path = tmp_path / "pyproject.toml"
        path.write_text('[project]\nname = "x"\n\n[tool.usctec]\nv = 8\n')
        assert load_config(path) == {"v": 8}

    def test_search_finds_pyproject(self, tmp_path, monkeypatch):
        """Test the current directory is searched."""
        (tmp_path / "pyproject.toml").write_text("[tool.usctec]\ndecimals = 3\n")
        monkeypatch.chdir(tmp_path)
        assert get_config_paths()[0] == (tmp_path / "pyproject.toml").resolve()
        assert load_settings().decimals == 3

    def test_unparsable_file(self, tmp_path):
        """Test invalid TOML names the file."""
        path = tmp_path / "usctec.toml"
        path.write_text("prime = = 3")
        with pytest.raises(ValueError) as exc_info:
            load_config(path)
        assert "usctec.toml" in str(exc_info.value)

    def test_settings_merge_defaults(self, tmp_path):
        """Test partial files keep the other defaults."""
        path = tmp_path / "usctec.toml"
        path.write_text("seed = 9\n")
        settings = load_settings(path)
        assert settings.seed == 9
        assert settings.prime == 2**31 - 1

    def test_threads_from_environment(self, tmp_path, monkeypatch):
        """Test the environment overrides the thread count."""
        path = tmp_path / "usctec.toml"
        path.write_text("threads = 2\n")
        monkeypatch.setenv(THREADS_ENV, "4")
        assert load_settings(path).threads == 4

    def test_invalid_threads_environment(self, tmp_path, monkeypatch):
        """Test a non-integer thread count is rejected."""
        path = tmp_path / "usctec.toml"
        path.write_text("")
        monkeypatch.setenv(THREADS_ENV, "many")
        with pytest.raises(ValueError):
            load_settings(path)


class TestSystemConfig:
    """System descriptions in JSON and YAML."""

    def test_json(self):
        """Test a JSON description builds the expected model."""
        system = parse_system(EXAMPLE2_JSON)
        assert system.to_model() == example2()
        assert system.field.prime == 2147483647
        assert system.matrices.seed == 7

    def test_yaml_with_decimals(self):
        """Test YAML with decimal storage constraints is exact."""
        system = parse_system(EXAMPLE2_YAML, ".yaml")
        params, dist = system.to_model()
        assert params == example2()[0]
        assert dist.probabilities == (Fraction(1, 2), Fraction(1, 2))

    def test_defaults(self):
        """Test e defaults to 1 and a single realization to probability 1."""
        system = SystemConfig.model_validate({"N": 3, "L": 1, "realizations": [{"s": [1, 2, 3]}]})
        params, dist = system.to_model()
        assert params.e == (1, 1, 1)
        assert params.S == 0
        assert dist.probabilities == (1,)

    def test_missing_field(self):
        """Test a missing field is located."""
        with pytest.raises(ValidationError) as exc_info:
            parse_system('{"L": 2, "realizations": []}')
        assert ("N",) in [error["loc"] for error in exc_info.value.errors()]

    def test_bad_rational(self):
        """Test a malformed rational is located by index."""
        with pytest.raises(ValidationError) as exc_info:
            parse_system('{"N": 2, "L": 1, "e": ["1/2", "half"], "realizations": [{"s": [1, 1]}]}')
        assert ("e", 1) in [error["loc"] for error in exc_info.value.errors()]

    def test_malformed_json(self):
        """Test invalid JSON is a validation error."""
        with pytest.raises(ValidationError):
            parse_system("{not json")

    def test_malformed_yaml(self):
        """Test invalid YAML is a ValueError."""
        with pytest.raises(ValueError):
            parse_system("N: [1, 2", ".yml")

    def test_load_system(self, tmp_path):
        """Test loading from a file chooses the parser by suffix."""
        path = tmp_path / "system.yaml"
        path.write_text(EXAMPLE2_YAML)
        assert load_system(path).N == 6
        with pytest.raises(FileNotFoundError):
            load_system(tmp_path / "missing.json")

"""
Configuration management for usctec.

Two kinds of input are handled here: tool settings (field prime, scaling bound,
rendering precision, seed, thread count), read from ``[tool.usctec]`` in a
pyproject.toml or from a standalone usctec.toml; and system descriptions (cluster
parameters and speed distribution) in JSON or YAML.
"""

import os
from typing import Any
from typing import Dict
from typing import List
from typing import Tuple
from typing import Optional
from pathlib import Path
from fractions import Fraction

import yaml
import tomli
from pydantic import Field
from pydantic import BaseModel
from pydantic import ConfigDict

from .model import Rational
from .model import SystemParams
from .model import RationalVector
from .model import SpeedRealization
from .model import SpeedDistribution

THREADS_ENV = "USCTEC_THREADS"


class Settings(BaseModel):
    """
    Tool settings.

    This Pydantic model defines the schema of the ``[tool.usctec]`` table, with
    type validation and default values.
    """

    prime: int = Field(2**31 - 1, description="Prime modulus of the coded rounds")
    lcm_bound: int = Field(10_000, description="Largest row or column count instantiated by the simulator")
    v: int = Field(4, description="Columns of A and rows of B in simulated rounds")
    decimals: int = Field(5, description="Decimal places when rendering rationals")
    seed: int = Field(0, description="Seed for matrix sampling and straggler selection")
    threads: int = Field(1, description="Worker threads for per-realization evaluation")


def get_default_settings() -> Dict[str, Any]:
    """Default settings used when no configuration file is found."""
    return Settings().model_dump()


def get_config_paths() -> List[Path]:
    """
    All candidate configuration files, in priority order.

    The current directory and each parent are searched; in each directory
    pyproject.toml takes precedence over usctec.toml.
    """
    paths = []
    dir_path = Path.cwd()
    while dir_path != dir_path.parent:
        paths.append(dir_path / "pyproject.toml")
        paths.append(dir_path / "usctec.toml")
        dir_path = dir_path.parent
    return paths


def load_config(config_path: Optional[Path] = None) -> Dict[str, Any]:
    """
    Load raw settings from a file, or search for one.

    Args:
        config_path: Optional explicit path to a configuration file.

    Returns:
        Dict[str, Any]: The settings table; defaults when nothing is found.

    Raises:
        FileNotFoundError: If ``config_path`` is given but does not exist.
        ValueError: If the file cannot be parsed.
    """
    if config_path:
        if not config_path.exists():
            raise FileNotFoundError(f"Config file not found: {config_path}")
        return _parse_config_file(config_path)

    for path in get_config_paths():
        if path.exists():
            try:
                config_data = _parse_config_file(path)
            except ValueError:
                continue
            if config_data:
                return config_data
    return get_default_settings()


def _parse_config_file(file_path: Path) -> Dict[str, Any]:
    try:
        with open(file_path, "rb") as f:
            data = tomli.load(f)
    except Exception as e:
        raise ValueError(f"Error parsing {file_path}: {str(e)}")
    if file_path.name == "pyproject.toml":
        return data.get("tool", {}).get("usctec", {})
    return data


def load_settings(config_path: Optional[Path] = None) -> Settings:
    """
    Settings from configuration, with ``USCTEC_THREADS`` overriding ``threads``.

    Raises:
        FileNotFoundError: If ``config_path`` is given but does not exist.
        ValueError: If the configuration is unparsable or invalid.
    """
    data = {**get_default_settings(), **load_config(config_path)}
    threads = os.environ.get(THREADS_ENV)
    if threads:
        try:
            data["threads"] = int(threads)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {threads!r}")
    return Settings.model_validate(data)


class RealizationConfig(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    s: RationalVector
    prob: Rational = Fraction(1)


class FieldConfig(BaseModel):
    prime: Optional[int] = None


class MatrixConfig(BaseModel):
    q: Optional[int] = None
    v: Optional[int] = None
    r: Optional[int] = None
    seed: Optional[int] = None
    a_csv: Optional[Path] = None
    b_csv: Optional[Path] = None


class SystemConfig(BaseModel):
    """
    A system description as read from JSON or YAML.

    ``e`` defaults to 1 for every machine; a single realization may omit ``prob``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    N: int
    L: int
    S: int = 0
    e: Optional[RationalVector] = None
    realizations: List[RealizationConfig]
    field: FieldConfig = Field(default_factory=FieldConfig)
    matrices: MatrixConfig = Field(default_factory=MatrixConfig)

    def to_params(self) -> SystemParams:
        e = self.e if self.e is not None else (Fraction(1),) * self.N
        return SystemParams(N=self.N, L=self.L, S=self.S, e=e)

    def to_distribution(self) -> SpeedDistribution:
        return SpeedDistribution(
            realizations=tuple(SpeedRealization(s=item.s) for item in self.realizations),
            probabilities=tuple(item.prob for item in self.realizations),
        )

    def to_model(self) -> Tuple[SystemParams, SpeedDistribution]:
        return self.to_params(), self.to_distribution()


def parse_system(text: str, suffix: str = ".json") -> SystemConfig:
    """
    Parse a system description.

    Raises:
        pydantic.ValidationError: If fields are missing or malformed (including invalid JSON).
        ValueError: If YAML cannot be parsed.
    """
    if suffix.lower() in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ValueError(f"invalid YAML: {e}")
        return SystemConfig.model_validate(data)
    return SystemConfig.model_validate_json(text)


def load_system(path: Path) -> SystemConfig:
    """Read and parse a system description file."""
    if not path.exists():
        raise FileNotFoundError(f"System file not found: {path}")
    return parse_system(path.read_text(), path.suffix)

"""
Base classes for storage placement strategies.

A strategy turns cluster parameters and a speed distribution into one scheme per
speed realization, together with the storage each machine must hold. The simulator
and the command line only talk to strategies through this interface.
"""

from abc import ABC
from abc import abstractmethod
from typing import Any
from typing import Dict
from typing import Tuple
from fractions import Fraction
from typing import Annotated

from pydantic import PlainSerializer

from ..model import Scheme
from ..model import Rational
from ..model import UsctecError
from ..model import DomainModel
from ..model import SystemParams
from ..model import RationalVector
from ..model import format_rational
from ..model import SpeedDistribution
from ..intervals import IntervalSet


class StrategyError(UsctecError):
    """Raised for unknown strategies or invalid strategy settings."""


def _serialize_interval_set(value: IntervalSet):
    return [[format_rational(start), format_rational(end)] for start, end in value]


IntervalSetField = Annotated[IntervalSet, PlainSerializer(_serialize_interval_set)]


class StrategyResult(DomainModel):
    """
    Schedule produced by a strategy.

    Attributes:
        schemes: One scheme per speed realization.
        storage: Rows stored by each machine.
        times: Computation time per realization.
        expected_time: Probability-weighted computation time.
    """

    schemes: Tuple[Scheme, ...]
    storage: Tuple[IntervalSetField, ...]
    times: RationalVector
    expected_time: Rational

    @property
    def storage_size(self) -> Fraction:
        return sum((interval_set.measure for interval_set in self.storage), Fraction(0))


class PlacementStrategy(ABC):
    """
    Base class for placement strategies.

    Subclasses are constructed from a configuration dictionary and registered by
    name in ``STRATEGY_REGISTRY``.
    """

    def __init__(self, config: Dict[str, Any]):
        self.config = config

    @abstractmethod
    def schedule(self, params: SystemParams, dist: SpeedDistribution) -> StrategyResult:
        """
        Build schemes and storage for every realization.

        Args:
            params: Cluster parameters.
            dist: Speed distribution.

        Returns:
            StrategyResult: Schemes, storage and computation times.
        """

    @classmethod
    @abstractmethod
    def get_strategy_name(cls) -> str:
        """Registry name of the strategy (e.g. 'usctec', 'cyclic')."""

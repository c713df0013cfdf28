"""
Storage placement strategies.

Strategies are registered by name so the simulator and the command line can pick
one from configuration: ``usctec`` (overflow-aware placement) or ``cyclic``.
"""

from typing import Any
from typing import Dict

from .base import StrategyError
from .base import StrategyResult
from .base import PlacementStrategy
from .cyclic import CyclicStrategy
from .placement import HeuristicStrategy

__all__ = ["get_strategy", "PlacementStrategy", "StrategyResult", "STRATEGY_REGISTRY"]

STRATEGY_REGISTRY = {
    strategy_class.get_strategy_name(): strategy_class for strategy_class in [HeuristicStrategy, CyclicStrategy]
}


def get_strategy(config: Dict[str, Any]) -> PlacementStrategy:
    """
    Create the strategy named by ``config["strategy"]`` (default ``usctec``).

    Raises:
        StrategyError: If the name is not registered.

    Examples:
        >>> isinstance(get_strategy({"strategy": "cyclic", "Q": 6}), CyclicStrategy)
        True
    """
    name = config.get("strategy", "usctec")

    if name not in STRATEGY_REGISTRY:
        valid = ", ".join(STRATEGY_REGISTRY.keys())
        raise StrategyError(f"Unknown strategy: {name}. Valid strategies: {valid}")

    return STRATEGY_REGISTRY[name](config)

"""
Cyclic storage placement baseline.

The data matrix is cut into ``N`` equal row blocks and machine ``n`` stores the ``Q``
consecutive blocks ``n, n+1, ..., n+Q-1`` (wrapping around). Each block's load is then
water-filled over the available machines that store it.
"""

import logging
from typing import Tuple
from fractions import Fraction

from ..load import LoadProblem
from ..load import solve_lp
from ..load import expected_time
from ..load import computation_time
from ..model import Scheme
from ..model import SystemParams
from ..model import InfeasibleError
from ..model import SpeedRealization
from ..model import SpeedDistribution
from ..model import ensure_valid
from .base import StrategyError
from .base import StrategyResult
from .base import PlacementStrategy
from ..intervals import IntervalSet

logger = logging.getLogger(__name__)


class CyclicInfeasibleError(InfeasibleError):
    """Raised when a block is stored on fewer than L+S available machines."""


def cyclic_index(a: int, N: int) -> int:
    """1-based wrap-around: maps any positive ``a`` into ``1..N``."""
    return a - ((a - 1) // N) * N


def cyclic_blocks(machine: int, Q: int, N: int) -> Tuple[int, ...]:
    """1-based blocks stored by 1-based ``machine``."""
    return tuple(cyclic_index(machine + offset, N) for offset in range(Q))


def block_storers(params: SystemParams, Q: int) -> Tuple[Tuple[int, ...], ...]:
    """0-based machines storing each 0-based block."""
    storers = [[] for _ in range(params.N)]
    for machine in range(1, params.N + 1):
        for block in cyclic_blocks(machine, Q, params.N):
            storers[block - 1].append(machine - 1)
    return tuple(tuple(sorted(machines)) for machines in storers)


def _check_q(params: SystemParams, Q: int) -> None:
    if not params.k <= Q <= params.N:
        raise StrategyError(f"Q = {Q} must lie between L+S = {params.k} and N = {params.N}")


def build_cyclic(params: SystemParams, Q: int, realization: SpeedRealization) -> Scheme:
    """
    Scheme for one realization under cyclic placement.

    Raises:
        StrategyError: If ``Q`` is outside ``[L+S, N]``.
        CyclicInfeasibleError: If some block has fewer than L+S available storers.
    """
    _check_q(params, Q)
    mu = []
    for g, storers in enumerate(block_storers(params, Q)):
        available = [n for n in storers if realization.s[n] > 0]
        if len(available) < params.k:
            raise CyclicInfeasibleError(
                f"block {g + 1} has {len(available)} available storers, need {params.k}"
            )
        speeds = tuple(realization.s[n] if n in storers else Fraction(0) for n in range(params.N))
        problem = LoadProblem(l=params.k, s=speeds, sigma=(Fraction(1),) * params.N)
        mu.append(solve_lp(problem).theta)
    return Scheme(gamma=(Fraction(1, params.N),) * params.N, mu=tuple(mu))


def cyclic_storage(params: SystemParams, Q: int) -> Tuple[IntervalSet, ...]:
    """Rows stored by each machine."""
    width = Fraction(1, params.N)
    return tuple(
        IntervalSet(tuple(((block - 1) * width, block * width) for block in cyclic_blocks(machine, Q, params.N)))
        for machine in range(1, params.N + 1)
    )


def cyclic_storage_size(params: SystemParams, Q: int) -> Fraction:
    return params.N * Fraction(Q, params.N)


class CyclicStrategy(PlacementStrategy):
    """Cyclic placement with ``Q`` blocks per machine (config key ``Q``, default N)."""

    def schedule(self, params: SystemParams, dist: SpeedDistribution) -> StrategyResult:
        ensure_valid(params, dist)
        Q = int(self.config.get("Q") or params.N)
        schemes = tuple(build_cyclic(params, Q, realization) for realization in dist.realizations)
        times = tuple(
            computation_time(scheme.load(params.N), realization.s)
            for scheme, realization in zip(schemes, dist.realizations)
        )
        logger.debug("cyclic Q=%d times %s", Q, times)
        return StrategyResult(
            schemes=schemes,
            storage=cyclic_storage(params, Q),
            times=times,
            expected_time=expected_time(dist, times),
        )

    @classmethod
    def get_strategy_name(cls) -> str:
        return "cyclic"

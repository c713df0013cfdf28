"""
Exact min-max load allocation.

Solves the capped load problem: spread a total load ``l`` over the available machines
so that the largest load-to-speed ratio is as small as possible, with machine ``n``
taking at most ``sigma[n]``. The optimum is a water level ``c`` with
``theta[n] = min(c * s[n], sigma[n])``.
"""

import logging
from typing import Tuple
from typing import Sequence
from fractions import Fraction

from pydantic import model_validator

from .model import Rational
from .model import UsctecError
from .model import DomainModel
from .model import LoadVector
from .model import RationalVector
from .model import InfeasibleError
from .model import SpeedRealization
from .model import SpeedDistribution
from .model import format_rational

logger = logging.getLogger(__name__)


class InfeasibleLoadError(InfeasibleError):
    """Raised when the load exceeds the combined caps of the available machines."""


class NoAvailableMachinesError(InfeasibleError):
    """Raised when every machine has zero speed."""


class LoadInconsistencyError(UsctecError):
    """Raised when load is assigned to a machine with zero speed."""


class LoadProblem(DomainModel):
    """
    A capped min-max load problem.

    Attributes:
        l: Total load to distribute.
        s: Machine speeds.
        sigma: Per-machine load caps in [0, 1].
    """

    l: Rational  # noqa: E741
    s: SpeedRealization
    sigma: RationalVector

    @model_validator(mode="after")
    def _check_shape(self) -> "LoadProblem":
        if len(self.sigma) != len(self.s.s):
            raise ValueError(f"sigma has {len(self.sigma)} entries for {len(self.s.s)} machines")
        if self.l < 0:
            raise ValueError("load must be non-negative")
        if any(not 0 <= cap <= 1 for cap in self.sigma):
            raise ValueError("caps must lie in [0, 1]")
        return self


class LoadSolution(DomainModel):
    """
    Optimal allocation for a :class:`LoadProblem`.

    Attributes:
        theta: Load per machine.
        c: Optimal objective, the largest load-to-speed ratio.
        clamped: Machines held at their cap.
    """

    theta: RationalVector
    c: Rational
    clamped: Tuple[int, ...] = ()


def computation_time(theta: Sequence[Fraction], speeds: Sequence[Fraction]) -> Fraction:
    """
    Largest load-to-speed ratio over the available machines.

    Raises:
        LoadInconsistencyError: If a machine with zero speed carries load.
    """
    ratios = [Fraction(0)]
    for n, (load, speed) in enumerate(zip(theta, speeds)):
        if speed == 0:
            if load != 0:
                raise LoadInconsistencyError(f"machine {n + 1} has load {format_rational(load)} but zero speed")
            continue
        ratios.append(Fraction(load) / speed)
    return max(ratios)


def expected_time(dist: SpeedDistribution, times: Sequence[Fraction]) -> Fraction:
    """Probability-weighted sum of per-realization computation times."""
    if len(times) != len(dist.probabilities):
        raise ValueError(f"expected {len(dist.probabilities)} times, got {len(times)}")
    return sum((probability * time for probability, time in zip(dist.probabilities, times)), Fraction(0))


def _water_fill(load: Fraction, speeds: Sequence[Fraction], caps: Sequence[Fraction], active: list):
    theta = [Fraction(0)] * len(speeds)
    clamped = []
    remaining = load
    # Each round either settles the level or clamps at least one machine.
    while active:
        level = remaining / sum(speeds[n] for n in active)
        over = [n for n in active if level * speeds[n] > caps[n]]
        if not over:
            for n in active:
                theta[n] = level * speeds[n]
            break
        for n in over:
            theta[n] = caps[n]
            remaining -= caps[n]
        clamped.extend(over)
        active = [n for n in active if n not in over]
    return tuple(theta), tuple(sorted(clamped))


def solve_lp(problem: LoadProblem) -> LoadSolution:
    """
    Solve a capped min-max load problem exactly by iterative water-filling.

    Args:
        problem: The load problem.

    Returns:
        LoadSolution: The unique optimizer and its objective.

    Raises:
        NoAvailableMachinesError: If no machine has positive speed.
        InfeasibleLoadError: If ``l`` exceeds the caps summed over available machines.

    Examples:
        >>> problem = LoadProblem(l=3, s=[3, 3, 4, 4, 5, 5], sigma=[1] * 6)
        >>> solve_lp(problem).c
        Fraction(1, 8)
    """
    speeds, caps = problem.s.s, problem.sigma
    available = list(problem.s.available)
    if not available:
        raise NoAvailableMachinesError("no machine has positive speed")

    capacity = sum((caps[n] for n in available), Fraction(0))
    if problem.l > capacity:
        raise InfeasibleLoadError(
            f"load {format_rational(problem.l)} exceeds the available capacity {format_rational(capacity)}"
        )

    theta, clamped = _water_fill(problem.l, speeds, caps, available)
    c = computation_time(theta, speeds)
    logger.debug("water level %s with clamped machines %s", c, clamped)
    return LoadSolution(theta=theta, c=c, clamped=clamped)

"""
Division of a load vector into replicated row blocks, and per-block column assignments.

:func:`divide` turns a load vector ``theta`` of mass ``rho`` into block fractions and
binary selection rows with exactly ``k`` machines each, such that ``gamma · mu`` gives
back ``theta``. :func:`build_assignment` applies the same division to one row of a
load-division matrix to split its columns into decoding groups.
"""

import logging
from typing import List
from typing import Tuple
from typing import Sequence
from fractions import Fraction

from pydantic import model_validator

from .model import Scheme
from .model import Rational
from .model import UsctecError
from .model import DomainModel
from .model import RationalVector
from .model import InfeasibleError
from .model import format_rational

logger = logging.getLogger(__name__)


class InfeasibleDivisionError(InfeasibleError):
    """Raised when some machine's load exceeds the per-block share."""


class NonTerminationError(UsctecError):
    """Raised when the division loop exceeds its iteration guard."""


class ColumnRealizationError(UsctecError):
    """Raised when column masses cannot be mapped onto integer column ranges."""


class DivisionProblem(DomainModel):
    """
    A load vector to divide into blocks replicated on ``k`` machines.

    Attributes:
        theta: Load per machine.
        rho: Total block mass; must equal ``sum(theta) / k``.
        k: Replication degree.
    """

    theta: RationalVector
    rho: Rational
    k: int

    @model_validator(mode="after")
    def _check_mass(self) -> "DivisionProblem":
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho = {format_rational(self.rho)} outside (0, 1]")
        if any(x < 0 for x in self.theta):
            raise ValueError("theta must be non-negative")
        total = sum(self.theta, Fraction(0))
        if total != self.k * self.rho:
            raise ValueError(f"sum(theta) = {format_rational(total)} != k * rho = {format_rational(self.k * self.rho)}")
        return self

    @classmethod
    def for_load(cls, theta: Sequence[Fraction], k: int) -> "DivisionProblem":
        return cls(theta=tuple(theta), rho=sum(theta, Fraction(0)) / k, k=k)


class DivisionResult(DomainModel):
    """Block fractions with binary selection rows; ``supports`` lists each row's machines."""

    gamma: RationalVector
    mu: Tuple[RationalVector, ...]
    supports: Tuple[Tuple[int, ...], ...]

    def as_scheme(self) -> Scheme:
        return Scheme(gamma=self.gamma, mu=self.mu)


class ColumnGroup(DomainModel):
    """A share of a block's columns and the machines that each compute it."""

    mass: Rational
    machines: Tuple[int, ...]


class ComputationAssignment(DomainModel):
    """Decoding groups for one row block; the group masses add up to 1."""

    groups: Tuple[ColumnGroup, ...]

    def machine_mass(self, machine: int) -> Fraction:
        return sum((group.mass for group in self.groups if machine in group.machines), Fraction(0))


def check_feasible(problem: DivisionProblem) -> bool:
    """True when no machine's load exceeds ``sum(theta) / k``."""
    share = sum(problem.theta, Fraction(0)) / problem.k
    return all(x <= share for x in problem.theta)


def _step(theta: List[Fraction], k: int) -> Tuple[Fraction, Tuple[int, ...]]:
    # ascending load, ties by machine index
    order = sorted((n for n, x in enumerate(theta) if x > 0), key=lambda n: (theta[n], n))
    count = len(order)
    if count < k:
        raise InfeasibleDivisionError(f"only {count} machines carry load, need {k}")
    support = (order[0],) + tuple(order[count - k + 1 :])
    if count >= k + 1:
        step = min(sum(theta) / k - theta[order[count - k]], theta[order[0]])
    else:
        step = theta[order[0]]
    return step, tuple(sorted(support))


def divide(problem: DivisionProblem) -> DivisionResult:
    """
    Divide a feasible load vector into blocks, each stored on exactly ``k`` machines.

    Each step selects the least-loaded machine together with the ``k - 1`` most
    loaded ones and removes the largest step that keeps the remainder feasible.

    Args:
        problem: A division problem with ``check_feasible(problem)`` true.

    Returns:
        DivisionResult: Fractions summing to ``rho`` and rows with ``k`` ones each.

    Raises:
        InfeasibleDivisionError: If the problem is infeasible.
        NonTerminationError: If the loop runs past ``4 * N`` steps.
    """
    if not check_feasible(problem):
        raise InfeasibleDivisionError("some machine's load exceeds sum(theta) / k")

    theta = list(problem.theta)
    machines = len(theta)
    gamma, supports = [], []
    while any(theta):
        if len(gamma) >= 4 * machines:
            raise NonTerminationError(f"division did not finish within {4 * machines} steps")
        step, support = _step(theta, problem.k)
        for n in support:
            theta[n] -= step
        gamma.append(step)
        supports.append(support)
        logger.debug("block %d: fraction %s on machines %s", len(gamma), step, support)

    mu = tuple(tuple(Fraction(int(n in support)) for n in range(machines)) for support in supports)
    return DivisionResult(gamma=tuple(gamma), mu=mu, supports=tuple(supports))


def build_assignment(mu_row: Sequence[Fraction], k: int) -> ComputationAssignment:
    """
    Split one block's columns into decoding groups of ``k`` machines.

    Binary rows give a single group covering every column. Fractional rows are
    divided with unit mass, so machine ``n`` ends up with column share ``mu_row[n]``.

    Raises:
        InfeasibleDivisionError: If the row is all zeros or does not sum to ``k``.
    """
    row = tuple(Fraction(x) for x in mu_row)
    total = sum(row, Fraction(0))
    if total != k:
        raise InfeasibleDivisionError(f"row sums to {format_rational(total)}, expected {k}")
    if all(x in (0, 1) for x in row):
        support = tuple(n for n, x in enumerate(row) if x == 1)
        return ComputationAssignment(groups=(ColumnGroup(mass=Fraction(1), machines=support),))

    result = divide(DivisionProblem(theta=row, rho=Fraction(1), k=k))
    groups = tuple(ColumnGroup(mass=mass, machines=support) for mass, support in zip(result.gamma, result.supports))
    return ComputationAssignment(groups=groups)


def apportion(masses: Sequence[Fraction], units: int) -> Tuple[int, ...]:
    """
    Largest-remainder split of ``units`` integers in proportion to ``masses``.

    Exact whenever every ``mass * units`` is an integer; ties in the remainders go to
    the earlier entry.
    """
    total = sum(masses, Fraction(0))
    targets = [mass / total * units for mass in masses]
    sizes = [int(target) for target in targets]
    leftover = units - sum(sizes)
    ranked = sorted(range(len(targets)), key=lambda i: (-(targets[i] - sizes[i]), i))
    for i in ranked[:leftover]:
        sizes[i] += 1
    return tuple(sizes)


def realize_columns(assignment: ComputationAssignment, r: int, L: int) -> Tuple[range, ...]:
    """
    Map group masses to contiguous column ranges of one input block.

    Args:
        assignment: Decoding groups of a row block.
        r: Total column count of the input matrix.
        L: Number of input blocks; each block has ``r // L`` columns.

    Returns:
        Tuple[range, ...]: 0-based half-open ranges partitioning ``range(r // L)``.

    Raises:
        ColumnRealizationError: If ``r`` is not a positive multiple of ``L``.
    """
    if L < 1 or r < 1 or r % L:
        raise ColumnRealizationError(f"r = {r} is not a positive multiple of L = {L}")
    sizes = apportion([group.mass for group in assignment.groups], r // L)
    ranges, cursor = [], 0
    for size in sizes:
        ranges.append(range(cursor, cursor + size))
        cursor += size
    return tuple(ranges)

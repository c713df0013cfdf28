"""
Storage placement under heterogeneous storage constraints.

For every speed realization the optimal load is computed and divided into replicated
row blocks. The rows each machine selects across realizations are united into its
storage. When some machine's storage would exceed its constraint, every schedule is
committed up to the first overflowing row location, the overflowing machines are
disabled, and the remaining rows are scheduled again among the machines left.
"""

import logging
from typing import Any
from typing import List
from typing import Tuple
from typing import Optional
from typing import Sequence
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor

from ..load import LoadProblem
from ..load import LoadSolution
from ..load import solve_lp
from ..load import expected_time
from ..load import computation_time
from ..model import Scheme
from ..model import Rational
from ..model import DomainModel
from ..model import SystemParams
from ..model import RationalVector
from ..model import InfeasibleError
from ..model import SpeedRealization
from ..model import SpeedDistribution
from ..model import ensure_valid
from ..model import format_rational
from .base import StrategyResult
from .base import IntervalSetField
from .base import PlacementStrategy
from ..division import DivisionResult
from ..division import DivisionProblem
from ..division import divide
from ..intervals import IntervalSet
from ..intervals import interval_union
from ..intervals import gamma_to_intervals

logger = logging.getLogger(__name__)


class PlacementInfeasibleError(InfeasibleError):
    """Raised when a realization runs out of machines after overflow handling."""

    def __init__(self, message: str, pass_number: int, realization: int):
        self.pass_number = pass_number
        self.realization = realization
        super().__init__(f"pass {pass_number}, realization {realization + 1}: {message}")


class Overflow(DomainModel):
    """First overflowing row location and the machines that are full there."""

    rho_hat: Rational
    machines: Tuple[int, ...]


class PlacementPass(DomainModel):
    """
    Record of one scheduling pass.

    Attributes:
        number: Pass number, starting at 1.
        origin: Committed mass when the pass started; pending blocks begin here.
        loads: Pending load vector per realization.
        divisions: Division of each pending load.
        overflow: Overflow found in this pass, if any.
    """

    number: int
    origin: Rational
    loads: Tuple[RationalVector, ...]
    divisions: Tuple[DivisionResult, ...]
    overflow: Optional[Overflow] = None


class PlacementResult(StrategyResult):
    """
    Placement with per-realization selections and the pass trace.

    Attributes:
        selections: ``selections[i][n]`` is the rows machine ``n`` computes on in realization ``i``.
        passes: One record per scheduling pass.
        disabled: Machines disabled by overflow handling.
    """

    selections: Tuple[Tuple[IntervalSetField, ...], ...]
    passes: Tuple[PlacementPass, ...]
    disabled: Tuple[int, ...] = ()


class GeometryRow(DomainModel):
    """A maximal stored interval of one machine, tagged by the realizations that select it."""

    machine: int
    start: Rational
    end: Rational
    tags: str


def storage_selections(scheme: Scheme, machines: int, origin: Any = 0) -> Tuple[IntervalSet, ...]:
    """Rows each machine selects under ``scheme`` with blocks laid out from ``origin``."""
    intervals = gamma_to_intervals(scheme.gamma, origin)
    selected: List[List[Tuple[Fraction, Fraction]]] = [[] for _ in range(machines)]
    for interval, support in zip(intervals, scheme.supports):
        for n in support:
            selected[n].append(interval)
    return tuple(IntervalSet(tuple(pieces)) for pieces in selected)


def detect_overflow(candidate: Sequence[IntervalSet], e: Sequence[Fraction]) -> Optional[Overflow]:
    """
    Find the first row location where some machine's storage exceeds its constraint.

    Storing exactly ``e[n]`` is allowed.

    Returns:
        Optional[Overflow]: The largest location up to which every machine fits, with
        the machines that are full there, or None when every machine fits.
    """
    points = {}
    for n, (interval_set, cap) in enumerate(zip(candidate, e)):
        point = interval_set.fill_point(cap)
        if point is not None:
            points[n] = point
    if not points:
        return None
    rho_hat = min(points.values())
    machines = tuple(sorted(n for n, point in points.items() if point == rho_hat))
    return Overflow(rho_hat=rho_hat, machines=machines)


def truncate(
    gamma: Sequence[Fraction], mu: Sequence[Sequence[Fraction]], rho_hat: Any
) -> Tuple[Tuple[Fraction, ...], Tuple[Tuple[Fraction, ...], ...]]:
    """
    Keep the blocks below ``rho_hat``, splitting the block that straddles it.

    Raises:
        ValueError: If ``rho_hat`` exceeds ``sum(gamma)``.

    Examples:
        >>> truncate([Fraction(3, 8), Fraction(1, 4)], [[1], [1]], Fraction(3, 5))[0]
        (Fraction(3, 8), Fraction(9, 40))
    """
    rho_hat = Fraction(rho_hat)
    if rho_hat > sum(gamma, Fraction(0)):
        raise ValueError(f"cannot truncate at {format_rational(rho_hat)}: the blocks only cover {format_rational(sum(gamma, Fraction(0)))}")
    kept_gamma, kept_mu = [], []
    cumulative = Fraction(0)
    for fraction, row in zip(gamma, mu):
        if cumulative >= rho_hat:
            break
        part = min(fraction, rho_hat - cumulative)
        kept_gamma.append(part)
        kept_mu.append(tuple(row))
        cumulative += part
    return tuple(kept_gamma), tuple(kept_mu)


def _truncate_scheme(scheme: Scheme, rho_hat: Fraction) -> Scheme:
    gamma, mu = truncate(scheme.gamma, scheme.mu, rho_hat)
    return Scheme(gamma=gamma, mu=mu)


def _pending_division(
    speeds: SpeedRealization, params: SystemParams, remaining: Fraction, pass_number: int, index: int
) -> Tuple[LoadSolution, DivisionResult]:
    if len(speeds.available) < params.k:
        raise PlacementInfeasibleError(
            f"only {len(speeds.available)} machines remain, need {params.k}", pass_number, index
        )
    problem = LoadProblem(l=params.k * remaining, s=speeds, sigma=(remaining,) * params.N)
    try:
        solution = solve_lp(problem)
        division = divide(DivisionProblem(theta=solution.theta, rho=remaining, k=params.k))
    except InfeasibleError as e:
        raise PlacementInfeasibleError(str(e), pass_number, index) from e
    return solution, division


def _map_realizations(function, items: Sequence, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(function, items))
    return [function(item) for item in items]


def _finalize(
    params: SystemParams,
    dist: SpeedDistribution,
    schemes: List[Scheme],
    selections: List[Tuple[IntervalSet, ...]],
    storage: List[IntervalSet],
    passes: List[PlacementPass],
    disabled: Sequence[int],
) -> PlacementResult:
    times = tuple(
        computation_time(scheme.load(params.N), realization.s)
        for scheme, realization in zip(schemes, dist.realizations)
    )
    return PlacementResult(
        schemes=tuple(schemes),
        storage=tuple(storage),
        times=times,
        expected_time=expected_time(dist, times),
        selections=tuple(selections),
        passes=tuple(passes),
        disabled=tuple(sorted(disabled)),
    )


def place(params: SystemParams, dist: SpeedDistribution, threads: int = 1) -> PlacementResult:
    """
    Build a storage placement and per-realization schemes within the storage constraints.

    Args:
        params: Cluster parameters; ``e`` bounds each machine's storage.
        dist: Speed distribution.
        threads: Worker threads for the per-realization load and division steps.

    Returns:
        PlacementResult: Final schemes, storage, selections and the pass trace.

    Raises:
        ModelValidationError: If the model is invalid.
        PlacementInfeasibleError: If a realization is left with fewer than L+S machines.
    """
    ensure_valid(params, dist)
    working = list(dist.realizations)
    committed = [Scheme() for _ in working]
    rho_hat = Fraction(0)
    disabled: List[int] = []
    passes: List[PlacementPass] = []

    for number in range(1, params.N + 2):
        remaining = 1 - rho_hat
        pending = _map_realizations(
            lambda item: _pending_division(item[1], params, remaining, number, item[0]),
            list(enumerate(working)),
            threads,
        )
        schemes = [prefix.extend(division.as_scheme()) for prefix, (_, division) in zip(committed, pending)]
        selections = [storage_selections(scheme, params.N) for scheme in schemes]
        storage = [interval_union(*(chosen[n] for chosen in selections)) for n in range(params.N)]
        overflow = detect_overflow(storage, params.e)
        passes.append(
            PlacementPass(
                number=number,
                origin=rho_hat,
                loads=tuple(solution.theta for solution, _ in pending),
                divisions=tuple(division for _, division in pending),
                overflow=overflow,
            )
        )
        if overflow is None:
            logger.info("placement settled after %d pass(es)", number)
            return _finalize(params, dist, schemes, selections, storage, passes, disabled)

        logger.info(
            "pass %d: storage overflow at %s on machines %s",
            number,
            format_rational(overflow.rho_hat),
            [n + 1 for n in overflow.machines],
        )
        rho_hat = overflow.rho_hat
        committed = [_truncate_scheme(scheme, rho_hat) for scheme in schemes]
        disabled.extend(overflow.machines)
        working = [realization.without(overflow.machines) for realization in working]

    raise PlacementInfeasibleError("overflow handling did not settle", len(passes), 0)


def storage_size(result: StrategyResult) -> Fraction:
    """Total storage over all machines, as a multiple of the data matrix size."""
    return result.storage_size


def _tag(covering: Sequence[int], realizations: int, labels: Sequence[str]) -> str:
    if realizations > 1 and len(covering) == realizations:
        return "common"
    return ";".join(labels[i] for i in covering)


def _machine_geometry(
    machine: int, selections: Sequence[Sequence[IntervalSet]], labels: Sequence[str]
) -> List[GeometryRow]:
    chosen = [per_machine[machine] for per_machine in selections]
    points = sorted({point for interval_set in chosen for interval in interval_set for point in interval})
    rows: List[GeometryRow] = []
    for start, end in zip(points, points[1:]):
        covering = [i for i, interval_set in enumerate(chosen) if interval_set.covers(start)]
        if not covering:
            continue
        tag = _tag(covering, len(chosen), labels)
        if rows and rows[-1].end == start and rows[-1].tags == tag:
            rows[-1] = rows[-1].model_copy(update={"end": end})
        else:
            rows.append(GeometryRow(machine=machine + 1, start=start, end=end, tags=tag))
    return rows


def export_geometry(result: PlacementResult, labels: Optional[Sequence[str]] = None) -> List[GeometryRow]:
    """
    Maximal stored intervals per machine, tagged by the realizations selecting them.

    Intervals selected by every realization are tagged ``common`` (only when there is
    more than one realization); otherwise the tag joins realization labels with ``;``.
    Machines are labelled from 1.
    """
    if labels is None:
        labels = [f"s{i + 1}" for i in range(len(result.selections))]
    machines = len(result.storage)
    rows: List[GeometryRow] = []
    for n in range(machines):
        rows.extend(_machine_geometry(n, result.selections, labels))
    return rows


class HeuristicStrategy(PlacementStrategy):
    """Overflow-aware placement under the configured storage constraints."""

    def schedule(self, params: SystemParams, dist: SpeedDistribution) -> PlacementResult:
        return place(params, dist, threads=int(self.config.get("threads", 1)))

    @classmethod
    def get_strategy_name(cls) -> str:
        return "usctec"


def relaxed_optimum(params: SystemParams, dist: SpeedDistribution) -> Fraction:
    """Expected time when storage is unconstrained: the mean of the per-realization optima."""
    times = [
        solve_lp(LoadProblem(l=params.k, s=realization, sigma=(Fraction(1),) * params.N)).c
        for realization in dist.realizations
    ]
    return expected_time(dist, times)


def implied_constraints(result: StrategyResult) -> Tuple[Fraction, ...]:
    """Storage actually used by each machine."""
    return tuple(interval_set.measure for interval_set in result.storage)

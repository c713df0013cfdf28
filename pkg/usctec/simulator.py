"""
End-to-end harness.

Evaluates placement strategies on a system (computation times, expected time,
storage size), runs coded rounds for every realization against a direct field
product, and sweeps the cyclic baseline against overflow-aware placement over a
ladder of storage constraints.
"""

import io
import csv
import logging
from typing import Any
from typing import Dict
from typing import List
from typing import Tuple
from typing import Union
from typing import Mapping
from typing import Optional
from typing import Sequence
from fractions import Fraction

import numpy as np
from pydantic import BaseModel

from .model import Rational
from .model import UsctecError
from .model import DomainModel
from .model import SystemParams
from .model import RationalVector
from .model import InfeasibleError
from .model import SpeedDistribution
from .model import format_rational
from .coding import FiniteField
from .coding import EvaluationPoints
from .coding import NotDecodableError
from .coding import RoundPlan
from .coding import run_round
from .coding import plan_round
from .coding import exact_scale
from .config import Settings
from .division import build_assignment
from .strategies import PlacementStrategy
from .strategies import get_strategy
from .strategies.placement import GeometryRow

logger = logging.getLogger(__name__)

# A count withheld in every group, or explicit machines keyed by (block, group).
StragglerChoice = Union[int, Mapping[Tuple[int, int], Sequence[int]]]


class ScalingOverflowError(UsctecError):
    """Raised when exact row or column scaling exceeds the configured bound."""


def render(value: Fraction, places: int = 5) -> str:
    """
    Decimal text of ``value`` truncated (not rounded) to ``places`` digits.

    Examples:
        >>> render(Fraction(189, 3965))
        '0.04766'
    """
    sign = "-" if value < 0 else ""
    digits = str(int(abs(value) * 10**places)).rjust(places + 1, "0")
    if not places:
        return sign + digits
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def example1() -> Tuple[SystemParams, SpeedDistribution]:
    """Six machines, one realization, no storage constraint."""
    return SystemParams.relaxed(6, 2, 1), SpeedDistribution.uniform([3, 3, 4, 4, 5, 5])


def example2() -> Tuple[SystemParams, SpeedDistribution]:
    """Six machines, two equally likely realizations, heterogeneous storage."""
    params = SystemParams(N=6, L=2, S=1, e=("3/5", "3/5", "4/5", "4/5", 1, 1))
    return params, SpeedDistribution.uniform([3, 3, 4, 4, 5, 5], [3, 1, 2, 2, 3, 5])


TABLE1_SPEEDS = (
    (1, 1, 2, 2, 2, 3, 8, 8, 8, 8, 9, 9),
    (8, 8, 2, 3, 9, 9, 2, 1, 8, 5, 2, 8),
)


def table1(Q: int = 12) -> Tuple[SystemParams, SpeedDistribution]:
    """Twelve machines, two realizations, every machine storing ``Q/12`` of the rows."""
    params = SystemParams(N=12, L=2, S=1, e=(Fraction(Q, 12),) * 12)
    return params, SpeedDistribution.uniform(*TABLE1_SPEEDS)


SCENARIOS = {"example1": example1, "example2": example2, "table1": table1}


class SystemReport(DomainModel):
    """Times and storage of one strategy on one system."""

    strategy: str
    times: RationalVector
    expected_time: Rational
    expected_time_decimal: str
    storage_size: Rational
    storage_size_decimal: str


def _resolve(strategy: Union[str, PlacementStrategy], Q: Optional[int], threads: int) -> PlacementStrategy:
    if isinstance(strategy, PlacementStrategy):
        return strategy
    return get_strategy({"strategy": strategy, "Q": Q, "threads": threads})


def evaluate_system(
    params: SystemParams,
    dist: SpeedDistribution,
    strategy: Union[str, PlacementStrategy] = "usctec",
    Q: Optional[int] = None,
    places: int = 5,
    threads: int = 1,
) -> SystemReport:
    """
    Schedule a system with a strategy and report its times and storage.

    Raises:
        InfeasibleError: Propagated from the strategy.
    """
    resolved = _resolve(strategy, Q, threads)
    result = resolved.schedule(params, dist)
    return SystemReport(
        strategy=resolved.get_strategy_name(),
        times=result.times,
        expected_time=result.expected_time,
        expected_time_decimal=render(result.expected_time, places),
        storage_size=result.storage_size,
        storage_size_decimal=render(result.storage_size, places),
    )


class RoundCheck(BaseModel):
    """Outcome of the coded round of one realization."""

    realization: int
    q: int
    r: int
    passed: bool
    skipped: bool = False
    message: str = ""
    block: Optional[int] = None
    group: Optional[int] = None


class VerificationReport(BaseModel):
    """Coded-round verification over every realization."""

    seed: int
    stragglers: Optional[int]
    withheld: Optional[str] = None
    passed: bool
    rounds: List[RoundCheck]


def round_dimensions(scheme, params: SystemParams, bound: int) -> Tuple[int, int]:
    """
    Smallest ``q`` and ``r`` at which the scheme's rows and columns realize exactly.

    Raises:
        ScalingOverflowError: If either exceeds ``bound``.
    """
    q = exact_scale(scheme.gamma)
    masses = [group.mass for row in scheme.mu for group in build_assignment(row, params.k).groups]
    r = params.L * exact_scale(masses)
    if q > bound or r > bound:
        raise ScalingOverflowError(f"exact scaling needs q={q}, r={r}, above the bound {bound}")
    return q, r


def sample_stragglers(plan: RoundPlan, count: int, rng: np.random.Generator) -> Dict[Tuple[int, int], Tuple[int, ...]]:
    """Withhold ``count`` randomly chosen results in every decoding group."""
    stragglers = {}
    for g, block in enumerate(plan.blocks):
        for f, group in enumerate(block.groups):
            size = min(count, len(group.machines))
            picks = rng.choice(len(group.machines), size=size, replace=False) if size else []
            stragglers[(g, f)] = tuple(sorted(group.machines[int(i)] for i in picks))
    return stragglers


def parse_stragglers(text: str) -> StragglerChoice:
    """
    Read a straggler choice: a count per group, or the withheld machines of named groups.

    The explicit form is ``block:group=machines`` entries joined by ``;``, with every
    index counted from 1.

    Examples:
        >>> parse_stragglers("2")
        2
        >>> parse_stragglers("1:1=2;3:1=4,5")
        {(0, 0): (1,), (2, 0): (3, 4)}
    """
    text = text.strip()
    if "=" not in text:
        try:
            count = int(text)
        except ValueError:
            raise ValueError(f"expected a count or block:group=machines entries, got {text!r}")
        if count < 0:
            raise ValueError(f"straggler count must be non-negative, got {count}")
        return count
    withheld: Dict[Tuple[int, int], Tuple[int, ...]] = {}
    for entry in filter(None, (item.strip() for item in text.split(";"))):
        key, _, machines = entry.partition("=")
        try:
            g, f = (int(part) for part in key.split(":"))
            labels = [int(item) for item in machines.split(",") if item.strip()]
        except ValueError:
            raise ValueError(f"expected block:group=machines, got {entry!r}")
        if min([g, f, *labels]) < 1:
            raise ValueError(f"blocks, groups and machines are numbered from 1, got {entry!r}")
        withheld[(g - 1, f - 1)] = tuple(sorted({n - 1 for n in labels}))
    return withheld


def format_stragglers(withheld: Mapping[Tuple[int, int], Sequence[int]]) -> str:
    """Inverse of the explicit form of :func:`parse_stragglers`."""
    return ";".join(
        f"{g + 1}:{f + 1}=" + ",".join(str(n + 1) for n in machines) for (g, f), machines in sorted(withheld.items())
    )


def _verify_scheme(
    index: int, scheme, params: SystemParams, settings: Settings, stragglers: StragglerChoice, rng, matrices
) -> RoundCheck:
    field = FiniteField(settings.prime)
    points = EvaluationPoints.default(params.N, params.L, settings.prime)
    if matrices is not None:
        A, B = (field.matrix(matrix) for matrix in matrices)
        q, r = A.shape[0], B.shape[1]
    else:
        try:
            q, r = round_dimensions(scheme, params, settings.lcm_bound)
        except ScalingOverflowError as e:
            logger.warning("realization %d skipped: %s", index + 1, e)
            return RoundCheck(realization=index + 1, q=0, r=0, passed=True, skipped=True, message=str(e))
        A = field.random_matrix(rng, q, settings.v)
        B = field.random_matrix(rng, settings.v, r)
    plan = plan_round(scheme, params.k, params.L, q, r)
    if isinstance(stragglers, int):
        withheld = sample_stragglers(plan, stragglers, rng)
    else:
        withheld = dict(stragglers)
    try:
        round_ = run_round(A, B, plan, points, field, withheld, threads=settings.threads)
    except NotDecodableError as e:
        return RoundCheck(realization=index + 1, q=q, r=r, passed=False, message=str(e), block=e.block, group=e.group)
    passed = bool(np.array_equal(round_.product, field.matmul(A, B)))
    message = "" if passed else "decoded product differs from the direct product"
    return RoundCheck(realization=index + 1, q=q, r=r, passed=passed, message=message)


def verify_round(
    params: SystemParams,
    dist: SpeedDistribution,
    strategy: Union[str, PlacementStrategy] = "usctec",
    seed: int = 0,
    settings: Optional[Settings] = None,
    stragglers: Optional[StragglerChoice] = None,
    Q: Optional[int] = None,
    matrices: Optional[Tuple[Any, Any]] = None,
) -> VerificationReport:
    """
    Run one coded round per realization and compare it with the direct product.

    Args:
        params: Cluster parameters.
        dist: Speed distribution.
        strategy: Strategy name or instance producing the schemes.
        seed: Seed for matrices and straggler choice.
        settings: Tool settings (prime, scaling bound, v, threads).
        stragglers: Results withheld per group (defaults to S), or the withheld
            machines keyed by ``(block, group)``, applied to every realization.
        Q: Blocks per machine for the cyclic strategy.
        matrices: Optional fixed (A, B); otherwise sampled at exact scale.

    Returns:
        VerificationReport: One check per realization.
    """
    settings = settings or Settings()
    choice = params.S if stragglers is None else stragglers
    result = _resolve(strategy, Q, settings.threads).schedule(params, dist)
    rng = np.random.default_rng(seed)
    rounds = [
        _verify_scheme(index, scheme, params, settings, choice, rng, matrices)
        for index, scheme in enumerate(result.schemes)
    ]
    explicit = not isinstance(choice, int)
    return VerificationReport(
        seed=seed,
        stragglers=None if explicit else choice,
        withheld=format_stragglers(choice) if explicit else None,
        passed=all(check.passed for check in rounds),
        rounds=rounds,
    )


class CompareRow(DomainModel):
    """One strategy at one storage level."""

    q_over_n: str
    strategy: str
    feasible: bool
    storage_size: Optional[Rational] = None
    expected_time: Optional[Rational] = None
    expected_time_5dp: str = ""


def _compare_row(params: SystemParams, dist: SpeedDistribution, Q: int, strategy: str, threads: int) -> CompareRow:
    label = f"{Q}/{params.N}"
    try:
        report = evaluate_system(params, dist, strategy, Q=Q, threads=threads)
    except InfeasibleError as e:
        logger.info("%s at Q=%d is infeasible: %s", strategy, Q, e)
        return CompareRow(q_over_n=label, strategy=strategy, feasible=False)
    return CompareRow(
        q_over_n=label,
        strategy=strategy,
        feasible=True,
        storage_size=report.storage_size,
        expected_time=report.expected_time,
        expected_time_5dp=report.expected_time_decimal,
    )


def compare_table(
    params: SystemParams, dist: SpeedDistribution, qs: Sequence[int], threads: int = 1
) -> List[CompareRow]:
    """
    Cyclic placement with ``Q`` blocks per machine against overflow-aware placement
    with every storage constraint set to ``Q/N``.
    """
    rows = []
    for Q in qs:
        constrained = params.with_storage((Fraction(Q, params.N),) * params.N)
        rows.append(_compare_row(constrained, dist, Q, "cyclic", threads))
        rows.append(_compare_row(constrained, dist, Q, "usctec", threads))
    return rows


def _cell(value: Optional[Fraction]) -> str:
    return "infeasible" if value is None else format_rational(value)


def compare_csv(rows: Sequence[CompareRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["Q_over_N", "strategy", "storage_size", "expected_time_exact", "expected_time_5dp"])
    for row in rows:
        writer.writerow(
            [row.q_over_n, row.strategy, _cell(row.storage_size), _cell(row.expected_time), row.expected_time_5dp]
        )
    return buffer.getvalue()


def geometry_csv(rows: Sequence[GeometryRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["machine", "start", "end", "tags"])
    for row in rows:
        writer.writerow([row.machine, format_rational(row.start), format_rational(row.end), row.tags])
    return buffer.getvalue()


def load_matrix_csv(path) -> np.ndarray:
    """Integer matrix from a comma-separated file."""
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.int64)).astype(object)

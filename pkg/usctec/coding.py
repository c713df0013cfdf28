"""
Lagrange-coded matrix multiplication over a prime field.

The master splits the input matrix ``B`` into ``L`` column blocks and sends machine
``n`` the evaluation of the Lagrange polynomial through those blocks at ``alpha[n]``,
restricted to the columns it is assigned. Each machine multiplies its stored rows of
``A`` by what it received. For every decoding group any ``L`` of its ``L + S`` results
determine the polynomial, which the master evaluates at each ``beta[l]`` to recover
``A_g B_l`` on the group's columns.

Field matrices are numpy object arrays of Python ints reduced modulo the prime.
"""

import math
import logging
from typing import Any
from typing import Dict
from typing import List
from typing import Tuple
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Collection
from fractions import Fraction
from dataclasses import field as dataclass_field
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sympy import isprime
from pydantic import model_validator

from .model import Scheme
from .model import UsctecError
from .model import DomainModel
from .division import apportion
from .division import build_assignment
from .division import realize_columns

logger = logging.getLogger(__name__)

DEFAULT_PRIME = 2**31 - 1


class FieldError(UsctecError):
    """Raised for a non-prime modulus, unusable evaluation points or a zero inverse."""


class ColumnMismatchError(UsctecError):
    """Raised when a machine is asked for columns it was never sent."""


class NotDecodableError(UsctecError):
    """Raised when a decoding group has fewer than L results."""

    def __init__(self, message: str, block: Optional[int] = None, group: Optional[int] = None):
        self.block = block
        self.group = group
        super().__init__(message)


class FiniteField:
    """
    Arithmetic modulo a prime.

    Examples:
        >>> field = FiniteField(7)
        >>> field.inverse(3)
        5
    """

    def __init__(self, prime: int = DEFAULT_PRIME):
        if not isprime(prime):
            raise FieldError(f"{prime} is not prime")
        self.prime = int(prime)

    def inverse(self, value: int) -> int:
        value = int(value) % self.prime
        if value == 0:
            raise FieldError("zero has no inverse")
        return pow(value, -1, self.prime)

    def matrix(self, values: Any) -> np.ndarray:
        """Object array of Python ints reduced into ``[0, prime)``."""
        array = np.asarray(values)
        if array.dtype != object:
            array = array.astype(object)
        return np.vectorize(lambda x: int(x) % self.prime, otypes=[object])(array)

    def matmul(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        if left.shape[1] == 0 or left.shape[0] == 0 or right.shape[1] == 0:
            return np.zeros((left.shape[0], right.shape[1]), dtype=object)
        return (left.dot(right)) % self.prime

    def random_matrix(self, rng: np.random.Generator, rows: int, columns: int) -> np.ndarray:
        return rng.integers(0, self.prime, size=(rows, columns), dtype=np.int64).astype(object)

    def lagrange_weight(self, z: int, nodes: Sequence[int], j: int) -> int:
        """Value at ``z`` of the Lagrange basis polynomial that is 1 at ``nodes[j]``."""
        numerator, denominator = 1, 1
        for i, node in enumerate(nodes):
            if i == j:
                continue
            numerator = numerator * (z - node) % self.prime
            denominator = denominator * (nodes[j] - node) % self.prime
        return numerator * self.inverse(denominator) % self.prime


class EvaluationPoints(DomainModel):
    """
    Interpolation points: ``betas`` for the input blocks, ``alphas`` per machine.

    All points are distinct field elements and the two sets are disjoint.
    """

    prime: int
    betas: Tuple[int, ...]
    alphas: Tuple[int, ...]

    @model_validator(mode="after")
    def _check_points(self) -> "EvaluationPoints":
        points = self.betas + self.alphas
        if self.prime <= len(points):
            raise FieldError(f"prime {self.prime} must exceed N + L = {len(points)}")
        if any(not 0 <= point < self.prime for point in points):
            raise FieldError("evaluation points must be field elements")
        if len(set(points)) != len(points):
            raise FieldError("evaluation points must be distinct and the alpha and beta sets disjoint")
        return self

    @classmethod
    def default(cls, N: int, L: int, prime: int = DEFAULT_PRIME) -> "EvaluationPoints":
        """``beta_l = l`` for ``l`` in 1..L and ``alpha_n = L + n`` for ``n`` in 1..N."""
        return cls(prime=prime, betas=tuple(range(1, L + 1)), alphas=tuple(L + n for n in range(1, N + 1)))


class GroupPlan(DomainModel):
    """Columns (0-based within an input block) computed by a decoding group."""

    columns: Tuple[int, ...]
    machines: Tuple[int, ...]


class BlockPlan(DomainModel):
    """Row range ``[start, stop)`` of a block and its decoding groups."""

    start: int
    stop: int
    groups: Tuple[GroupPlan, ...]


class RoundPlan(DomainModel):
    """
    Integer realization of a scheme for one coded round.

    Attributes:
        L: Number of input blocks.
        width: Columns per input block (``r // L``).
        machines: Number of machines.
        blocks: Row range and decoding groups per row block.
    """

    L: int
    width: int
    machines: int
    blocks: Tuple[BlockPlan, ...]

    @property
    def rows(self) -> int:
        return self.blocks[-1].stop if self.blocks else 0

    def machine_columns(self, machine: int, block: int) -> Tuple[int, ...]:
        """Columns machine ``machine`` computes for block ``block``."""
        columns = set()
        for group in self.blocks[block].groups:
            if machine in group.machines:
                columns.update(group.columns)
        return tuple(sorted(columns))

    def payload_columns(self, machine: int) -> Tuple[int, ...]:
        """Columns machine ``machine`` is sent, over all blocks."""
        columns = set()
        for block in range(len(self.blocks)):
            columns.update(self.machine_columns(machine, block))
        return tuple(sorted(columns))

    def participants(self) -> Tuple[int, ...]:
        return tuple(n for n in range(self.machines) if self.payload_columns(n))


def plan_round(scheme: Scheme, k: int, L: int, q: int, r: int) -> RoundPlan:
    """
    Realize a scheme as integer row ranges and column groups.

    Row counts use largest-remainder rounding of ``gamma * q`` and are exact when every
    product is an integer; columns likewise via :func:`realize_columns`.
    """
    machines = len(scheme.mu[0]) if scheme.mu else 0
    row_counts = apportion(scheme.gamma, q)
    blocks, cursor = [], 0
    for count, row in zip(row_counts, scheme.mu):
        assignment = build_assignment(row, k)
        ranges = realize_columns(assignment, r, L)
        groups = tuple(
            GroupPlan(columns=tuple(columns), machines=group.machines)
            for columns, group in zip(ranges, assignment.groups)
        )
        blocks.append(BlockPlan(start=cursor, stop=cursor + count, groups=groups))
        cursor += count
    return RoundPlan(L=L, width=r // L, machines=machines, blocks=tuple(blocks))


@dataclass(frozen=True)
class EncodedPayload:
    """Coded input sent to one machine; ``matrix`` has one column per entry of ``columns``."""

    machine: int
    columns: Tuple[int, ...]
    matrix: np.ndarray


def encoding_polynomial(
    B: np.ndarray, columns: Sequence[int], points: EvaluationPoints, z: int, field: FiniteField
) -> np.ndarray:
    """Evaluate the polynomial through the input blocks (restricted to ``columns``) at ``z``."""
    L = len(points.betas)
    width = B.shape[1] // L
    result = np.zeros((B.shape[0], len(columns)), dtype=object)
    for l in range(L):  # noqa: E741
        block = B[:, [l * width + column for column in columns]]
        weight = field.lagrange_weight(z, points.betas, l)
        result = (result + weight * block) % field.prime
    return result


def encode(
    B: np.ndarray, plan: RoundPlan, points: EvaluationPoints, machine: int, field: FiniteField
) -> EncodedPayload:
    """
    Coded input for one machine.

    Raises:
        ColumnMismatchError: If the machine is assigned no columns.
    """
    columns = plan.payload_columns(machine)
    if not columns:
        raise ColumnMismatchError(f"machine {machine + 1} has no assigned columns")
    matrix = encoding_polynomial(B, columns, points, points.alphas[machine], field)
    return EncodedPayload(machine=machine, columns=columns, matrix=matrix)


def _positions(available: Sequence[int], wanted: Sequence[int]) -> List[int]:
    index = {column: position for position, column in enumerate(available)}
    missing = [column for column in wanted if column not in index]
    if missing:
        raise ColumnMismatchError(f"columns {missing[:5]} were not sent")
    return [index[column] for column in wanted]


def worker_compute(
    A_block: np.ndarray, payload: EncodedPayload, columns: Sequence[int], field: FiniteField
) -> np.ndarray:
    """
    A machine's result: its row block times the coded columns it is assigned.

    Raises:
        ColumnMismatchError: If ``columns`` is not a subset of the payload's columns.
    """
    positions = _positions(payload.columns, columns)
    return field.matmul(A_block, payload.matrix[:, positions])


def decode_block(
    results: Mapping[int, np.ndarray],
    points: EvaluationPoints,
    l: int,  # noqa: E741
    field: FiniteField,
    block: Optional[int] = None,
    group: Optional[int] = None,
) -> np.ndarray:
    """
    Interpolate the results of a decoding group at ``beta[l]``.

    Uses the ``L`` lowest-indexed machines among ``results``, whose values must be
    restricted to the group's columns.

    Raises:
        NotDecodableError: If fewer than ``L`` results are given.
    """
    L = len(points.betas)
    if len(results) < L:
        raise NotDecodableError(f"{len(results)} results, need {L}", block, group)
    chosen = sorted(results)[:L]
    nodes = [points.alphas[n] for n in chosen]
    beta = points.betas[l]
    decoded = None
    for j, machine in enumerate(chosen):
        term = field.lagrange_weight(beta, nodes, j) * results[machine]
        decoded = term if decoded is None else decoded + term
    return decoded % field.prime


@dataclass
class CodedRound:
    """Inputs, intermediate messages and output of one coded multiplication."""

    A: np.ndarray
    B: np.ndarray
    plan: RoundPlan
    points: EvaluationPoints
    stragglers: Dict[Tuple[int, int], Collection[int]] = dataclass_field(default_factory=dict)
    payloads: Dict[int, EncodedPayload] = dataclass_field(default_factory=dict)
    results: Dict[Tuple[int, int], np.ndarray] = dataclass_field(default_factory=dict)
    decoders: Dict[Tuple[int, int], Tuple[int, ...]] = dataclass_field(default_factory=dict)
    product: Optional[np.ndarray] = None


def _check_shapes(A: np.ndarray, B: np.ndarray, plan: RoundPlan) -> None:
    if A.shape[0] != plan.rows:
        raise ColumnMismatchError(f"A has {A.shape[0]} rows, the plan covers {plan.rows}")
    if B.shape[1] != plan.L * plan.width:
        raise ColumnMismatchError(f"B has {B.shape[1]} columns, the plan expects {plan.L * plan.width}")
    if A.shape[1] != B.shape[0]:
        raise ColumnMismatchError(f"A is {A.shape[0]}x{A.shape[1]} but B has {B.shape[0]} rows")


def _run_workers(round_: CodedRound, field: FiniteField, threads: int) -> None:
    tasks = [
        (g, n, round_.plan.machine_columns(n, g))
        for g in range(len(round_.plan.blocks))
        for n in range(round_.plan.machines)
    ]
    tasks = [task for task in tasks if task[2]]

    def compute(task):
        g, n, columns = task
        block = round_.plan.blocks[g]
        return worker_compute(round_.A[block.start : block.stop], round_.payloads[n], columns, field)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(compute, tasks))
    else:
        outputs = [compute(task) for task in tasks]
    for (g, n, _), output in zip(tasks, outputs):
        round_.results[(g, n)] = output


def _decode_group(round_: CodedRound, g: int, f: int, field: FiniteField) -> None:
    plan = round_.plan
    block, group = plan.blocks[g], plan.blocks[g].groups[f]
    if not group.columns or block.stop == block.start:
        return
    withheld = set(round_.stragglers.get((g, f), ()))
    live = [n for n in sorted(group.machines) if n not in withheld]
    if len(live) < plan.L:
        raise NotDecodableError(
            f"block {g + 1}, group {f + 1}: {len(live)} of {len(group.machines)} results arrived, need {plan.L}",
            g,
            f,
        )
    chosen = live[: plan.L]
    round_.decoders[(g, f)] = tuple(chosen)
    restricted = {
        n: round_.results[(g, n)][:, _positions(plan.machine_columns(n, g), group.columns)] for n in chosen
    }
    rows = np.arange(block.start, block.stop)
    for l in range(plan.L):  # noqa: E741
        decoded = decode_block(restricted, round_.points, l, field, g, f)
        columns = np.array([l * plan.width + column for column in group.columns])
        round_.product[np.ix_(rows, columns)] = decoded


def run_round(
    A: np.ndarray,
    B: np.ndarray,
    plan: RoundPlan,
    points: EvaluationPoints,
    field: FiniteField,
    stragglers: Optional[Mapping[Tuple[int, int], Collection[int]]] = None,
    threads: int = 1,
) -> CodedRound:
    """
    Execute one coded multiplication end to end.

    Args:
        A: Data matrix (q x v) over the field.
        B: Input matrix (v x r) over the field.
        plan: Row blocks and decoding groups.
        points: Interpolation points.
        field: The prime field.
        stragglers: Machines whose results are withheld, keyed by ``(block, group)``.
        threads: Worker threads for the per-machine products.

    Returns:
        CodedRound: The round with ``product`` equal to ``A @ B`` over the field.

    Raises:
        NotDecodableError: If some group has fewer than ``L`` results.
    """
    _check_shapes(A, B, plan)
    round_ = CodedRound(A=A, B=B, plan=plan, points=points, stragglers=dict(stragglers or {}))
    for n in plan.participants():
        round_.payloads[n] = encode(B, plan, points, n, field)
    _run_workers(round_, field, threads)

    round_.product = np.zeros((A.shape[0], B.shape[1]), dtype=object)
    for g, block in enumerate(plan.blocks):
        for f in range(len(block.groups)):
            _decode_group(round_, g, f, field)
    logger.debug("decoded %d groups", len(round_.decoders))
    return round_


def exact_scale(values: Sequence[Fraction]) -> int:
    """Least common multiple of the denominators of ``values``."""
    return math.lcm(1, *(value.denominator for value in values))

"""
Shared domain model for the load solver, the placement strategies and the simulator.

Every scheduler-side quantity is an exact :class:`fractions.Fraction`. Machines and
row blocks are indexed from zero inside the library; the command line labels machines
from one.
"""

from typing import Any
from typing import List
from typing import Tuple
from typing import Sequence
from fractions import Fraction
from typing import Annotated

from pydantic import Field
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import PlainSerializer
from pydantic import PlainValidator
from pydantic import model_validator


class UsctecError(Exception):
    """Base exception for scheduler and simulator errors."""


class InfeasibleError(UsctecError):
    """Base exception for instances that admit no schedule."""


class ModelValidationError(UsctecError):
    """Raised when a system description violates one or more model invariants."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def parse_rational(value: Any) -> Fraction:
    """
    Coerce a value into an exact fraction.

    Accepts fractions, integers, ``"p/q"`` strings and decimal strings. Floats are
    read through their shortest decimal text, so ``0.6`` becomes exactly ``3/5``.

    Raises:
        ValueError: If the value is not a finite rational number.

    Examples:
        >>> parse_rational("9/40")
        Fraction(9, 40)
        >>> parse_rational(0.6)
        Fraction(3, 5)
    """
    if isinstance(value, bool):
        raise ValueError("booleans are not rational numbers")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        value = repr(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"not a rational number: {value!r}") from e
    raise ValueError(f"not a rational number: {value!r}")


def format_rational(value: Fraction) -> str:
    """Render a fraction as ``"p/q"`` (integers keep a unit denominator)."""
    return f"{value.numerator}/{value.denominator}"


Rational = Annotated[Fraction, PlainValidator(parse_rational), PlainSerializer(format_rational, return_type=str)]
RationalVector = Tuple[Rational, ...]

# θ, γ and μ travel as plain tuples between the solvers.
LoadVector = Tuple[Fraction, ...]
PartitioningVector = Tuple[Fraction, ...]
LoadDivisionMatrix = Tuple[Tuple[Fraction, ...], ...]


class DomainModel(BaseModel):
    """Frozen pydantic base shared by every model that carries fractions."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


def available_machines(speeds: Sequence[Fraction]) -> Tuple[int, ...]:
    """Indices of machines with positive speed."""
    return tuple(n for n, speed in enumerate(speeds) if speed > 0)


class SystemParams(DomainModel):
    """
    Cluster parameters.

    Attributes:
        N: Number of machines.
        L: Recovery threshold, the number of results needed to decode a group.
        S: Number of stragglers tolerated per group.
        e: Per-machine storage constraint as a fraction of the data matrix.
    """

    N: int = Field(..., description="Machine count")
    L: int = Field(..., description="Recovery threshold")
    S: int = Field(0, description="Straggler tolerance")
    e: RationalVector = Field(..., description="Storage constraint per machine")

    @property
    def k(self) -> int:
        """Replication degree L + S."""
        return self.L + self.S

    @classmethod
    def relaxed(cls, N: int, L: int, S: int) -> "SystemParams":
        """Parameters with every storage constraint lifted to 1."""
        return cls(N=N, L=L, S=S, e=(Fraction(1),) * N)

    def with_storage(self, e: Sequence[Fraction]) -> "SystemParams":
        return self.model_copy(update={"e": tuple(Fraction(x) for x in e)})


class SpeedRealization(DomainModel):
    """Per-machine speeds for one round; a zero speed marks a preempted machine."""

    s: RationalVector

    @model_validator(mode="before")
    @classmethod
    def _accept_bare_vector(cls, data: Any) -> Any:
        if isinstance(data, (list, tuple)):
            return {"s": data}
        return data

    @property
    def available(self) -> Tuple[int, ...]:
        return available_machines(self.s)

    def without(self, machines: Sequence[int]) -> "SpeedRealization":
        """A copy with the given machines' speeds set to zero."""
        dropped = set(machines)
        return SpeedRealization(s=tuple(Fraction(0) if n in dropped else x for n, x in enumerate(self.s)))


class SpeedDistribution(DomainModel):
    """Finite speed distribution: realizations paired with their probabilities."""

    realizations: Tuple[SpeedRealization, ...]
    probabilities: RationalVector

    @classmethod
    def uniform(cls, *speeds: Sequence[Any]) -> "SpeedDistribution":
        """Equally likely realizations built from raw speed vectors."""
        count = len(speeds)
        return cls(
            realizations=tuple(SpeedRealization(s=tuple(speed)) for speed in speeds),
            probabilities=(Fraction(1, count),) * count,
        )


class Scheme(DomainModel):
    """
    A partitioning vector γ with its load-division matrix μ.

    Row ``g`` of ``mu`` lists the normalized column share each machine multiplies
    for row block ``g``; the block's selected machines are the support of that row.
    """

    gamma: RationalVector = ()
    mu: Tuple[RationalVector, ...] = ()

    @model_validator(mode="after")
    def _check_shape(self) -> "Scheme":
        if len(self.gamma) != len(self.mu):
            raise ValueError(f"gamma has {len(self.gamma)} blocks but mu has {len(self.mu)} rows")
        if len({len(row) for row in self.mu}) > 1:
            raise ValueError("mu rows must all have the same length")
        return self

    @property
    def blocks(self) -> int:
        return len(self.gamma)

    @property
    def mass(self) -> Fraction:
        return sum(self.gamma, Fraction(0))

    @property
    def supports(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(n for n, x in enumerate(row) if x > 0) for row in self.mu)

    def load(self, machines: int) -> LoadVector:
        """θ = γ·μ over ``machines`` machines."""
        theta = [Fraction(0)] * machines
        for fraction, row in zip(self.gamma, self.mu):
            for n, share in enumerate(row):
                theta[n] += fraction * share
        return tuple(theta)

    def extend(self, other: "Scheme") -> "Scheme":
        """Concatenate ``other``'s blocks after this scheme's blocks."""
        return Scheme(gamma=self.gamma + other.gamma, mu=self.mu + other.mu)

    def check(self, params: SystemParams, realization: SpeedRealization) -> List[str]:
        """Return every violated scheme invariant for the given realization."""
        errors = []
        for g, (fraction, row) in enumerate(zip(self.gamma, self.mu)):
            if not 0 < fraction <= 1:
                errors.append(f"block {g + 1}: gamma {format_rational(fraction)} outside (0, 1]")
            if sum(row, Fraction(0)) != params.k:
                errors.append(f"block {g + 1}: mu row sums to {format_rational(sum(row, Fraction(0)))} != {params.k}")
            if any(x < 0 or x > 1 for x in row):
                errors.append(f"block {g + 1}: mu entries must lie in [0, 1]")
            if any(x > 0 and realization.s[n] == 0 for n, x in enumerate(row)):
                errors.append(f"block {g + 1}: load assigned to an unavailable machine")
            if sum(1 for x in row if x > 0) < params.k:
                errors.append(f"block {g + 1}: fewer than {params.k} selected machines")
        return errors


class ModelValidationResult(BaseModel):
    """
    Outcome of :func:`validate`.

    Attributes:
        valid: Whether every invariant holds.
        errors: One message per violated invariant, naming its location.
    """

    valid: bool
    errors: List[str]


def _params_errors(params: SystemParams) -> List[str]:
    errors = []
    if params.N < 1:
        errors.append(f"N = {params.N} must be at least 1")
    if params.L < 1:
        errors.append(f"L = {params.L} must be at least 1")
    if params.S < 0:
        errors.append(f"S = {params.S} must be non-negative")
    if params.k > params.N:
        errors.append(f"L+S = {params.k} exceeds N = {params.N}")
    if len(params.e) != params.N:
        errors.append(f"e has {len(params.e)} entries, expected N = {params.N}")
    for n, cap in enumerate(params.e):
        if not 0 <= cap <= 1:
            errors.append(f"e[{n + 1}] = {format_rational(cap)} outside [0, 1]")
    return errors


def _distribution_errors(params: SystemParams, dist: SpeedDistribution) -> List[str]:
    errors = []
    if not dist.realizations:
        errors.append("speed distribution has no realizations")
    if len(dist.probabilities) != len(dist.realizations):
        errors.append(
            f"{len(dist.probabilities)} probabilities given for {len(dist.realizations)} realizations"
        )
    for index, probability in enumerate(dist.probabilities, start=1):
        if probability <= 0:
            errors.append(f"realization {index} has non-positive probability {format_rational(probability)}")
    total = sum(dist.probabilities, Fraction(0))
    if dist.probabilities and total != 1:
        errors.append(f"probabilities sum to {format_rational(total)} != 1")
    for index, realization in enumerate(dist.realizations, start=1):
        if len(realization.s) != params.N:
            errors.append(f"realization {index} has {len(realization.s)} speeds, expected N = {params.N}")
        if any(speed < 0 for speed in realization.s):
            errors.append(f"realization {index} has a negative speed")
        count = len(realization.available)
        if count < params.k:
            errors.append(f"realization {index} has only {count} available machines < L+S={params.k}")
    return errors


def validate(params: SystemParams, dist: SpeedDistribution) -> ModelValidationResult:
    """
    Check every model invariant and collect all violations.

    Args:
        params: Cluster parameters.
        dist: Speed distribution over the same machines.

    Returns:
        ModelValidationResult: ``valid`` is True only when no invariant is violated.

    Examples:
        >>> params = SystemParams.relaxed(6, 2, 1)
        >>> validate(params, SpeedDistribution.uniform([3, 3, 4, 4, 5, 5])).valid
        True
    """
    errors = _params_errors(params) + _distribution_errors(params, dist)
    return ModelValidationResult(valid=not errors, errors=errors)


def ensure_valid(params: SystemParams, dist: SpeedDistribution) -> None:
    """Raise :class:`ModelValidationError` unless ``validate`` passes."""
    result = validate(params, dist)
    if not result.valid:
        raise ModelValidationError(result.errors)

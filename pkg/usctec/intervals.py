"""
Half-open interval sets over row locations.

Rows of the data matrix are addressed by locations in ``[0, 1]``; a block of rows is
a half-open interval ``[a, b)``. Storage placements and storage selections are unions
of such intervals.
"""

from typing import Any
from typing import Tuple
from typing import Iterator
from typing import Optional
from typing import Sequence
from fractions import Fraction
from dataclasses import dataclass

Interval = Tuple[Fraction, Fraction]


class IntervalError(ValueError):
    """Raised for inverted intervals or intervals leaving [0, 1]."""


def _normalize(pairs: Sequence[Tuple[Any, Any]]) -> Tuple[Interval, ...]:
    cleaned = []
    for start, end in pairs:
        start, end = Fraction(start), Fraction(end)
        if end < start:
            raise IntervalError(f"inverted interval [{start}, {end})")
        if start < 0 or end > 1:
            raise IntervalError(f"interval [{start}, {end}) leaves [0, 1]")
        if start < end:
            cleaned.append((start, end))
    cleaned.sort()

    merged = []
    for start, end in cleaned:
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return tuple(merged)


@dataclass(frozen=True)
class IntervalSet:
    """
    Sorted, disjoint, maximal half-open intervals with rational endpoints.

    Construction normalizes its input: empty pieces are dropped and overlapping or
    touching pieces are merged, so equal sets always compare equal.

    Examples:
        >>> IntervalSet.of((0, Fraction(3, 8)), (Fraction(3, 16), Fraction(5, 8))).intervals
        ((Fraction(0, 1), Fraction(5, 8)),)
    """

    intervals: Tuple[Interval, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", _normalize(self.intervals))

    @classmethod
    def of(cls, *pairs: Tuple[Any, Any]) -> "IntervalSet":
        return cls(tuple(pairs))

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def __or__(self, other: "IntervalSet") -> "IntervalSet":
        return self.union(other)

    @property
    def measure(self) -> Fraction:
        return sum((end - start for start, end in self.intervals), Fraction(0))

    def measure_below(self, y: Any) -> Fraction:
        """Measure of this set intersected with ``[0, y)``."""
        y = Fraction(y)
        return sum((min(end, y) - start for start, end in self.intervals if start < y), Fraction(0))

    def union(self, *others: "IntervalSet") -> "IntervalSet":
        pairs = list(self.intervals)
        for other in others:
            pairs.extend(other.intervals)
        return IntervalSet(tuple(pairs))

    def clip(self, start: Any, end: Any) -> "IntervalSet":
        """Intersection with ``[start, end)``."""
        start, end = Fraction(start), Fraction(end)
        return IntervalSet(tuple((max(a, start), min(b, end)) for a, b in self.intervals if a < end and b > start))

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        pieces = []
        for start, end in other.intervals:
            pieces.extend(self.clip(start, end).intervals)
        return IntervalSet(tuple(pieces))

    def covers(self, y: Any) -> bool:
        y = Fraction(y)
        return any(start <= y < end for start, end in self.intervals)

    def issubset(self, other: "IntervalSet") -> bool:
        return self.intersection(other) == self

    def fill_point(self, capacity: Any) -> Optional[Fraction]:
        """
        Location where the cumulative measure first exceeds ``capacity``.

        Returns the largest ``y`` with ``measure_below(y) <= capacity`` when the set
        holds more than ``capacity``, else None.
        """
        capacity = Fraction(capacity)
        cumulative = Fraction(0)
        for start, end in self.intervals:
            if cumulative + (end - start) > capacity:
                return start + (capacity - cumulative)
            cumulative += end - start
        return None


def gamma_to_intervals(gamma: Sequence[Fraction], origin: Any = 0) -> Tuple[Interval, ...]:
    """
    Map consecutive block fractions to contiguous intervals starting at ``origin``.

    Raises:
        IntervalError: If the blocks would extend past 1.

    Examples:
        >>> gamma_to_intervals([Fraction(1, 2), Fraction(1, 4)])
        ((Fraction(0, 1), Fraction(1, 2)), (Fraction(1, 2), Fraction(3, 4)))
    """
    cursor = Fraction(origin)
    total = sum(gamma, Fraction(0))
    if cursor < 0 or cursor + total > 1:
        raise IntervalError(f"mass overflow: origin {cursor} + {total} exceeds 1")
    intervals = []
    for fraction in gamma:
        intervals.append((cursor, cursor + fraction))
        cursor += fraction
    return tuple(intervals)


def interval_union(*sets: IntervalSet) -> IntervalSet:
    return IntervalSet().union(*sets)


def measure(interval_set: IntervalSet) -> Fraction:
    return interval_set.measure


def measure_below(interval_set: IntervalSet, y: Any) -> Fraction:
    return interval_set.measure_below(y)

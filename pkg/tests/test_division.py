import random
import itertools
from functools import lru_cache
from fractions import Fraction

import pytest
from pydantic import ValidationError

from usctec.division import DivisionProblem
from usctec.division import ColumnRealizationError
from usctec.division import InfeasibleDivisionError
from usctec.division import divide
from usctec.division import apportion
from usctec.division import check_feasible
from usctec.division import realize_columns
from usctec.division import build_assignment

F = Fraction

EXAMPLE_LOAD = (F(3, 8), F(3, 8), F(1, 2), F(1, 2), F(5, 8), F(5, 8))


@lru_cache(maxsize=None)
def _decomposable(counts, k):
    """Whether integer counts split into k-subsets of distinct machines, by exhaustive search."""
    if not any(counts):
        return True
    positive = [n for n, count in enumerate(counts) if count > 0]
    for subset in itertools.combinations(positive, k):
        rest = list(counts)
        for n in subset:
            rest[n] -= 1
        if _decomposable(tuple(sorted(rest)), k):
            return True
    return False


def _random_feasible(rng):
    """A load built as a weighted sum of k-subsets, hence feasible."""
    machines = rng.randint(2, 7)
    k = rng.randint(1, machines)
    theta = [F(0)] * machines
    rho = F(0)
    for _ in range(rng.randint(1, 5)):
        weight = F(rng.randint(1, 12), 60)
        for n in rng.sample(range(machines), k):
            theta[n] += weight
        rho += weight
    return DivisionProblem(theta=tuple(theta), rho=rho, k=k)


class TestDivide:
    """Division of a load vector into replicated blocks."""

    def test_single_realization_example(self):
        """Test the six-machine load divides into the expected blocks."""
        result = divide(DivisionProblem.for_load(EXAMPLE_LOAD, 3))
        assert result.gamma == (F(3, 8), F(1, 4), F(1, 8), F(1, 8), F(1, 8))
        assert result.supports == ((0, 4, 5), (2, 3, 4), (1, 2, 5), (1, 2, 3), (1, 3, 5))

    def test_rows_are_binary(self):
        """Test every row selects exactly k machines with unit share."""
        result = divide(DivisionProblem.for_load(EXAMPLE_LOAD, 3))
        for row in result.mu:
            assert sorted(set(row)) == [0, 1]
            assert sum(row) == 3

    def test_as_scheme_reconstructs_load(self):
        """Test the scheme's load equals the divided load."""
        scheme = divide(DivisionProblem.for_load(EXAMPLE_LOAD, 3)).as_scheme()
        assert scheme.load(6) == EXAMPLE_LOAD

    def test_reconstruction_on_random_instances(self):
        """Test gamma · mu = theta, row sums and block count on seeded feasible loads."""
        rng = random.Random(7)
        for _ in range(1000):
            problem = _random_feasible(rng)
            result = divide(problem)
            machines = len(problem.theta)
            assert result.as_scheme().load(machines) == problem.theta
            assert sum(result.gamma) == problem.rho
            assert all(fraction > 0 for fraction in result.gamma)
            assert all(sum(row) == problem.k for row in result.mu)
            assert len(result.gamma) <= machines

    def test_infeasible_load(self):
        """Test a machine above the per-block share is rejected."""
        problem = DivisionProblem(theta=(1, F(1, 4), F(1, 4)), rho=F(3, 4), k=2)
        assert not check_feasible(problem)
        with pytest.raises(InfeasibleDivisionError):
            divide(problem)

    def test_mass_mismatch(self):
        """Test sum(theta) must equal k * rho."""
        with pytest.raises(ValidationError):
            DivisionProblem(theta=(F(1, 2), F(1, 2)), rho=1, k=2)

    def test_rho_range(self):
        """Test rho must lie in (0, 1]."""
        with pytest.raises(ValidationError):
            DivisionProblem(theta=(2, 2), rho=2, k=2)


class TestFeasibility:
    """Feasibility criterion against exhaustive decomposition."""

    @pytest.mark.parametrize("denominator", [4, 5, 6])
    @pytest.mark.parametrize("machines", [2, 3, 4, 5])
    def test_matches_exhaustive_search(self, machines, denominator):
        """Test check_feasible agrees with exhaustive search on small integer loads."""
        for counts in itertools.product(range(denominator + 1), repeat=machines):
            total = sum(counts)
            for k in range(1, machines + 1):
                if total == 0 or total % k or total // k > denominator:
                    continue
                blocks = total // k
                problem = DivisionProblem(
                    theta=tuple(F(count, denominator) for count in counts), rho=F(blocks, denominator), k=k
                )
                expected = _decomposable(tuple(sorted(counts)), k)
                assert check_feasible(problem) == expected, (counts, k)
                if expected:
                    assert divide(problem).as_scheme().load(machines) == problem.theta
                else:
                    with pytest.raises(InfeasibleDivisionError):
                        divide(problem)


class TestBuildAssignment:
    """Splitting one block's columns into decoding groups."""

    def test_fractional_row(self):
        """Test a fractional row splits into unit-share groups of k machines."""
        assignment = build_assignment((F(1, 2), F(1, 2), 1, F(1, 2), F(1, 2)), 3)
        assert [group.machines for group in assignment.groups] == [(0, 2, 4), (1, 2, 3)]
        assert [group.mass for group in assignment.groups] == [F(1, 2), F(1, 2)]
        assert assignment.machine_mass(2) == 1
        assert assignment.machine_mass(0) == F(1, 2)

    def test_binary_row(self):
        """Test a binary row is a single group covering every column."""
        assignment = build_assignment((1, 0, 1, 1), 3)
        assert len(assignment.groups) == 1
        assert assignment.groups[0].machines == (0, 2, 3)
        assert assignment.groups[0].mass == 1

    def test_row_sum_must_equal_k(self):
        """Test rows not summing to k are rejected."""
        with pytest.raises(InfeasibleDivisionError):
            build_assignment((F(1, 2), F(1, 2), 1), 3)


class TestColumns:
    """Integer column ranges for group masses."""

    def test_apportion_exact(self):
        """Test exact shares are kept."""
        assert apportion([F(1, 4), F(3, 4)], 8) == (2, 6)

    def test_apportion_ties_go_first(self):
        """Test equal remainders favour the earlier entry."""
        assert apportion([F(1, 2), F(1, 2)], 5) == (3, 2)

    def test_realize_columns(self):
        """Test ranges partition each input block's columns."""
        assignment = build_assignment((F(1, 2), F(1, 2), 1, F(1, 2), F(1, 2)), 3)
        assert realize_columns(assignment, 4, 2) == (range(0, 1), range(1, 2))
        assert realize_columns(assignment, 8, 2) == (range(0, 2), range(2, 4))

    def test_columns_must_split_evenly(self):
        """Test r must be a positive multiple of L."""
        assignment = build_assignment((1, 1, 1), 3)
        with pytest.raises(ColumnRealizationError):
            realize_columns(assignment, 5, 2)

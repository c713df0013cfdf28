from unittest.mock import patch

import pytest

from usctec.repro import FAIL
from usctec.repro import NOTE
from usctec.repro import PASS
from usctec.repro import Check
from usctec.repro import run_repro
from usctec.repro import sweep_checks
from usctec.repro import relaxed_checks
from usctec.repro import overflow_checks
from usctec.repro import coded_round_checks
from usctec.repro import single_realization_checks
from usctec.repro import _close


@pytest.fixture(scope="module")
def sweep():
    return {check.name: check for check in sweep_checks()}


def assert_all_pass(checks):
    failing = [(check.name, check.detail) for check in checks if check.status != PASS]
    assert failing == []


class TestSixMachineChecks:
    """Exact checks on the six-machine systems."""

    def test_single_realization(self):
        """Test water-filling and division values."""
        assert_all_pass(single_realization_checks())

    def test_overflow(self):
        """Test the overflow trace."""
        checks = overflow_checks()
        assert_all_pass(checks)
        assert "Example2.rho_hat = 3/5" in [check.name for check in checks]

    def test_relaxed(self):
        """Test lifting constraints reduces to water-filling."""
        assert_all_pass(relaxed_checks())

    def test_coded_rounds(self):
        """Test coded rounds decode and forced stragglers fail."""
        checks = coded_round_checks()
        assert_all_pass(checks)
        assert len(checks) == 4


class TestSweepChecks:
    """Twelve-machine storage sweep."""

    @pytest.mark.parametrize("Q", [9, 10, 11, 12])
    def test_cyclic_times(self, sweep, Q):
        """Test cyclic times match the reference."""
        assert sweep[f"Table1.cyclic[Q={Q}]"].status == PASS

    def test_cyclic_exact(self, sweep):
        """Test the full-storage cyclic time is exact."""
        assert sweep["Table1.cyclic[Q=12] exact"].status == PASS

    def test_plateau(self, sweep):
        """Test overflow-aware placement is unchanged from Q = 8 on."""
        assert sweep["Table1.plateau[Q>=8]"].status == PASS

    @pytest.mark.parametrize("Q", [8, 9, 10, 11, 12])
    def test_not_worse_than_cyclic(self, sweep, Q):
        """Test overflow-aware placement is never slower."""
        assert sweep[f"Table1.usctec_not_worse[Q={Q}]"].status == PASS

    def test_storage_within_budget(self, sweep):
        """Test total storage never exceeds Q."""
        for Q in range(6, 13):
            assert sweep[f"Table1.storage_within_budget[Q={Q}]"].status == PASS

    @pytest.mark.parametrize("Q", [7, 8, 9, 10, 11, 12])
    def test_storage_matches_reference(self, sweep, Q):
        """Test total storage matches the reference once every machine may store 7/12."""
        assert sweep[f"Table1.usctec[Q={Q}].storage"].status == PASS

    @pytest.mark.parametrize("Q", [7, 8, 9, 10, 11, 12])
    def test_time_matches_reference(self, sweep, Q):
        """Test expected time matches the reference once every machine may store 7/12."""
        assert sweep[f"Table1.usctec[Q={Q}].time"].status == PASS

    def test_first_level_is_informational(self, sweep):
        """Test the tightest storage level only notes a mismatch and reports its pass trace."""
        for name in ("Table1.usctec[Q=6].time", "Table1.usctec[Q=6].storage"):
            check = sweep[name]
            assert check.status in (PASS, NOTE)
            assert "passes, disabled machines" in check.detail

    def test_cyclic_faster_at_half_storage(self, sweep):
        """Test cyclic placement wins when every machine may store half the rows."""
        assert sweep["Table1.cyclic_faster[Q=6]"].status == PASS


class TestHelpers:
    """Tolerance helpers and the runner."""

    def test_close_gating(self):
        """Test a gating miss fails."""
        assert _close("x", 1, 2.0, 0.1).status == FAIL

    def test_close_non_gating(self):
        """Test a non-gating miss is a note."""
        assert _close("x", 1, 2.0, 0.1, gating=False).status == NOTE

    def test_close_within(self):
        """Test values inside the tolerance pass."""
        assert _close("x", 1, 1.05, 0.1).status == PASS

    def test_run_repro_collects_suites(self):
        """Test every suite and the coded rounds are collected in order."""
        first = [Check(name="a", status=PASS)]
        second = [Check(name="b", status=NOTE)]
        with patch("usctec.repro.CHECK_SUITES", [lambda: first]), patch(
            "usctec.repro.coded_round_checks", return_value=second
        ):
            assert run_repro() == first + second

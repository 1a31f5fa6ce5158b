"""The acceptance gate: every criterion runs at its pinned configuration
and tolerance, printing one pass/fail line.  Shared runs follow the
criteria's own phrasing (4/5 share the half-space run; 11/12 its ledger).

Run just this module with ``pytest tests/test_acceptance.py -s``.
"""

import pytest

from pflab import acceptance


@pytest.fixture(scope="session")
def ctx(tmp_path_factory):
    return acceptance.AcceptanceContext(
        str(tmp_path_factory.mktemp("acceptance")))


def _check(result):
    print(result.line, flush=True)
    assert result.passed, result.line


def test_criterion_01_front_exponent_1d(ctx):
    _check(acceptance.criterion_01(ctx))


def test_criterion_02_front_exponent_2d(ctx):
    _check(acceptance.criterion_02(ctx))


def test_criterion_03_solver_accuracy(ctx):
    _check(acceptance.criterion_03(ctx))


def test_criterion_04_l2_envelope(ctx):
    _check(acceptance.criterion_04(ctx))


def test_criterion_05_l1_audit_and_envelope(ctx):
    _check(acceptance.criterion_05(ctx))


def test_criterion_06_taylor_green_decay(ctx):
    _check(acceptance.criterion_06(ctx))


def test_criterion_07_weak_residual(ctx):
    _check(acceptance.criterion_07(ctx))


def test_criterion_08_exponent_identities(ctx):
    _check(acceptance.criterion_08(ctx))


def test_criterion_09_iteration_lemma_suite(ctx):
    _check(acceptance.criterion_09(ctx))


def test_criterion_10_interpolation_suite(ctx):
    _check(acceptance.criterion_10(ctx))


def test_criterion_11_local_energy(ctx):
    _check(acceptance.criterion_11(ctx))


def test_criterion_12_iteration_mechanism(ctx):
    _check(acceptance.criterion_12(ctx))

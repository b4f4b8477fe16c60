"""Acceptance criteria, one check per criterion with a PASS/FAIL line each."""

import pytest

from graphnls import suite

CHECKS = {
    "1": suite.check_soliton_mass,
    "2": suite.check_mass_curve,
    "3": suite.check_consistency,
    "4": suite.check_residual_order,
    "5": suite.check_spectrum,
    "6": suite.check_local_min,
    "6b": suite.check_local_min_in_band,
    "7": suite.check_properties,
}


@pytest.mark.parametrize("key", list(CHECKS))
def test_criterion(key, capsys):
    c = CHECKS[key]()
    with capsys.disabled():
        print(f"\n[criterion {key}] {c.line}")
        if not c.passed:
            print(f"[criterion {key}] detail: {c.detail}")
    assert c.passed, c.detail

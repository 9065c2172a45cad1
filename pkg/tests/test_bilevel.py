import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtrack.bilevel import (BiLevelInstance, closed_form_sigma, external_objective, golden_section,
                            grid_extremum, optimal_sigma, stationarity_residual, stationary_branch)
from mtrack.errors import BranchViolation, DomainError, EmptyBranch


def test_branch_solves_inner_condition():
    inst = BiLevelInstance([0.7, 1.3, 2.0])
    x = stationary_branch(inst, 0.2)
    assert stationarity_residual(inst, x, 0.2) < 1e-12


def test_external_is_minus_total_error():
    inst = BiLevelInstance([0.5, 1.5])
    assert external_objective(inst, 0.3) == pytest.approx(-stationary_branch(inst, 0.3).sum(), rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.5, 2.0), min_size=1, max_size=8))
def test_closed_form_agrees(a):
    inst = BiLevelInstance(a)
    opt = optimal_sigma(inst)
    if opt.interior:
        assert opt.sigma == pytest.approx(closed_form_sigma(a), rel=1e-9)


def test_grid_agrees():
    inst = BiLevelInstance([0.8, 1.1, 1.9])
    g, spacing = grid_extremum(inst)
    assert abs(math.log(g) - math.log(optimal_sigma(inst).sigma)) <= spacing


def test_off_branch_optimum_reported():
    # the stationary sigma lies beyond 1 / max(a), so the search ends at the boundary
    inst = BiLevelInstance([0.5] * 7 + [2.0])
    assert closed_form_sigma(inst.a) > inst.branch_upper
    opt = optimal_sigma(inst)
    assert not opt.interior and opt.sigma < inst.branch_upper


def test_narrow_bounds_not_interior():
    opt = optimal_sigma(BiLevelInstance([1.0], sigma_bounds=(0.01, 0.1)))
    assert not opt.interior


@pytest.mark.parametrize("a, exc", [([], DomainError), ([1.0, -1.0], EmptyBranch), ([np.inf], DomainError)])
def test_bad_coefficients(a, exc):
    with pytest.raises(exc):
        BiLevelInstance(a)


def test_empty_bounds():
    with pytest.raises(EmptyBranch):
        BiLevelInstance([2.0], sigma_bounds=(0.6, 0.9))


def test_branch_violation():
    with pytest.raises(BranchViolation):
        stationary_branch(BiLevelInstance([1.0]), 1.5)


def test_golden_section_quadratic():
    u, n = golden_section(lambda v: (v - 0.3) ** 2, -2.0, 2.0, tol=1e-10)
    assert u == pytest.approx(0.3, abs=1e-8) and n > 0

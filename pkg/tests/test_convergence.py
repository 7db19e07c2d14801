"""Manufactured-solution convergence of the velocity solver with the closure off."""
import pytest

from mms import exact_velocity, l2, solve, spatial_orders, temporal_order


def test_exact_state_is_nearly_preserved():
    grid, s = solve(32, 0.01, 0.2)
    assert l2(grid, s.vel, exact_velocity(grid, 0.2)) < 1e-2


@pytest.mark.slow
def test_spatial_order_second():
    errs, orders = spatial_orders()
    assert errs[0] > errs[1] > errs[2]
    assert min(orders) >= 1.9, orders


@pytest.mark.slow
def test_temporal_order_first():
    assert temporal_order() >= 0.9

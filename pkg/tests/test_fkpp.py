"""
Tests for the F-KPP cross-oracle.
"""
import numpy as np
import pytest

from bbm_extremes.exceptions import DomainError
from bbm_extremes.fkpp import CFL, fkpp_tail_compare, solve_fkpp


def test_initial_condition():
    """Test that t = 0 returns the step."""
    x = np.linspace(-2, 2, 9)
    assert solve_fkpp(0.0, x).tolist() == (x < 0).astype(float).tolist()


def test_solution_is_a_decreasing_front():
    """Test that the solution stays in [0, 1] and decreases in x."""
    x = np.arange(-10, 15, 0.05)
    u = solve_fkpp(3.0, x)
    assert np.all(u >= 0) and np.all(u <= 1)
    assert np.all(np.diff(u) <= 1e-12)
    assert u[0] == 1.0 and u[-1] == 0.0


def test_front_moves_right():
    """Test that the level set u = 1/2 advances with time."""
    x = np.arange(-10, 20, 0.05)
    early = x[np.argmin(np.abs(solve_fkpp(2.0, x) - 0.5))]
    late = x[np.argmin(np.abs(solve_fkpp(4.0, x) - 0.5))]
    assert late > early > 0


def test_stability_limit():
    """Test that time steps above the stability limit are rejected."""
    x = np.arange(-5, 5, 0.1)
    with pytest.raises(DomainError):
        solve_fkpp(1.0, x, dt=1.01 * CFL * 0.01)


@pytest.mark.parametrize("x", [[0.0, 1.0], [0.0, 1.0, 1.5], [[0.0, 1.0, 2.0]]])
def test_grid_validation(x):
    """Test that short, non-uniform or non-flat grids are rejected."""
    with pytest.raises(DomainError):
        solve_fkpp(1.0, x)


@pytest.mark.slow
def test_pde_agrees_with_monte_carlo(rng):
    """Test the PDE tail against one-dimensional BBM maxima."""
    comparisons = fkpp_tail_compare(2.0, [0.0, 1.0, 2.0, 3.0], 4000, rng)
    assert [c.x for c in comparisons] == [0.0, 1.0, 2.0, 3.0]
    pdes = [c.pde for c in comparisons]
    assert pdes == sorted(pdes, reverse=True)
    assert all(c.agrees for c in comparisons)

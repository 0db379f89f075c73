"""Lower-level solver against a dense bound-constrained least-squares oracle."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from invoc import build_grid, curvature_bound, lipschitz_probe, solve_lower
from invoc.discretization import inner, norm
from invoc.errors import ConvergenceError, DimensionError, DomainError

from util_dense import dense_matrix, h_norm, solve_lower_dense


def test_matches_dense_oracle_unconstrained(unit_spec):
    x = np.array([0.35, 0.65])
    sol = solve_lower(unit_spec, x, tol=1e-12)
    y_ref, u_ref = solve_lower_dense(unit_spec, x)
    assert h_norm(unit_spec.grid, sol.u - u_ref) <= 1e-8
    assert h_norm(unit_spec.grid, sol.y - y_ref) <= 1e-8


def test_matches_dense_oracle_with_binding_bounds(bounded_spec):
    x = np.array([0.3, 0.7])
    sol = solve_lower(bounded_spec, x, tol=1e-12)
    y_ref, u_ref = solve_lower_dense(bounded_spec, x)
    assert h_norm(bounded_spec.grid, sol.u - u_ref) <= 1e-8
    # the cap actually binds somewhere, otherwise this test is vacuous
    at_cap = np.isclose(sol.u, bounded_spec.bounds.ub, atol=1e-9)
    assert at_cap.any()
    # multiplier sign at the upper bound: lam >= 0
    assert sol.lam[at_cap].min() >= -1e-9


def test_matches_dense_oracle_pointwise(pointwise_spec):
    x = np.array([0.5, 0.5])
    sol = solve_lower(pointwise_spec, x, tol=1e-12)
    _, u_ref = solve_lower_dense(pointwise_spec, x)
    assert h_norm(pointwise_spec.grid, sol.u - u_ref) <= 1e-8


def test_kkt_residual_certifies_solution(unit_spec):
    sol = solve_lower(unit_spec, np.array([0.3, 0.7]), tol=1e-11)
    assert sol.kkt_residual <= 1e-9
    # recompute the pieces independently of the solver's own bookkeeping
    grid, op = unit_spec.grid, unit_spec.operator
    a = dense_matrix(grid)
    assert norm(grid, a @ sol.y - sol.u) <= 1e-9
    assert norm(grid, unit_spec.sigma * sol.u - sol.p + sol.lam) <= 1e-12
    interior = (sol.u > unit_spec.bounds.ua + 1e-6) & (sol.u < unit_spec.bounds.ub - 1e-6)
    assert np.abs(sol.lam[interior]).max() <= 1e-9


def test_planted_parameter_recovers_tracking_targets(unit_spec):
    # the instance was generated by tracking the solve at x_star
    x_star = np.asarray(unit_spec.metadata["x_star"])
    sol = solve_lower(unit_spec, x_star, tol=1e-12)
    assert h_norm(unit_spec.grid, sol.u - unit_spec.upper.u_o) <= 1e-9
    assert h_norm(unit_spec.grid, sol.y - unit_spec.upper.y_o) <= 1e-9


def test_warm_starts_agree(unit_spec):
    rng = np.random.default_rng(0)
    x = np.array([0.6, 0.4])
    cold = solve_lower(unit_spec, x)
    warm = solve_lower(unit_spec, x, warm_start=rng.standard_normal(16))
    assert h_norm(unit_spec.grid, cold.u - warm.u) <= 1e-9
    again = solve_lower(unit_spec, x, warm_start=cold.u)
    assert again.iterations <= 1


def test_boundary_parameter_is_valid(unit_spec):
    # vertices of the simplex are admissible parameters
    sol = solve_lower(unit_spec, np.array([1.0, 0.0]), tol=1e-11)
    assert sol.kkt_residual <= 1e-9


def test_zero_parameter_gives_zero_control(unit_spec):
    # with x = 0 the objective is pure regularization
    sol = solve_lower(unit_spec, np.array([0.0, 0.0]), tol=1e-12)
    assert h_norm(unit_spec.grid, sol.u) <= 1e-11


def test_parameter_validation(unit_spec):
    with pytest.raises(DomainError):
        solve_lower(unit_spec, np.array([-0.1, 1.1]))
    with pytest.raises(DimensionError):
        solve_lower(unit_spec, np.array([0.2, 0.3, 0.5]))
    with pytest.raises(DomainError):
        solve_lower(unit_spec, np.array([0.5, 0.5]), tol=0.0)
    with pytest.raises(DimensionError):
        solve_lower(unit_spec, np.array([0.5, 0.5]), warm_start=np.zeros(3))


def test_convergence_error_carries_residual(unit_spec, monkeypatch):
    # starve the iteration budget so the failure path is deterministic
    monkeypatch.setattr("invoc.lower._MAX_ITER", 3)
    with pytest.raises(ConvergenceError) as err:
        solve_lower(unit_spec, np.array([0.5, 0.5]), tol=1e-14)
    assert "fixed_point" in err.value.residuals
    assert err.value.residuals["fixed_point"] > 1e-14


def test_curvature_bound_dominates_dense_hessian(unit_spec, pointwise_spec):
    # curvature of u -> x . j(Su) in the weighted metric; the bound must
    # cover the top eigenvalue but stay within its 2 percent inflation
    for spec, x in ((unit_spec, np.array([0.3, 0.7])), (pointwise_spec, np.array([0.5, 0.5]))):
        grid = spec.grid
        a = dense_matrix(grid)
        s = np.linalg.solve(a, np.eye(grid.n_nodes))
        if spec.lower.kind == "target_type":
            hess = 2.0 * float(np.sum(x)) * grid.h * (s.T @ s)
        else:
            hess = np.zeros_like(s)
            for xi, node in zip(x, spec.lower.points):
                hess += 2.0 * xi * np.outer(s[node], s[node])
        # euclidean Hessian over h is the curvature in the weighted metric
        lam_max = float(np.linalg.eigvalsh(hess).max()) / grid.h
        est = curvature_bound(spec, x)
        assert est >= lam_max * (1.0 - 1e-9)
        assert est <= lam_max * 1.05


def test_lipschitz_probe_reports_deltas(unit_spec):
    out = lipschitz_probe(unit_spec, np.array([0.3, 0.7]), np.array([0.4, 0.6]))
    assert set(out) == {"dx", "du", "dy", "dp", "dlam"}
    assert out["dx"] == pytest.approx(np.sqrt(2) * 0.1)
    # solutions move, and boundedly so
    assert 0.0 < out["du"] <= 100.0 * out["dx"]

"""Lattice oracle: planted optima, nesting under refinement, tie-breaking,
and the batched solves against the dense reference."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import invoc.oracle
from invoc import (
    AdmissibleSetX,
    ControlBounds,
    LowerObjective,
    ProblemSpec,
    UpperObjective,
    build_grid,
    grid_search,
    compare,
    solve_lower,
)
from invoc.errors import ConvergenceError, ValidationError

from util_dense import solve_lower_dense, upper_value_dense


def _pure_parameter_spec(base: ProblemSpec, x_set: AdmissibleSetX) -> ProblemSpec:
    # F depends on x alone, so the oracle minimum is the projection of the
    # origin onto the admissible set
    n_nodes = base.grid.n_nodes
    return ProblemSpec(
        grid=base.grid, sigma=base.sigma, lower=base.lower,
        upper=UpperObjective(c_y=0.0, y_o=np.zeros(n_nodes),
                             c_u=0.0, u_o=np.zeros(n_nodes), gamma=1.0),
        x_set=x_set, bounds=base.bounds,
    )


def test_pure_parameter_minimum_simplex(unit_spec):
    spec = _pure_parameter_spec(unit_spec, AdmissibleSetX(kind="simplex", n=2))
    result = grid_search(spec, resolution=10)
    assert_allclose(result.best_x, [0.5, 0.5], atol=1e-15)
    assert result.best_value == pytest.approx(0.25, rel=1e-13)
    assert result.sample_count == 11
    assert result.lattice == "simplex"
    assert result.samples is None


def test_pure_parameter_minimum_box(unit_spec):
    box = AdmissibleSetX(kind="box", n=2,
                         lo=np.array([0.2, 0.2]), hi=np.array([1.0, 1.0]))
    spec = _pure_parameter_spec(unit_spec, box)
    result = grid_search(spec, resolution=5)
    assert_allclose(result.best_x, [0.2, 0.2], atol=1e-15)
    assert result.best_value == pytest.approx(0.04, rel=1e-13)
    assert result.sample_count == 36
    assert result.lattice == "box"


def test_refinement_nests_and_recovers_plant(unit_spec):
    # 0.3 = 3/10 = 6/20 = 12/40, so the planted parameter lies on all three
    # lattices and refinement can only improve the best value
    values = []
    for resolution in (10, 20, 40):
        result = grid_search(unit_spec, resolution)
        assert_allclose(result.best_x, [0.3, 0.7], atol=1e-15)
        values.append(result.best_value)
    assert values[0] <= 1e-10
    assert values[1] <= values[0] + 1e-15
    assert values[2] <= values[1] + 1e-15


def test_nested_lattice_values_agree(unit_spec):
    coarse = grid_search(unit_spec, 10, keep_samples=True)
    fine = grid_search(unit_spec, 20, keep_samples=True)
    assert_allclose(fine.samples[::2, :2], coarse.samples[:, :2], atol=1e-15)
    assert_allclose(fine.samples[::2, 2], coarse.samples[:, 2], atol=1e-9)


def test_constant_objective_tie_breaks_to_first_point(unit_spec):
    n_nodes = unit_spec.grid.n_nodes
    flat = ProblemSpec(
        grid=unit_spec.grid, sigma=unit_spec.sigma, lower=unit_spec.lower,
        upper=UpperObjective(c_y=0.0, y_o=np.zeros(n_nodes),
                             c_u=0.0, u_o=np.zeros(n_nodes), gamma=0.0),
        x_set=unit_spec.x_set, bounds=unit_spec.bounds,
    )
    result = grid_search(flat, resolution=7)
    assert_allclose(result.best_x, [0.0, 1.0], atol=1e-15)
    assert result.best_value == 0.0


def test_batched_values_match_dense_reference(unit_spec):
    result = grid_search(unit_spec, 6, keep_samples=True)
    assert result.samples.shape == (7, 3)
    for row in result.samples:
        x = row[:2]
        y, u = solve_lower_dense(unit_spec, x)
        assert row[2] == pytest.approx(
            upper_value_dense(unit_spec, x, y, u), abs=5e-8
        )
    k = int(np.argmin(result.samples[:, 2]))
    assert_allclose(result.samples[k, :2], result.best_x, atol=1e-15)
    assert result.samples[k, 2] == result.best_value


def test_three_parameter_simplex_lattice():
    grid = build_grid(8)
    w = grid.nodes
    targets = np.vstack([np.sin(np.pi * w), np.sin(2 * np.pi * w), w * (1 - w)])
    spec = ProblemSpec(
        grid=grid, sigma=1e-2,
        lower=LowerObjective(kind="target_type", targets=targets),
        upper=UpperObjective(c_y=0.0, y_o=np.zeros(8),
                             c_u=0.0, u_o=np.zeros(8), gamma=1.0),
        x_set=AdmissibleSetX(kind="simplex", n=3),
        bounds=ControlBounds(ua=np.full(8, -50.0), ub=np.full(8, 50.0)),
    )
    result = grid_search(spec, resolution=6)
    assert result.sample_count == 28  # (6+1)(6+2)/2 barycentric points
    assert_allclose(result.best_x, np.full(3, 1.0 / 3.0), atol=1e-15)


def test_compare_reports_gap(unit_spec):
    result = grid_search(unit_spec, 10)
    report = compare(unit_spec, result.best_value, 10)
    assert report["gap_to_oracle"] == 0.0
    assert report["best_value"] == result.best_value
    assert report["sample_count"] == 11

    # an on-lattice candidate can never beat the lattice best
    x = np.array([0.4, 0.6])
    low = solve_lower(unit_spec, x, tol=1e-12)
    value = unit_spec.upper.value(unit_spec.grid, x, low.y, low.u)
    report = compare(unit_spec, value, 10)
    assert report["gap_to_oracle"] >= -1e-9
    assert report["candidate_value"] == pytest.approx(value)


def test_dimension_and_resolution_validation(unit_spec):
    grid = build_grid(8)
    w = grid.nodes
    targets = np.vstack([w, w ** 2, w ** 3, np.sin(np.pi * w)])
    wide = ProblemSpec(
        grid=grid, sigma=1e-2,
        lower=LowerObjective(kind="target_type", targets=targets),
        upper=UpperObjective(c_y=0.0, y_o=np.zeros(8),
                             c_u=0.0, u_o=np.zeros(8), gamma=1.0),
        x_set=AdmissibleSetX(kind="simplex", n=4),
        bounds=ControlBounds(ua=np.full(8, -50.0), ub=np.full(8, 50.0)),
    )
    with pytest.raises(ValidationError, match="at most 3"):
        grid_search(wide, 5)
    with pytest.raises(ValidationError, match="resolution"):
        grid_search(unit_spec, 1)


def test_batch_iteration_cap_raises(unit_spec, monkeypatch):
    monkeypatch.setattr(invoc.oracle, "_BATCH_CAP", 2)
    with pytest.raises(ConvergenceError, match="stalled") as excinfo:
        grid_search(unit_spec, 5)
    assert excinfo.value.residuals["fixed_point_max"] > 0.0

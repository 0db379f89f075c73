"""Shipped instances.

The default instance is constructed so its global solution is known: the
upper-level targets are the lower-level solution at a chosen generator
parameter x_star, which makes the optimal upper value exactly zero at
x_star.  That gives end-to-end runs a ground truth without any reference
data.
"""

from __future__ import annotations

import numpy as np

from .discretization import build_grid
from .lower import solve_lower
from .model import (
    AdmissibleSetX,
    ControlBounds,
    LowerObjective,
    ProblemSpec,
    UpperObjective,
)

X_STAR = (0.3, 0.7)


def _instance(x_set: AdmissibleSetX, name: str) -> ProblemSpec:
    grid = build_grid(64)
    nodes = grid.nodes
    targets = np.stack([np.sin(np.pi * nodes), np.sin(2.0 * np.pi * nodes)])
    lower = LowerObjective(kind="target_type", targets=targets)
    bounds = ControlBounds(
        ua=np.full(grid.n_nodes, -50.0), ub=np.full(grid.n_nodes, 50.0)
    )
    zeros = np.zeros(grid.n_nodes)
    seed_spec = ProblemSpec(
        grid=grid,
        sigma=1e-2,
        lower=lower,
        upper=UpperObjective(c_y=1.0, y_o=zeros, c_u=1.0, u_o=zeros, gamma=0.0),
        x_set=x_set,
        bounds=bounds,
    )
    x_star = np.array(X_STAR)
    gen = solve_lower(seed_spec, x_star, tol=1e-12)
    return ProblemSpec(
        grid=grid,
        sigma=1e-2,
        lower=lower,
        upper=UpperObjective(c_y=1.0, y_o=gen.y, c_u=1.0, u_o=gen.u, gamma=0.0),
        x_set=x_set,
        bounds=bounds,
        solver_tol=1e-10,
        active_tol=1e-6,
        metadata={"name": name, "x_star": list(X_STAR)},
    )


def make_default_problem() -> ProblemSpec:
    """Simplex-constrained instance with known optimum at x_star."""
    return _instance(AdmissibleSetX(kind="simplex", n=2), "default")


def make_box_variant() -> ProblemSpec:
    """Same construction with the parameter box [0, 1]^2.

    x_star is interior to the box, so the known optimum carries over.
    """
    x_set = AdmissibleSetX(
        kind="box", n=2, lo=np.zeros(2), hi=np.ones(2)
    )
    return _instance(x_set, "box_variant")

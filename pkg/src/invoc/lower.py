"""Parametric lower-level solver.

For a fixed parameter x in R^n_+ the lower problem minimizes
x . j(Su) + (sigma/2) ||u||^2 over the bound-feasible controls, where
S = A^{-1} B maps controls to states.  The reduced objective is strongly
convex, so the solution map and its multipliers are single valued; they are
computed by projected gradient with the fixed step 1/(sigma + L_x), where
L_x bounds the curvature of u -> x . j(Su).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import inner, norm
from .errors import ConvergenceError, DimensionError, DomainError
from .model import ProblemSpec, eval_j_grad_adjoint

_MAX_ITER = 200000


@dataclass(frozen=True, eq=False)
class LowerSolution:
    """Optimal (y, u) of the parametric problem with its multipliers.

    p solves the adjoint equation A*p = -j'(y)*x and lam = B*p - sigma*u,
    so the gradient equation holds by construction; kkt_residual is the
    maximum over the state equation, adjoint equation, gradient equation,
    and the sign conditions of the bound multiplier.
    """

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    p: np.ndarray
    lam: np.ndarray
    kkt_residual: float
    iterations: int


def _validate_parameter(spec: ProblemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n,):
        raise DimensionError(f"parameter has shape {x.shape}, expected ({spec.n},)")
    if (x < -1e-12).any():
        raise DomainError(
            f"parameter {x} has a negative component; the lower problem is "
            "only well posed on R^n_+"
        )
    return np.maximum(x, 0.0)


def curvature_bound(spec: ProblemSpec, x: np.ndarray) -> float:
    """Upper bound L_x on the curvature of u -> x . j(Su) by power iteration.

    The grid-dependent factor (the largest eigenvalue of S*S for the
    target kind, the evaluation-functional preimages for the pointwise
    kind) is cached on the operator; the returned estimate is inflated by
    2 percent so the projected-gradient step 1/(sigma + L_x) stays safe.
    """
    op = spec.operator
    grid = spec.grid
    if spec.lower.kind == "target_type":
        return 1.02 * 2.0 * float(np.sum(x)) * op.sts_norm_bound()
    cache = getattr(op, "_point_preimages", None)
    if cache is None or cache[0] != spec.lower.points:
        rhs = np.zeros((grid.n_nodes, len(spec.lower.points)))
        for col, node in enumerate(spec.lower.points):
            rhs[node, col] = 1.0 / grid.h
        preimages = op.solve(rhs)
        cache = (spec.lower.points, preimages)
        op._point_preimages = cache
    s = cache[1]
    if float(np.sum(x)) == 0.0:
        return 0.0
    v = np.ones(grid.n_nodes)
    v /= norm(grid, v)
    lam = 0.0
    for _ in range(10000):
        coeff = 2.0 * x * (grid.h * (s.T @ v))
        w = s @ coeff
        lam_new = inner(grid, v, w)
        nw = norm(grid, w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= 1e-13 * max(abs(lam_new), 1e-300):
            lam = lam_new
            break
        lam = lam_new
    return 1.02 * float(lam)


def _reduced_gradient(spec: ProblemSpec, x: np.ndarray, u: np.ndarray):
    """Gradient of the reduced objective and the state it was computed at."""
    op = spec.operator
    y = op.solve(u)
    adj = eval_j_grad_adjoint(spec.grid, spec.lower, y, x)
    return spec.sigma * u + op.solve_adjoint(adj), y


def solve_lower(
    spec: ProblemSpec,
    x,
    tol: float | None = None,
    warm_start: np.ndarray | None = None,
) -> LowerSolution:
    """Solve the parametric problem at x and recover its unique multipliers.

    Exits when the projected-gradient fixed-point residual
    ||u - P_U(u - tau grad g(u))|| drops below tol, which is the discrete
    form of -grad g(u) being in the normal cone at u.
    """
    x = _validate_parameter(spec, x)
    if tol is None:
        tol = spec.solver_tol
    if not (tol > 0.0):
        raise DomainError("solver tolerance must be positive")
    grid = spec.grid
    op = spec.operator
    bounds = spec.bounds

    tau = 1.0 / (spec.sigma + curvature_bound(spec, x))
    if warm_start is not None:
        warm = np.asarray(warm_start, dtype=float)
        if warm.shape[0] != grid.n_nodes:
            raise DimensionError("warm start length does not match grid")
        u = bounds.project(warm)
    else:
        u = bounds.project(np.zeros(grid.n_nodes))

    iterations = 0
    residual = np.inf
    for iterations in range(_MAX_ITER + 1):
        grad, y = _reduced_gradient(spec, x, u)
        step = bounds.project(u - tau * grad)
        residual = norm(grid, u - step)
        if residual <= tol:
            break
        u = step
    else:
        raise ConvergenceError(
            f"lower solve did not reach tol {tol:g} in {_MAX_ITER} iterations "
            f"(residual {residual:.3e})",
            residuals={"fixed_point": float(residual)},
        )

    adj = eval_j_grad_adjoint(grid, spec.lower, y, x)
    p = op.solve_adjoint(-adj)
    lam = p - spec.sigma * u

    state_res = norm(grid, op.apply(y) - u)
    adjoint_res = norm(grid, adj + op.apply_adjoint(p))
    gradient_res = norm(grid, spec.sigma * u - p + lam)
    sign_res = bounds.normal_cone_residual(u, lam, spec.active_tol)
    kkt = max(state_res, adjoint_res, gradient_res, sign_res)

    return LowerSolution(
        x=x, y=y, u=u, p=p, lam=lam,
        kkt_residual=float(kkt), iterations=iterations,
    )


def lipschitz_probe(spec: ProblemSpec, x1, x2) -> dict:
    """Solution and multiplier deltas between two parameters.

    Returns dx together with du, dy, dp, dlam in the weighted norm; the
    ratios are empirical Lipschitz quotients of the solution maps.
    """
    s1 = solve_lower(spec, x1)
    s2 = solve_lower(spec, x2)
    grid = spec.grid
    return {
        "dx": float(np.linalg.norm(s1.x - s2.x)),
        "du": norm(grid, s1.u - s2.u),
        "dy": norm(grid, s1.y - s2.y),
        "dp": norm(grid, s1.p - s2.p),
        "dlam": norm(grid, s1.lam - s2.lam),
    }

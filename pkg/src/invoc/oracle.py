"""Brute-force reference on small parameter dimensions.

The lower-level problem has a unique solution for every parameter, so the
bilevel problem reduces to minimizing x -> F(x, psi_y(x), psi_u(x)) over
the admissible set.  This module samples that reduced objective on a
lattice (barycentric on the simplex, tensor on a box) and returns the best
sample.  Lattices at resolutions m and 2m nest, so refinement can only
improve the best value.  Lower solves run batched over lattice columns at
a tightened tolerance so comparisons are not tolerance-dominated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError
from .model import ProblemSpec

_CHUNK = 32768
_BATCH_CAP = 100000


@dataclass(eq=False)
class OracleResult:
    best_x: np.ndarray
    best_value: float
    sample_count: int
    resolution: int
    lattice: str
    samples: np.ndarray | None = None  # rows (x_1..x_n, value) when requested


def _simplex_lattice(n: int, m: int) -> np.ndarray:
    """Barycentric lattice {k/m : sum k = m} in ascending lexicographic order."""
    if n == 1:
        return np.array([[1.0]])
    pts = []
    if n == 2:
        for i in range(m + 1):
            pts.append((i, m - i))
    else:
        for i in range(m + 1):
            for j in range(m - i + 1):
                pts.append((i, j, m - i - j))
    return np.asarray(pts, dtype=float) / m


def _box_lattice(lo: np.ndarray, hi: np.ndarray, m: int) -> np.ndarray:
    axes = [lo[d] + (hi[d] - lo[d]) * np.arange(m + 1) / m for d in range(lo.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, lo.size)


def _batch_curvature(spec: ProblemSpec, X: np.ndarray) -> np.ndarray:
    """Per-row curvature bounds for the batched lower solves.

    The pointwise kind uses the rank-one sum bound 2 sum_i x_i ||s_i||^2,
    which dominates the exact largest eigenvalue, so the induced steps are
    conservative but always safe.
    """
    op, grid = spec.operator, spec.grid
    if spec.lower.kind == "target_type":
        return 1.02 * 2.0 * X.sum(axis=1) * op.sts_norm_bound()
    from .lower import curvature_bound

    curvature_bound(spec, X[0])  # populate the preimage cache
    s = op._point_preimages[1]
    w2 = grid.h * (s * s).sum(axis=0)
    return 2.0 * X @ w2


def _reduced_values(spec: ProblemSpec, X: np.ndarray, tol: float) -> np.ndarray:
    """F(x, psi_y(x), psi_u(x)) for every row of X, solved as one batch."""
    op, grid = spec.operator, spec.grid
    lower, upper = spec.lower, spec.upper
    m = X.shape[0]
    ua = spec.bounds.ua[:, None]
    ub = spec.bounds.ub[:, None]
    tau = 1.0 / (spec.sigma + _batch_curvature(spec, X))

    U = np.clip(np.zeros((grid.n_nodes, m)), ua, ub)
    for _ in range(_BATCH_CAP):
        Y = op.solve(U)
        if lower.kind == "target_type":
            R = 2.0 * X.sum(axis=1)[None, :] * Y - 2.0 * (lower.targets.T @ X.T)
        else:
            R = np.zeros_like(Y)
            for i, node in enumerate(lower.points):
                R[node, :] += 2.0 * X[:, i] * (Y[node, :] - lower.target[node]) / grid.h
        G = spec.sigma * U + op.solve_adjoint(R)
        step = np.clip(U - tau[None, :] * G, ua, ub)
        res = np.sqrt(grid.h * ((U - step) ** 2).sum(axis=0))
        if (res <= tol).all():
            break
        U = step
    else:
        raise ConvergenceError(
            f"batched lower solves stalled above tol {tol:g}",
            residuals={"fixed_point_max": float(res.max())},
        )

    Y = op.solve(U)
    vals = (
        0.5 * upper.c_y * grid.h * ((Y - upper.y_o[:, None]) ** 2).sum(axis=0)
        + 0.5 * upper.c_u * grid.h * ((U - upper.u_o[:, None]) ** 2).sum(axis=0)
        + 0.5 * upper.gamma * (X * X).sum(axis=1)
    )
    return vals


def grid_search(
    spec: ProblemSpec,
    resolution: int,
    tol: float = 1e-12,
    keep_samples: bool = False,
) -> OracleResult:
    """Exhaustive reduced-objective search over the admissible lattice.

    Ties go to the lexicographically smallest parameter, which is the first
    one generated.  Refusing n > 3 keeps the sample count from exploding.
    """
    n = spec.n
    if n > 3:
        raise ValidationError(
            f"exhaustive search supports at most 3 parameters, got {n}"
        )
    if resolution < 2:
        raise ValidationError(f"resolution must be at least 2, got {resolution}")

    if spec.x_set.kind == "simplex":
        X = _simplex_lattice(n, resolution)
    else:
        X = _box_lattice(spec.x_set.lo, spec.x_set.hi, resolution)

    best_value = np.inf
    best_x = X[0]
    rows = [] if keep_samples else None
    for start in range(0, X.shape[0], _CHUNK):
        chunk = X[start : start + _CHUNK]
        vals = _reduced_values(spec, chunk, tol)
        k = int(np.argmin(vals))
        if vals[k] < best_value:
            best_value = float(vals[k])
            best_x = chunk[k].copy()
        if rows is not None:
            rows.append(np.column_stack([chunk, vals]))

    return OracleResult(
        best_x=best_x,
        best_value=best_value,
        sample_count=X.shape[0],
        resolution=resolution,
        lattice=spec.x_set.kind,
        samples=np.vstack(rows) if rows else None,
    )


def compare(spec: ProblemSpec, candidate_value: float, resolution: int) -> dict:
    """Gap between a candidate upper value and the lattice best.

    A negative gap means the candidate beat every lattice sample, which is
    possible since the lattice only subsamples the feasible set.
    """
    result = grid_search(spec, resolution)
    return {
        "gap_to_oracle": float(candidate_value) - result.best_value,
        "candidate_value": float(candidate_value),
        "best_value": result.best_value,
        "best_x": result.best_x,
        "resolution": resolution,
        "sample_count": result.sample_count,
    }

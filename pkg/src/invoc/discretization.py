"""One-dimensional finite-difference discretization of the unit interval.

Interior-node grid for the homogeneous Dirichlet Laplacian on (0, 1):
N interior nodes omega_i = i*h with h = 1/(N+1).  Grid functions are plain
float vectors of length N.  All pairings use the weighted inner product
<u, v> = h * sum(u_i * v_i); dual quantities (adjoint states, point
evaluation functionals) are stored as Riesz coefficient vectors under that
product, so a Dirac at node i is e_i / h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import DimensionError, GridError


@dataclass(frozen=True)
class Grid:
    """Uniform interior-node grid on (0, 1) with mesh width h = 1/(N+1)."""

    n_nodes: int

    def __post_init__(self) -> None:
        if not isinstance(self.n_nodes, (int, np.integer)):
            raise GridError(f"node count must be an integer, got {self.n_nodes!r}")
        if self.n_nodes < 2:
            raise GridError(f"need at least 2 interior nodes, got {self.n_nodes}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n_nodes + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n_nodes + 1)


def build_grid(n_nodes: int) -> Grid:
    """Create a grid with the given number of interior nodes (at least 2)."""
    return Grid(n_nodes)


def _check_length(grid: Grid, v: np.ndarray, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != grid.n_nodes:
        raise DimensionError(
            f"{name} has length {v.shape[0]}, grid has {grid.n_nodes} nodes"
        )
    return v


def inner(grid: Grid, u: np.ndarray, v: np.ndarray) -> float:
    """Weighted inner product h * sum(u_i * v_i)."""
    u = _check_length(grid, u, "u")
    v = _check_length(grid, v, "v")
    return float(grid.h * np.dot(u, v))


def norm(grid: Grid, u: np.ndarray) -> float:
    """Norm induced by the weighted inner product."""
    u = _check_length(grid, u, "u")
    return float(np.sqrt(grid.h) * np.linalg.norm(u))


class EllipticOperator:
    """Dirichlet Laplacian A = tridiag(-1, 2, -1)/h^2 with a cached factorization.

    A is symmetric positive definite with respect to the weighted inner
    product, so apply/solve and their adjoint variants coincide.  The
    Cholesky factorization of the banded matrix is computed once at
    construction; solves accept a vector or a matrix of stacked columns.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        n = grid.n_nodes
        h2 = grid.h * grid.h
        ab = np.empty((2, n))
        ab[0, :] = -1.0 / h2
        ab[0, 0] = 0.0
        ab[1, :] = 2.0 / h2
        self._factor = cholesky_banded(ab)
        self._sts_norm: float | None = None

    def apply(self, y: np.ndarray) -> np.ndarray:
        """Apply the stencil (-y_{i-1} + 2 y_i - y_{i+1})/h^2 with zero boundary."""
        y = _check_length(self.grid, y, "state")
        h2 = self.grid.h * self.grid.h
        out = 2.0 * y
        out[:-1] -= y[1:]
        out[1:] -= y[:-1]
        return out / h2

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        """Adjoint application; identical to apply because A is self-adjoint."""
        return self.apply(y)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve A y = rhs.  rhs may be a vector or a matrix of columns."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.grid.n_nodes:
            raise DimensionError(
                f"rhs has leading dimension {rhs.shape[0]}, "
                f"grid has {self.grid.n_nodes} nodes"
            )
        return cho_solve_banded((self._factor, False), rhs)

    def solve_adjoint(self, rhs: np.ndarray) -> np.ndarray:
        """Adjoint solve; identical to solve because A is self-adjoint."""
        return self.solve(rhs)

    def sts_norm_bound(self) -> float:
        """Largest eigenvalue of S*S for S = A^{-1}B, by power iteration.

        Deterministic start, iterated until the Rayleigh quotient settles to
        relative 1e-13.  Cached on the operator.
        """
        if self._sts_norm is None:
            v = np.ones(self.grid.n_nodes)
            v /= np.sqrt(inner(self.grid, v, v))
            lam = 0.0
            for _ in range(10000):
                w = self.solve(self.solve(v))
                lam_new = inner(self.grid, v, w)
                nw = np.sqrt(inner(self.grid, w, w))
                assert nw > 0.0
                v = w / nw
                if abs(lam_new - lam) <= 1e-13 * abs(lam_new):
                    lam = lam_new
                    break
                lam = lam_new
            self._sts_norm = float(lam)
        return self._sts_norm


def apply_A(op: EllipticOperator, y: np.ndarray) -> np.ndarray:
    """Apply the discrete Laplacian to a state vector."""
    return op.apply(y)


def solve_A(op: EllipticOperator, rhs: np.ndarray) -> np.ndarray:
    """Solve the discrete Poisson problem A y = rhs."""
    return op.solve(rhs)


def solve_A_adjoint(op: EllipticOperator, rhs: np.ndarray) -> np.ndarray:
    """Solve the adjoint problem; equals solve_A by symmetry."""
    return op.solve_adjoint(rhs)

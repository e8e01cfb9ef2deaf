"""Spectral fractional powers of the conductivity operator (reference route).

The operator is defined on the computational box with zero Dirichlet
truncation at the frame: with K the stiffness matrix over the interior
("active") nodes and m = prod(h) the uniform node volume, the operator
matrix is A = K / m and its fractional power is taken through a dense
eigendecomposition, ``A^s = V diag(lambda^s) V^T``.  Repeated eigenvalues
need no tie-breaking: matrix functions are basis independent.

This is the oracle route; it scales only to a few thousand nodes and exists
to cross-check the extension route, which scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigError, ParamError, SolveError
from .local_elliptic import LocalOperator

__all__ = [
    "SpectralPower",
    "NonlocalDtN",
    "spectral_power",
    "matrix_power",
    "solve_fractional_dirichlet",
    "nonlocal_dtn",
    "nonlocal_dtn_matrix",
]

DENSE_NODE_CAP = 5000


def matrix_power(A: np.ndarray, s: float) -> np.ndarray:
    """Fractional power of a symmetric PSD matrix via eigendecomposition."""
    try:
        lam, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigError(f"eigendecomposition failed: {exc}") from exc
    lam = np.clip(lam, 0.0, None)
    return (V * lam**s) @ V.T


@dataclass
class SpectralPower:
    """Dense fractional power of the truncated conductivity operator.

    ``eigvals``/``eigvecs`` diagonalize K_active / node_volume; ``apply``
    and ``matrix`` realize the power on full-grid arrays (frame nodes are
    identically zero).
    """

    op: LocalOperator
    s: float
    active: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray

    @property
    def grid(self):
        return self.op.grid

    def matrix(self) -> np.ndarray:
        return (self.eigvecs * self.eigvals**self.s) @ self.eigvecs.T

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Apply the power to a full-grid array; returns a full-grid array."""
        ua = u[self.active]
        out = np.zeros_like(u, dtype=float)
        coeff = self.eigvecs.T @ ua
        out[self.active] = self.eigvecs @ (self.eigvals**self.s * coeff)
        return out


def spectral_power(op: LocalOperator, s: float) -> SpectralPower:
    """Eigendecompose the active-node operator; action on an eigenvector with
    eigenvalue lambda is lambda**s times it."""
    if not 0.0 < s <= 1.0:
        raise ParamError(f"s must lie in (0, 1], got {s}")
    grid = op.grid
    active = grid.active
    n_active = int(active.sum())
    if n_active > DENSE_NODE_CAP:
        raise EigError(
            f"{n_active} active nodes exceeds the dense-eigendecomposition cap "
            f"({DENSE_NODE_CAP}); this route is the desk-scale oracle"
        )
    A = op.stiffness[active][:, active].toarray() / op.node_volume
    A = 0.5 * (A + A.T)
    try:
        lam, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigError(f"eigendecomposition failed: {exc}") from exc
    lam = np.clip(lam, 0.0, None)
    return SpectralPower(op=op, s=s, active=active, eigvals=lam, eigvecs=V)


def solve_fractional_dirichlet(P: SpectralPower, f: np.ndarray) -> np.ndarray:
    """Solve the exterior-value problem for the fractional operator.

    ``f`` is a full-grid array supported on the measurement region; the
    returned full-grid field equals f on the exterior nodes and the power
    applied to it vanishes on the closed interior region (solved as the
    interior block of the dense power matrix).
    """
    grid = P.grid
    f = np.asarray(f, dtype=float)
    support = np.flatnonzero(f)
    if support.size and not np.all(grid.w_mask[support]):
        raise ParamError("exterior data must be supported on the measurement region")
    A = P.matrix()
    act = P.active
    fa = f[act]
    sol_block = grid.omega_closure[act]
    rhs = -(A[np.ix_(sol_block, ~sol_block)] @ fa[~sol_block])
    try:
        u_omega = np.linalg.solve(A[np.ix_(sol_block, sol_block)], rhs)
    except np.linalg.LinAlgError as exc:
        raise SolveError(f"interior-block solve failed: {exc}") from exc
    ua = fa.copy()
    ua[sol_block] = u_omega
    out = np.zeros(grid.num_nodes)
    out[act] = ua
    return out


def nonlocal_dtn(P: SpectralPower, f: np.ndarray) -> np.ndarray:
    """Values of the fractional operator of the solution on the measurement
    region (the nonlocal measurement map applied to f)."""
    u = solve_fractional_dirichlet(P, f)
    return P.apply(u)[P.grid.w_indices]


@dataclass
class NonlocalDtN:
    """Dense nonlocal measurement map in the nodal basis on the region W.

    Symmetric with respect to the quadrature pairing <f, g> = volume * sum(fg),
    the discrete stand-in for the (H^s, H^{-s}) duality it acts between.
    """

    grid_shape: tuple
    w_indices: np.ndarray
    matrix: np.ndarray
    weight: float
    s: float

    def pairing(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(self.weight * np.sum(f * g))


def nonlocal_dtn_matrix(P: SpectralPower) -> NonlocalDtN:
    grid = P.grid
    widx = grid.w_indices
    cols = np.empty((len(widx), len(widx)))
    for j, node in enumerate(widx):
        f = np.zeros(grid.num_nodes)
        f[node] = 1.0
        cols[:, j] = nonlocal_dtn(P, f)
    return NonlocalDtN(
        grid_shape=grid.shape,
        w_indices=widx,
        matrix=cols,
        weight=grid.node_volume,
        s=P.s,
    )

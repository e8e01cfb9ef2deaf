"""Sparse linear solves with a size-based direct/iterative switch."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolveError

DIRECT_LIMIT = 200_000
CG_TOL = 1e-10


class Factorized:
    """Reusable solver for one SPD matrix: direct factorization below
    DIRECT_LIMIT unknowns, Jacobi-preconditioned conjugate gradients above.
    Every solve checks its relative residual; a miss raises SolveError."""

    def __init__(self, A: sp.spmatrix):
        self.A = A.tocsc()
        self.n = A.shape[0]
        if self.n <= DIRECT_LIMIT:
            try:
                self._lu = spla.splu(self.A)
            except Exception as exc:  # pragma: no cover
                raise SolveError(f"factorization failed: {exc}") from exc
        else:
            self._lu = None
            d = A.diagonal()
            self._M = sp.diags(1.0 / np.where(d > 0, d, 1.0))

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.n == 0:
            return np.zeros(0)
        if self._lu is not None:
            x = self._lu.solve(b)
        else:
            x, info = spla.cg(
                self.A, b, rtol=CG_TOL, maxiter=50 * int(np.sqrt(self.n)) + 1000,
                M=self._M,
            )
            if info != 0:
                raise SolveError(f"conjugate gradients did not converge (info={info})")
        scale = np.linalg.norm(b)
        if scale > 0:
            rel = np.linalg.norm(self.A @ x - b) / scale
            if not np.isfinite(rel) or rel > 1e-8:
                raise SolveError(f"linear solve residual {rel:.2e} exceeds tolerance")
        return x

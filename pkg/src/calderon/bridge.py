"""The constructive bridge between the nonlocal and local problems.

Core constructions:

* the vertical integral ``v(x') = int_0^inf t**(1-2s) u(x', t) dt`` of an
  extension field, by exact weighted cell measures times the midpoint value
  of the per-cell linear interpolant (no singular sampling at t = 0);
* its partial variant from an arbitrary starting height;
* the duality transform ``u2 = t**(2s-1) d_t u1`` mapping solutions of the
  (2s-1)-weight Neumann problem to solutions of the (1-2s)-weight Dirichlet
  problem;
* verification that v solves the tangential conductivity equation (weak
  residual against the nodal test basis), with zero right-hand side inside
  the interior region or with the spectral fractional operator of the trace
  data as the source elsewhere;
* the Cauchy-data operator T: f -> (v at the region boundary, conormal flux
  of v there);
* a least-squares density diagnostic for boundary traces of the v's, and a
  coefficient-distinguishability experiment for the two measurement maps.

Discrete identity worth knowing when reading residual reports: column-summing
the assembled extension equations gives, exactly,

    (K' v)_i = -m_i * trace_i - m_i * (top truncation flux)_i,

so the weak residual of v is the trace-versus-oracle mismatch plus a top
flux that decays exponentially in the truncation height.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc, gamma as gamma_fn

from .coefficients import Coefficient, identity_coefficient
from .errors import MeshMismatch, ParamError, RankWarning, TailError
from .extension import (
    ExtensionField,
    ExtensionSolver,
    analytic_cs,
    assemble_extension,
)
from .local_elliptic import (
    LocalOperator,
    assemble_local,
    boundary_flux,
    local_dtn_matrix,
)
from .mesh import (
    ExtensionMesh,
    TangentialGrid,
    build_extension_mesh,
    build_vertical_mesh,
    default_height,
)

__all__ = [
    "VerticalIntegralField",
    "CauchyPair",
    "vertical_integral",
    "partial_vertical_integral",
    "duality_transform",
    "DualityReport",
    "verify_local_equation",
    "ResidualReport",
    "BridgePipeline",
    "operator_T",
    "density_diagnostic",
    "DensityReport",
    "distinguishability_experiment",
    "GapReport",
]


@dataclass
class VerticalIntegralField:
    """Column-wise weighted vertical integral of an extension field.

    ``tail_bound`` estimates the mass of the untruncated integral above the
    top height by extrapolating the field's own vertical decay;
    ``algebraic_tail_bound`` is the closed-form bound driven by the free-space
    decay rate y**(-n) (infinite when the weighted integrand is not
    integrable at that rate, which happens for n + 2s <= 2).
    """

    values: np.ndarray
    s: float
    tail_bound: float
    algebraic_tail_bound: float
    quadrature: str = "weighted-cell-midpoint"


def partial_vertical_integral(field: ExtensionField, start: float) -> np.ndarray:
    """``int_start^M t**(1-2s) u(x', t) dt`` per tangential node.

    Cells below ``start`` are dropped; the cell containing it contributes its
    exact clipped weighted measure times the linear interpolant at the
    clipped midpoint.  ``start = 0`` is the full integral (same code path).
    """
    vm = field.emesh.vertical
    y = vm.levels
    if start < 0 or start > vm.height:
        raise ParamError(f"start height {start} outside [0, {vm.height}]")
    e = 2.0 - 2.0 * field.s
    lo = np.maximum(y[:-1], start)
    hi = y[1:]
    live = hi > lo
    measure = np.zeros(vm.num_levels)
    measure[live] = (hi[live] ** e - lo[live] ** e) / e
    # linear interpolant evaluated at the clipped midpoint
    mid = np.zeros(vm.num_levels)
    dy = y[1:] - y[:-1]
    mid[live] = ((lo[live] + hi[live]) / 2 - y[:-1][live]) / dy[live]
    w_lo = measure * (1.0 - mid)
    w_hi = measure * mid
    cols = field.as_columns()
    return cols[:, :-1] @ w_lo + cols[:, 1:] @ w_hi


def _empirical_tail(field: ExtensionField) -> float:
    """Extrapolated weighted tail above the truncation height.

    Fits an exponential decay rate to the column sup norms over the upper
    levels; a non-decaying field yields an infinite bound.
    """
    vm = field.emesh.vertical
    cols = np.abs(field.as_columns())
    sup = cols.max(axis=0)
    J = vm.num_levels
    top = slice(max(2 * J // 3, 1), J)  # exclude the (possibly pinned) top level
    y = vm.levels[top]
    s_vals = sup[top]
    pos = s_vals > 0
    if not np.any(pos):
        return 0.0
    if np.count_nonzero(pos) < 2:
        return float("inf")
    y, s_vals = y[pos], s_vals[pos]
    slope, intercept = np.polyfit(y, np.log(s_vals), 1)
    kappa = -slope
    if not np.isfinite(kappa) or kappa <= 1e-12:
        return float("inf")
    a = 2.0 - 2.0 * field.s
    M = vm.height
    x = kappa * M
    # int_M^inf t^{1-2s} exp(-kappa t) dt = kappa^(2s-2) Gamma(2-2s, kappa M)
    tail_integral = kappa ** (-a) * gammaincc(a, x) * gamma_fn(a)
    amplitude = float(np.exp(intercept))
    return amplitude * tail_integral


def _algebraic_tail(field: ExtensionField) -> float:
    vm = field.emesh.vertical
    grid = field.emesh.grid
    n = grid.dim
    s = field.s
    p = n + 2 * s - 2
    if p <= 0:
        return float("inf")
    trace_l1 = grid.node_volume * float(np.sum(np.abs(field.level(0))))
    return trace_l1 * vm.height ** (-p) / p


def vertical_integral(
    field: ExtensionField, tail_fraction: float = 0.01
) -> VerticalIntegralField:
    """Full weighted vertical integral with a truncation-tail check.

    Raises TailError when the extrapolated tail above the truncation height
    exceeds ``tail_fraction`` of the integral's sup norm (a constant field,
    whose weighted integral diverges, always trips this).
    """
    values = partial_vertical_integral(field, 0.0)
    tail = _empirical_tail(field)
    algebraic = _algebraic_tail(field)
    ref = float(np.max(np.abs(values)))
    if tail > tail_fraction * ref:
        raise TailError(
            f"estimated truncation tail {tail:.3g} exceeds {tail_fraction:.1%} "
            f"of the integral's sup norm {ref:.3g}"
        )
    return VerticalIntegralField(
        values=values, s=field.s, tail_bound=tail, algebraic_tail_bound=algebraic
    )


@dataclass
class DualityReport:
    bulk_residual: float
    trace: np.ndarray


def duality_transform(
    u1: ExtensionField,
    coeff: Coefficient,
    target_mesh: ExtensionMesh | None = None,
):
    """Map a solution of the dual-weight Neumann problem to the primal weight.

    ``u1`` must live on a mesh built for order 1 - s (weight exponent 2s-1).
    The vertical derivative is taken in flux form: per cell,
    ``(u1[j+1] - u1[j]) / int_cell t**(1-2s) dt`` is the exact weighted
    derivative of the scheme, and level values average the two adjacent cell
    fluxes (one-sided at the ends).  On the explicit power solution
    ``t**(2-2s)/(2-2s)`` this is exact.

    Returns the transformed field together with a report carrying its bulk
    residual in the primal-weight operator and its trace row.
    """
    s_dual = u1.s
    s = 1.0 - s_dual
    vm1 = u1.emesh.vertical
    if target_mesh is None:
        vm = build_vertical_mesh(s, vm1.height, vm1.num_levels, vm1.grading)
        target_mesh = build_extension_mesh(u1.emesh.grid, vm)
    else:
        if target_mesh.vertical.s != s or not np.allclose(
            target_mesh.vertical.levels, vm1.levels
        ):
            raise MeshMismatch("target mesh does not match the dual field's levels")
    cols = u1.as_columns()
    flux = (cols[:, 1:] - cols[:, :-1]) / vm1.cell_resistances()[None, :]
    J = vm1.num_levels
    u2 = np.empty_like(cols)
    u2[:, 0] = flux[:, 0]
    u2[:, J] = flux[:, -1]
    u2[:, 1:J] = 0.5 * (flux[:, :-1] + flux[:, 1:])
    out = ExtensionField(
        emesh=target_mesh, values=u2.ravel(), s=s,
        system=assemble_extension(target_mesh, coeff),
    )
    # bulk residual over the free interior rows, Jacobi-normalized so that
    # constants (zero-energy fields) still get a meaningful relative scale
    S = out.system.stiffness
    grid = target_mesh.grid
    free = np.zeros(target_mesh.num_nodes, dtype=bool)
    free_cols = free.reshape(grid.num_nodes, J + 1)
    free_cols[grid.active, 1:J] = True
    r = (S @ out.values)[free]
    d = S.diagonal()[free]
    scale = float(np.sum(S.diagonal() * out.values**2))
    resid = float(np.sqrt(np.sum(r**2 / d))) / max(np.sqrt(scale), 1e-300)
    return out, DualityReport(bulk_residual=resid, trace=u2[:, 0].copy())


@dataclass
class ResidualReport:
    """Weak residual of a tangential field against the nodal test basis."""

    normalized: float
    per_node: np.ndarray
    test_indices: np.ndarray
    field_norm: float


def verify_local_equation(
    v: np.ndarray,
    op: LocalOperator,
    rhs: np.ndarray,
    region: str = "omega",
) -> ResidualReport:
    """Check that v weakly solves the conductivity equation with source rhs.

    For each nodal hat ``phi_i`` in the region, the residual
    ``<a grad v, grad phi_i> - <rhs, phi_i>`` is normalized by the H1 norm
    of the hat; the summary value is the sup, further normalized by the H1
    norm of v.  ``region="omega"`` tests inside the interior region (the
    zero-source statement); ``region="active"`` tests over the whole box
    interior (the sourced statement).
    """
    grid = op.grid
    if region == "omega":
        test = np.flatnonzero(grid.omega_interior)
    elif region == "active":
        test = np.flatnonzero(grid.active)
    else:
        raise ParamError(f"unknown region {region!r}")
    vol = grid.node_volume
    r = (op.stiffness[test] @ v) - vol * np.asarray(rhs, dtype=float)[test]
    phi_h1 = np.sqrt(vol * (2.0 * np.sum(1.0 / grid.h**2) + 1.0))
    per_node = np.abs(r) / phi_h1
    ident = identity_coefficient(grid)
    K_I = assemble_local(grid, ident).stiffness
    v_norm = float(np.sqrt(v @ (K_I @ v) + vol * np.sum(v**2)))
    normalized = float(np.max(per_node)) / max(v_norm, 1e-300)
    return ResidualReport(
        normalized=normalized, per_node=per_node, test_indices=test, field_norm=v_norm
    )


@dataclass
class CauchyPair:
    """Boundary values and conormal flux of the bridged local solution."""

    boundary_values: np.ndarray
    boundary_flux: np.ndarray
    provenance: str = ""


class BridgePipeline:
    """Shared state for repeated runs of the full bridge at fixed geometry.

    Holds the assembled local operator, the factorized mixed extension
    solver and the vertical mesh; every per-datum operation (extension,
    vertical integral, Cauchy pair) reuses them.  All methods are pure in
    the data argument, so concurrent use on a built pipeline is safe.
    """

    def __init__(
        self,
        grid: TangentialGrid,
        coeff: Coefficient,
        s: float,
        levels: int = 64,
        height: float | None = None,
        grading: float | None = None,
        tail_fraction: float = 0.01,
    ):
        self.grid = grid
        self.coeff = coeff
        self.s = float(s)
        if height is None:
            height = default_height(grid)
        vm = build_vertical_mesh(s, height, levels, grading)
        self.emesh = build_extension_mesh(grid, vm)
        self.local_op = assemble_local(grid, coeff)
        self.solver = ExtensionSolver(self.emesh, coeff)
        self.tail_fraction = tail_fraction
        self.cs = analytic_cs(s)

    def extension(self, f: np.ndarray) -> ExtensionField:
        f = np.asarray(f, dtype=float)
        nz = np.flatnonzero(f)
        if nz.size and not np.all(self.grid.exterior[nz]):
            raise ParamError("data must be supported on the exterior region")
        return self.solver.solve(f)

    def vertical_field(self, f: np.ndarray) -> VerticalIntegralField:
        return vertical_integral(self.extension(f), self.tail_fraction)

    def bridge_solution(self, f: np.ndarray) -> np.ndarray:
        return self.vertical_field(f).values

    def cauchy_pair(self, f: np.ndarray, provenance: str = "") -> CauchyPair:
        v = self.bridge_solution(f)
        vals = v[self.grid.boundary_indices]
        flux = boundary_flux(self.local_op, v)
        return CauchyPair(boundary_values=vals, boundary_flux=flux,
                          provenance=provenance)


def operator_T(pipeline: BridgePipeline, f: np.ndarray) -> CauchyPair:
    """Cauchy-data operator: exterior datum -> (v, conormal flux of v) on the
    interior-region boundary.  Linear in f; (0, 0) at f = 0."""
    return pipeline.cauchy_pair(f, provenance="operator_T")


@dataclass
class DensityReport:
    """Least-squares distances from targets to nested spans of bridge traces.

    ``distances[t, k]`` is the distance (in the discrete H^{1/2} proxy norm)
    from target t to the span of the first k+1 traces; no rate is asserted.
    """

    distances: np.ndarray
    target_norms: np.ndarray
    singular_values: np.ndarray


def h_half_gram(grid: TangentialGrid) -> np.ndarray:
    """Discrete H^{1/2} proxy Gram on the boundary: <(I + DtN_I) g, g>.

    Built from the identity-coefficient boundary map, a first-order boundary
    operator, so the form is spectrally equivalent to the H^{1/2} pairing.
    """
    ident = identity_coefficient(grid)
    dtn = local_dtn_matrix(assemble_local(grid, ident))
    G = np.diag(dtn.weights) + dtn.schur()
    return 0.5 * (G + G.T)


def density_diagnostic(
    pipeline: BridgePipeline,
    targets,
    basis,
) -> DensityReport:
    """Distances from boundary targets to spans of bridged traces.

    ``basis`` is a list of exterior data arrays (must be linearly
    independent on the measurement nodes); ``targets`` is a list of arrays
    over the boundary nodes.  Warns with RankWarning when the traces are
    numerically rank deficient.
    """
    basis = list(basis)
    targets = list(targets)
    B = np.column_stack(
        [pipeline.cauchy_pair(f).boundary_values for f in basis]
    )
    G = h_half_gram(pipeline.grid)
    L = np.linalg.cholesky(G)
    Bw = L.T @ B
    sv = np.linalg.svd(Bw, compute_uv=False)
    if sv.size and sv.min() < 1e-10 * sv.max():
        warnings.warn(
            "bridge traces are numerically rank deficient", RankWarning
        )
    # progressive orthogonalization: residuals of the targets shrink as each
    # new direction is subtracted, so distances are nonincreasing in k by
    # construction even when the traces are nearly dependent
    R = np.column_stack([L.T @ np.asarray(g, dtype=float) for g in targets])
    norms = np.linalg.norm(R, axis=0)
    scale = np.linalg.norm(Bw, axis=0).max() if basis else 0.0
    dists = np.zeros((len(targets), len(basis)))
    Q: list[np.ndarray] = []
    for k in range(len(basis)):
        q = Bw[:, k].copy()
        for _ in range(2):  # one re-orthogonalization pass for stability
            for qq in Q:
                q -= qq * (qq @ q)
        nq = np.linalg.norm(q)
        if nq > 1e-13 * max(scale, 1e-300):
            q /= nq
            Q.append(q)
            R = R - np.outer(q, q @ R)
        dists[:, k] = np.linalg.norm(R, axis=0)
    return DensityReport(distances=dists, target_norms=norms, singular_values=sv)


@dataclass
class GapReport:
    """Operator-norm gaps between the measurement maps of two coefficients."""

    local_gap: float
    local_scale: float
    nonlocal_gap: float
    nonlocal_scale: float
    t_gap: float
    t_scale: float


def _weighted_specnorm(D: np.ndarray, w: np.ndarray) -> float:
    sw = np.sqrt(w)
    return float(np.max(np.abs(np.linalg.eigvalsh(sw[:, None] * D * (1 / sw)[None, :]))))


def distinguishability_experiment(
    grid: TangentialGrid,
    a1: Coefficient,
    a2: Coefficient,
    s: float,
    levels: int = 48,
    height: float | None = None,
    test_f: np.ndarray | None = None,
) -> GapReport:
    """Gaps between the local and nonlocal measurement maps of two
    coefficients, plus the discrepancy of the full bridge pipeline.

    A nonzero interior perturbation must show up in both maps; identical
    coefficients give gaps at rounding level.
    """
    from .fractional_core import nonlocal_dtn_matrix, spectral_power

    op1 = assemble_local(grid, a1)
    op2 = assemble_local(grid, a2)
    d1 = local_dtn_matrix(op1)
    d2 = local_dtn_matrix(op2)
    local_gap = _weighted_specnorm(d1.matrix - d2.matrix, d1.weights)
    local_scale = _weighted_specnorm(d1.matrix, d1.weights)

    n1 = nonlocal_dtn_matrix(spectral_power(op1, s))
    n2 = nonlocal_dtn_matrix(spectral_power(op2, s))
    sym1 = 0.5 * (n1.matrix + n1.matrix.T)
    sym2 = 0.5 * (n2.matrix + n2.matrix.T)
    nonlocal_gap = float(np.max(np.abs(np.linalg.eigvalsh(sym1 - sym2))))
    nonlocal_scale = float(np.max(np.abs(np.linalg.eigvalsh(sym1))))

    if test_f is None:
        from .coefficients import mollifier_bump

        widx = grid.w_indices
        center = grid.points[widx].mean(axis=0)
        width = 0.45 * float(
            np.max(np.ptp(grid.points[widx], axis=0)) or np.max(grid.h)
        )
        test_f = np.zeros(grid.num_nodes)
        test_f[widx] = mollifier_bump(grid.points[widx], center, width)
    p1 = BridgePipeline(grid, a1, s, levels=levels, height=height)
    p2 = BridgePipeline(grid, a2, s, levels=levels, height=height)
    c1 = p1.cauchy_pair(test_f)
    c2 = p2.cauchy_pair(test_f)
    wb = grid.boundary_weights()

    def pair_norm(c):
        return float(
            np.sqrt(
                np.sum(wb * c.boundary_values**2) + np.sum(wb * c.boundary_flux**2)
            )
        )

    diff = CauchyPair(
        boundary_values=c1.boundary_values - c2.boundary_values,
        boundary_flux=c1.boundary_flux - c2.boundary_flux,
    )
    return GapReport(
        local_gap=local_gap,
        local_scale=local_scale,
        nonlocal_gap=nonlocal_gap,
        nonlocal_scale=nonlocal_scale,
        t_gap=pair_norm(diff),
        t_scale=pair_norm(c1),
    )

"""Degenerate weighted extension solves and the weighted Neumann trace.

The bulk operator is ``div( t**(1-2s) diag(a(x'), 1) grad )`` on the tensor
mesh (box x graded levels).  Assembly is conservative:

* tangential part: the box stiffness of the conductivity operator, weighted
  per level by the exact hat-lumped measures ``int t**(1-2s) dt``;
* vertical part: two-point fluxes with exact resistances
  ``int t**(2s-1) dt`` per cell, so constants and the layer profile
  ``t**(2s) / (2s)`` are exact discrete solutions and the weight is never
  evaluated at t = 0.

The same assembly covers the dual weight exponent 2s-1: build the vertical
mesh with order 1-s.

Boundary conditions of the production solve: Dirichlet data on the exterior
trace nodes, homogeneous weighted Neumann on the closed interior region's
trace, homogeneous Dirichlet at the top (decay surrogate) and on the lateral
frame (matching the truncation of the spectral route).

Sign conventions.  The weak form gives, for the trace row of a solution,
``(S u)[i, 0] = -m_i * lim t**(1-2s) d_t u``;  the fractional operator of
the trace data is ``-c_s`` times that limit with
``c_s = 2**(2s-1) Gamma(s) / Gamma(1-s) > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .coefficients import Coefficient, identity_coefficient
from .errors import (
    CalibrationError,
    FitError,
    MeshMismatch,
    ParamError,
)
from .linsolve import Factorized
from .mesh import (
    ExtensionMesh,
    TangentialGrid,
    build_extension_mesh,
    build_tangential_grid,
    build_vertical_mesh,
    default_height,
    GeometrySpec,
)

__all__ = [
    "ExtensionSystem",
    "ExtensionField",
    "WeightedTrace",
    "CalibrationConstant",
    "assemble_extension",
    "solve_extension",
    "solve_weighted_neumann",
    "ExtensionSolver",
    "neumann_trace",
    "analytic_cs",
    "calibrate_cs",
    "extend_via_kernel",
    "poisson_kernel_constant",
    "decay_diagnostic",
    "DecayReport",
]


@dataclass
class ExtensionSystem:
    """Assembled weighted stiffness on an extension mesh."""

    emesh: ExtensionMesh
    coeff: Coefficient
    stiffness: sp.csr_matrix

    @property
    def s(self) -> float:
        return self.emesh.vertical.s


def assemble_extension(emesh: ExtensionMesh, coeff: Coefficient) -> ExtensionSystem:
    grid = emesh.grid
    vm = emesh.vertical
    if coeff.grid is not grid:
        raise MeshMismatch("coefficient was built for a different grid")
    J = vm.num_levels
    J1 = J + 1
    nu = vm.level_weights()
    cond = 1.0 / vm.cell_resistances()
    m = grid.node_volume

    from .local_elliptic import _assemble  # tangential stiffness, same stencil

    Ktan = _assemble(grid, coeff).tocoo()

    # tangential couplings replicated per level with weight nu_j
    lev = np.arange(J1)
    rows_t = (Ktan.row[:, None] * J1 + lev[None, :]).ravel()
    cols_t = (Ktan.col[:, None] * J1 + lev[None, :]).ravel()
    vals_t = (Ktan.data[:, None] * nu[None, :]).ravel()

    # vertical two-point couplings per tangential node
    i_tan = np.arange(grid.num_nodes)
    lo = (i_tan[:, None] * J1 + np.arange(J)[None, :]).ravel()
    hi = lo + 1
    c = np.tile(m * cond, grid.num_nodes)
    rows_v = np.concatenate([lo, hi, lo, hi])
    cols_v = np.concatenate([lo, hi, hi, lo])
    vals_v = np.concatenate([c, c, -c, -c])

    N = emesh.num_nodes
    S = sp.csr_matrix(
        (
            np.concatenate([vals_t, vals_v]),
            (np.concatenate([rows_t, rows_v]), np.concatenate([cols_t, cols_v])),
        ),
        shape=(N, N),
    )
    return ExtensionSystem(emesh=emesh, coeff=coeff, stiffness=S)


@dataclass
class ExtensionField:
    """Nodal values on an extension mesh, with the system that produced them."""

    emesh: ExtensionMesh
    values: np.ndarray
    s: float
    system: ExtensionSystem | None = None

    def level(self, j: int) -> np.ndarray:
        J1 = self.emesh.vertical.num_levels + 1
        return self.values.reshape(self.emesh.grid.num_nodes, J1)[:, j]

    def as_columns(self) -> np.ndarray:
        J1 = self.emesh.vertical.num_levels + 1
        return self.values.reshape(self.emesh.grid.num_nodes, J1)


def _fixed_layout(
    emesh: ExtensionMesh,
    dirichlet_trace: bool,
    top: str,
    lateral: str,
):
    """Boolean mask of constrained nodes for a boundary-condition layout."""
    grid = emesh.grid
    J = emesh.vertical.num_levels
    J1 = J + 1
    fixed = np.zeros(emesh.num_nodes, dtype=bool)
    cols = fixed.reshape(grid.num_nodes, J1)
    if top == "dirichlet":
        cols[:, J] = True
    elif top != "neumann":
        raise ParamError(f"unknown top condition {top!r}")
    if lateral == "dirichlet":
        frame = ~grid.active
        cols[frame, :] = True
    elif lateral != "natural":
        raise ParamError(f"unknown lateral condition {lateral!r}")
    if dirichlet_trace:
        cols[:, 0] = True
    else:
        cols[grid.exterior, 0] = True
    return fixed


class ExtensionSolver:
    """Factorized mixed-boundary-condition solver for repeated trace data.

    The factorization of the free-node block is built once; every call to
    ``solve`` only substitutes new Dirichlet trace values.
    """

    def __init__(
        self,
        emesh: ExtensionMesh,
        coeff: Coefficient,
        dirichlet_trace: bool = False,
        top: str = "dirichlet",
        lateral: str = "dirichlet",
    ):
        self.system = assemble_extension(emesh, coeff)
        self.emesh = emesh
        self.fixed = _fixed_layout(emesh, dirichlet_trace, top, lateral)
        self.free = ~self.fixed
        S = self.system.stiffness
        self._Sfc = S[self.free][:, self.fixed].tocsr()
        self._fact = Factorized(S[self.free][:, self.free])

    def solve(self, trace_data: np.ndarray) -> ExtensionField:
        """Solve with the given trace values at the constrained trace nodes.

        ``trace_data`` is a full tangential array; it is read wherever the
        trace row is constrained (exterior nodes in the mixed layout, all
        nodes in the all-Dirichlet diagnostic layout).
        """
        emesh = self.emesh
        grid = emesh.grid
        vals = np.zeros(emesh.num_nodes)
        tr = emesh.trace_indices()
        fixed_tr = tr[self.fixed[tr]]
        vals[fixed_tr] = np.asarray(trace_data, dtype=float)[self.fixed[tr]]
        u = vals.copy()
        u[self.free] = self._fact.solve(-(self._Sfc @ vals[self.fixed]))
        return ExtensionField(
            emesh=emesh, values=u, s=self.system.s, system=self.system
        )


def solve_extension(
    emesh: ExtensionMesh,
    coeff: Coefficient,
    s: float,
    f: np.ndarray,
    dirichlet_trace: bool = False,
    top: str = "dirichlet",
    lateral: str = "dirichlet",
) -> ExtensionField:
    """One-shot mixed solve; see ExtensionSolver for the reusable form.

    ``f`` is a full tangential array giving the Dirichlet trace data (it must
    vanish off the exterior region in the mixed layout).  Raises MeshMismatch
    when s differs from the order the mesh was graded for.
    """
    if s != emesh.vertical.s:
        raise MeshMismatch(
            f"mesh was built for order {emesh.vertical.s}, got s={s}"
        )
    f = np.asarray(f, dtype=float)
    if not dirichlet_trace:
        bad = np.flatnonzero(f)
        if bad.size and not np.all(emesh.grid.exterior[bad]):
            raise ParamError("trace data must be supported on the exterior region")
    solver = ExtensionSolver(
        emesh, coeff, dirichlet_trace=dirichlet_trace, top=top, lateral=lateral
    )
    return solver.solve(f)


def solve_weighted_neumann(
    emesh: ExtensionMesh,
    coeff: Coefficient,
    h: np.ndarray,
    top: str = "dirichlet",
    lateral: str = "dirichlet",
) -> ExtensionField:
    """Solve the bulk equation with weighted Neumann datum h on the whole trace.

    The trace row is free everywhere; the weak form puts ``-m_i h_i`` on the
    right-hand side of each trace row.  Used for the dual-weight problem
    feeding the duality transform: build ``emesh`` with order 1 - s to get
    the weight exponent 2s - 1.
    """
    system = assemble_extension(emesh, coeff)
    grid = emesh.grid
    J = emesh.vertical.num_levels
    fixed = np.zeros(emesh.num_nodes, dtype=bool)
    cols = fixed.reshape(grid.num_nodes, J + 1)
    if top == "dirichlet":
        cols[:, J] = True
    elif top != "neumann":
        raise ParamError(f"unknown top condition {top!r}")
    if lateral == "dirichlet":
        cols[~grid.active, :] = True
    elif lateral != "natural":
        raise ParamError(f"unknown lateral condition {lateral!r}")
    free = ~fixed
    b = np.zeros(emesh.num_nodes)
    b[emesh.trace_indices()] = -grid.node_volume * np.asarray(h, dtype=float)
    S = system.stiffness
    u = np.zeros(emesh.num_nodes)
    u[free] = Factorized(S[free][:, free]).solve(b[free])
    return ExtensionField(emesh=emesh, values=u, s=system.s, system=system)


@dataclass
class WeightedTrace:
    """Weighted normal trace ``lim t**(1-2s) d_t u`` on the tangential grid.

    ``values`` is the variational extraction (trace-row residual over the
    tangential quadrature weight); ``finite_quotient`` is the secondary
    estimator ``2s (u(., y_1) - u(., 0)) / y_1**(2s)``, exact on profiles
    ``c + b t**(2s)`` and reported for cross-checking.
    """

    values: np.ndarray
    finite_quotient: np.ndarray
    method: str = "variational"


def neumann_trace(field: ExtensionField) -> WeightedTrace:
    if field.system is None:
        raise ParamError("field carries no assembled system; solve or assemble first")
    emesh = field.emesh
    grid = emesh.grid
    s = field.s
    tr = emesh.trace_indices()
    residual = field.system.stiffness[tr] @ field.values
    values = -residual / grid.node_volume
    cols = field.as_columns()
    y1 = emesh.vertical.levels[1]
    fq = 2 * s * (cols[:, 1] - cols[:, 0]) / y1 ** (2 * s)
    return WeightedTrace(values=values, finite_quotient=fq)


def analytic_cs(s: float) -> float:
    """Normalization constant relating the weighted trace to the fractional
    operator: (-L)^s u = -c_s lim t**(1-2s) d_t u, with c_{1/2} = 1."""
    return 2.0 ** (2 * s - 1) * math.gamma(s) / math.gamma(1 - s)


@dataclass
class CalibrationConstant:
    """Pinned trace-normalization constant with its fit diagnostics."""

    value: float
    s: float
    fitted: float
    rel_gap: float

    def __post_init__(self):
        if self.value <= 0:
            raise CalibrationError("normalization constant must be positive")


def _standard_geometry(dim: int, nodes: int) -> GeometrySpec:
    omega = tuple((0.0, 1.0) for _ in range(dim))
    w = ((1.5, 2.1),) + tuple((0.0, 1.0) for _ in range(dim - 1))
    return GeometrySpec(dim=dim, omega_box=omega, w_box=w, nodes=nodes, padding=0.9)


def calibrate_cs(
    dim: int,
    s: float,
    nodes: int = 64,
    levels: int = 64,
    height: float | None = None,
    grading: float | None = None,
    num_samples: int = 3,
    seed: int = 7,
    grid: TangentialGrid | None = None,
) -> CalibrationConstant:
    """Fit the trace normalization against the spectral route (a = Id).

    Solves the exterior-value problem spectrally and through the extension
    for a few seeded random data on the measurement region, then fits c in
    ``c * (-trace) ~ spectral values`` by least squares over the region.
    The analytic candidate is returned; a fitted drift beyond 20% raises
    CalibrationError (that always means a sign or convention bug, not noise).
    """
    from .fractional_core import spectral_power
    from .local_elliptic import assemble_local

    if grid is None:
        grid = build_tangential_grid(_standard_geometry(dim, nodes))
    coeff = identity_coefficient(grid)
    op = assemble_local(grid, coeff)
    P = spectral_power(op, s)
    if height is None:
        height = default_height(grid)
    vm = build_vertical_mesh(s, height, levels, grading)
    emesh = build_extension_mesh(grid, vm)
    solver = ExtensionSolver(emesh, coeff)
    rng = np.random.default_rng(seed)
    widx = grid.w_indices
    num = 0.0
    den = 0.0
    for _ in range(num_samples):
        f = np.zeros(grid.num_nodes)
        f[widx] = rng.standard_normal(len(widx))
        from .fractional_core import solve_fractional_dirichlet

        u = solve_fractional_dirichlet(P, f)
        oracle = P.apply(u)[widx]
        tr = neumann_trace(solver.solve(f)).values[widx]
        num += float(np.dot(-tr, oracle))
        den += float(np.dot(tr, tr))
    fitted = num / den
    cs = analytic_cs(s)
    rel_gap = abs(fitted - cs) / cs
    if rel_gap > 0.20:
        raise CalibrationError(
            f"fitted constant {fitted:.4g} drifts {rel_gap:.1%} from the "
            f"analytic candidate {cs:.4g}; check sign conventions or the mesh"
        )
    return CalibrationConstant(value=cs, s=s, fitted=fitted, rel_gap=rel_gap)


def poisson_kernel_constant(dim: int, s: float) -> float:
    """Constant making ``C y**(2s) / (|x|^2 + y^2)**(n/2+s)`` a unit-mass kernel."""
    return math.gamma(dim / 2 + s) / (math.pi ** (dim / 2) * math.gamma(s))


def extend_via_kernel(
    grid: TangentialGrid,
    u: np.ndarray,
    s: float,
    y: float,
    normalize: str = "analytic",
    points: np.ndarray | None = None,
) -> np.ndarray:
    """Constant-coefficient extension at height y by kernel quadrature.

    The heat-kernel time integral collapses in closed form to the kernel
    ``C y**(2s) / (|x - z|^2 + y^2)**(n/2 + s)`` whose analytic constant
    preserves constants in the continuum.  ``normalize="mass"`` instead
    rescales each quadrature row to unit discrete mass, preserving constants
    on the finite grid exactly (diagnostic use).

    ``points`` optionally evaluates off-grid; default is the grid's nodes.
    """
    if y <= 0:
        raise ParamError(f"height must be positive, got {y}")
    u = np.asarray(u, dtype=float)
    src = np.flatnonzero(u)
    pts = grid.points if points is None else np.atleast_2d(points)
    n = grid.dim
    vol = grid.node_volume
    C = poisson_kernel_constant(n, s)
    if src.size == 0:
        out = np.zeros(len(pts))
        if normalize == "mass":
            return out
        return out
    zs = grid.points[src]
    d2 = np.sum((pts[:, None, :] - zs[None, :, :]) ** 2, axis=2)
    ker = C * y ** (2 * s) / (d2 + y**2) ** (n / 2 + s)
    if normalize == "mass":
        # unit discrete mass against the whole grid, not just the support
        d2_all = np.sum((pts[:, None, :] - grid.points[None, :, :]) ** 2, axis=2)
        mass = vol * np.sum(
            C * y ** (2 * s) / (d2_all + y**2) ** (n / 2 + s), axis=1
        )
        return (ker @ u[src]) * vol / mass
    if normalize != "analytic":
        raise ParamError(f"unknown normalization {normalize!r}")
    return (ker @ u[src]) * vol


def _kernel_gradient_sup(grid, u, s, y, pts) -> float:
    """sup over pts of |grad_x of the kernel extension| (analytic gradient)."""
    n = grid.dim
    src = np.flatnonzero(u)
    zs = grid.points[src]
    C = poisson_kernel_constant(n, s)
    diff = pts[:, None, :] - zs[None, :, :]
    d2 = np.sum(diff**2, axis=2)
    base = (d2 + y**2) ** (n / 2 + s + 1)
    gk = -(n + 2 * s) * C * y ** (2 * s) * diff / base[:, :, None]
    grads = np.tensordot(gk, u[src], axes=([1], [0])) * grid.node_volume
    return float(np.max(np.linalg.norm(grads, axis=1)))


@dataclass
class DecayReport:
    """Fitted versus predicted large-height decay slopes (log-log)."""

    heights: np.ndarray
    sup_values: np.ndarray
    grad_values: np.ndarray
    l2_values: np.ndarray
    sup_slope: float
    grad_slope: float
    l2_slope: float
    predicted: dict = field(default_factory=dict)


def _fit_slope(x: np.ndarray, v: np.ndarray) -> float:
    return float(np.polyfit(np.log(x), np.log(v), 1)[0])


def decay_diagnostic(
    grid: TangentialGrid,
    u: np.ndarray,
    s: float,
    heights,
    l2_extent: float = 24.0,
    l2_points: int = 161,
) -> DecayReport:
    """Measure the vertical decay of the constant-coefficient extension.

    Fits log-log slopes of the sup norm, the sup gradient norm, and the L2
    norm of the extension against the height.  Predictions (for compactly
    supported data in L1): sup ~ y**(-n), gradient ~ y**(-n-1), and for the
    L2 norm the Young-inequality exponent n/p - n with p = 2, i.e. y**(-n/2).
    """
    heights = np.asarray(sorted(heights), dtype=float)
    u = np.asarray(u, dtype=float)
    src = np.flatnonzero(u)
    if src.size == 0:
        raise ParamError("data field is identically zero")
    pts_src = grid.points[src]
    diam = float(
        np.max(np.linalg.norm(pts_src[:, None, :] - pts_src[None, :, :], axis=2))
    )
    diam = max(diam, float(np.max(grid.h)))
    if len(heights) < 4:
        raise FitError("need at least 4 heights for a slope fit")
    if heights[0] < diam:
        raise FitError(
            f"smallest height {heights[0]:.3g} is below the data diameter "
            f"{diam:.3g}"
        )
    if heights[-1] / heights[0] < 10.0**1.5 * (1 - 1e-9):
        raise FitError("heights must span at least 1.5 decades")

    centroid = pts_src.mean(axis=0)
    n = grid.dim
    # at large heights the extension varies on the tangential scale y, so the
    # sup (of the field and of its gradient) is probed on a cloud of points
    # whose offsets from the data centroid scale with the height
    cloud_axes = [np.linspace(-2.0, 2.0, 9) for _ in range(n)]
    cmesh = np.meshgrid(*cloud_axes, indexing="ij")
    cloud = np.stack([m.ravel() for m in cmesh], axis=1)

    axes = [np.linspace(-l2_extent, l2_extent, l2_points) for _ in range(n)]
    wmesh = np.meshgrid(*axes, indexing="ij")
    wpts = np.stack([m.ravel() for m in wmesh], axis=1)
    dw = np.prod([ax[1] - ax[0] for ax in axes])

    sup_vals, grad_vals, l2_vals = [], [], []
    for y in heights:
        pts = centroid + y * cloud
        vals = extend_via_kernel(grid, u, s, y, points=pts)
        sup_vals.append(float(np.max(np.abs(vals))))
        grad_vals.append(_kernel_gradient_sup(grid, u, s, y, pts))
        scaled = extend_via_kernel(grid, u, s, y, points=centroid + y * wpts)
        l2_vals.append(float(np.sqrt(y**n * np.sum(scaled**2) * dw)))
    sup_vals = np.array(sup_vals)
    grad_vals = np.array(grad_vals)
    l2_vals = np.array(l2_vals)
    return DecayReport(
        heights=heights,
        sup_values=sup_vals,
        grad_values=grad_vals,
        l2_values=l2_vals,
        sup_slope=_fit_slope(heights, sup_vals),
        grad_slope=_fit_slope(heights, grad_vals),
        l2_slope=_fit_slope(heights, l2_vals),
        predicted={"sup": -n, "grad": -(n + 1), "l2": -n / 2},
    )

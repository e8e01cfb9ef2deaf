"""Smoke coverage for the third tangential dimension.

The solvers are dimension generic; these checks pin the n = 3 geometry and
operators at a resolution where everything stays exact.  The full 3+1
dimensional extension solve is exercised only through its stencil (the
factorization cost grows steeply with dimension and belongs in experiment
scripts, not the routine suite).
"""

import numpy as np

import calderon as cd
from calderon.extension import ExtensionField, assemble_extension

from conftest import make_grid


def test_masks_and_weights():
    grid = make_grid(dim=3, nodes=14)
    total = (grid.omega_interior.astype(int) + grid.omega_boundary.astype(int)
             + grid.exterior.astype(int))
    assert np.all(total == 1)
    assert grid.w_mask.sum() > 0
    w = grid.boundary_weights()
    assert np.all(w > 0)
    # dual patches tile the region surface exactly
    a, b, c = (grid.axes[k][grid.omega_idx[k][1]] - grid.axes[k][grid.omega_idx[k][0]]
               for k in range(3))
    np.testing.assert_allclose(w.sum(), 2 * (a * b + a * c + b * c), rtol=1e-12)


def test_linear_solution_exact():
    grid = make_grid(dim=3, nodes=14)
    op = cd.assemble_local(grid, cd.identity_coefficient(grid))
    g = grid.points[:, 0].copy()
    v = cd.solve_local_dirichlet(op, g)
    cl = grid.omega_closure
    assert np.max(np.abs(v[cl] - g[cl])) < 1e-12
    assert np.max(np.abs(cd.local_dtn(op, np.ones(grid.num_nodes)))) < 1e-12


def test_extension_stencil_power_profile_exact():
    grid = make_grid(dim=3, nodes=14)
    a = cd.identity_coefficient(grid)
    s = 0.5
    vm = cd.build_vertical_mesh(s, 4.0, 8)
    em = cd.build_extension_mesh(grid, vm)
    cols = np.tile(vm.levels ** (2 * s) / (2 * s), (grid.num_nodes, 1))
    fld = ExtensionField(emesh=em, values=cols.ravel(), s=s,
                         system=assemble_extension(em, a))
    r = (fld.system.stiffness @ fld.values).reshape(grid.num_nodes, -1)[:, 1:-1]
    scale = np.abs(fld.system.stiffness.diagonal()).max() * np.abs(fld.values).max()
    assert np.max(np.abs(r)) < 1e-12 * scale
    tr = cd.neumann_trace(fld)
    assert np.max(np.abs(tr.values - 1.0)) < 1e-10

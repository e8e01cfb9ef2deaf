#!/usr/bin/env python3
"""Accuracy sweep of the extension route against the spectral oracle.

Tabulates the relative L2 error on the measurement region between the
calibrated weighted Neumann trace and the spectral fractional operator, over
orders s and resolutions (N, J), writing a CSV for plotting.

Usage: python scripts/trace_accuracy_sweep.py [--out sweep.csv]
"""

import argparse

import numpy as np

import calderon as cd
from calderon.experiments import write_csv
from pathlib import Path


def error_at(s: float, nodes: int, levels: int) -> float:
    spec = cd.GeometrySpec(dim=1, omega_box=((0.0, 1.0),),
                           w_box=((1.5, 2.1),), nodes=nodes, padding=0.9)
    grid = cd.build_tangential_grid(spec)
    a = cd.identity_coefficient(grid)
    pipe = cd.BridgePipeline(grid, a, s, levels=levels)
    P = cd.spectral_power(pipe.local_op, s)
    widx = grid.w_indices
    f = np.zeros(grid.num_nodes)
    wpts = grid.points[widx]
    f[widx] = cd.mollifier_bump(wpts, wpts.mean(axis=0), 0.27)
    u = cd.solve_fractional_dirichlet(P, f)
    oracle = P.apply(u)
    tr = cd.neumann_trace(pipe.extension(f)).values
    return float(np.linalg.norm((-pipe.cs * tr - oracle)[widx])
                 / np.linalg.norm(oracle[widx]))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="trace_accuracy_sweep.csv")
    args = parser.parse_args()
    rows = []
    for s in (0.25, 0.5, 0.75):
        for nodes, levels in ((33, 32), (64, 64), (127, 128), (253, 256)):
            err = error_at(s, nodes, levels)
            rows.append([s, nodes, levels, err])
            print(f"s={s}  N={nodes:4d}  J={levels:4d}  rel err {err:.3e}")
    write_csv(Path(args.out), ["s", "nodes", "levels", "rel_error"], rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

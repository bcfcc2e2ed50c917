"""Singular values of the subdomain forward map across resolutions and observation sizes."""

from __future__ import annotations

import numpy as np

from fracsrc.fractional_calculus import GridFunction, TemporalGrid
from fracsrc.inverse_solver import build_forward_map_f, injectivity_report
from fracsrc.spectral_operator import OperatorSpec, Subdomain, assemble, eigendecompose

ALPHA = 0.5


def main() -> None:
    print("n_steps,n_interior,fraction,sigma_max,sigma_min,condition,rank")
    for n_t, n_x in ((26, 24), (51, 49), (101, 99), (201, 199)):
        spec = OperatorSpec(1.0, n_x)
        e = eigendecompose(assemble(spec))
        grid = TemporalGrid(1.0, n_t)
        g = GridFunction(grid, grid.nodes.copy())
        for frac in (0.1, 0.25, 0.5, 1.0):
            rep = injectivity_report(build_forward_map_f(e, g, ALPHA, Subdomain.central(n_x, frac), grid))
            print(f"{n_t},{n_x},{frac:g},{rep.sigma_max:.3e},{rep.sigma_min:.3e},{rep.condition:.3e},{rep.rank}")


if __name__ == "__main__":
    main()

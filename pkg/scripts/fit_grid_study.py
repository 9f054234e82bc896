"""Sensitivity of the phi^4 one-loop log counterterm to the eps grid and the
nuisance terms of the singular fit.

    python scripts/fit_grid_study.py
"""

import math

from rgflow.fitting import DEFAULT_REGULAR, eps_grid
from rgflow.flow import counterterm_log, scalar_theory
from rgflow.schwinger import KernelSpec

REFERENCE = -1 / (256 * math.pi**2)


def main():
    F, dim = scalar_theory("phi4")
    print(f"{'points':>6} {'decades':>7} {'top':>7} {'nuisance':>8} {'monomial':>16} {'rel err':>9}")
    for points, decades, top in [(12, 2.0, 1e-3), (8, 2.0, 1e-3), (24, 2.0, 1e-3), (12, 1.0, 1e-3), (12, 3.0, 1e-2)]:
        grid = eps_grid(1.0, points=points, decades=decades, top=top)
        for regular in ((), DEFAULT_REGULAR):
            ct = counterterm_log(F, KernelSpec(dim), grid=grid, regular=regular)
            v = ct.log.monomial(1, 4)
            print(f"{points:>6} {decades:>7.1f} {top:>7.0e} {len(regular):>8} {v:>16.9e} {abs(v / REFERENCE - 1):>9.1e}")


if __name__ == "__main__":
    main()

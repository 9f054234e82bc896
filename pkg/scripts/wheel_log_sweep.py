"""Fitted ``log eps`` coefficients of one-loop wheels against the closed form.  The six-dimensional tadpole diverges like ``1/eps^2``, which
lies outside the fit basis, so its rows are reported with ``valid=False``.

For each (dimension, cycle length, mass) the weight is sampled on the default
eps grid, fitted, and compared with :func:`rgflow.flow.wheel_log_coefficient`.

    python scripts/wheel_log_sweep.py [--masses 0,0.5,1,2]
"""

import argparse

from rgflow.fitting import DEFAULT_REGULAR, eps_grid, singular_fit
from rgflow.flow import wheel_log_coefficient
from rgflow.graphs import wheel
from rgflow.schwinger import KernelSpec, schwinger_weight

CASES = [(4, 1), (4, 2), (6, 1), (6, 2), (6, 3)]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--masses", default="0,0.5,1,2")
    args = p.parse_args()
    masses = [float(m) for m in args.masses.split(",")]
    grid = eps_grid(1.0)
    print(f"{'n':>2} {'k':>2} {'m':>5} {'fitted':>16} {'closed form':>16} {'rel err':>9} valid")
    for n, k in CASES:
        g = wheel(k, 1) if k > 1 else wheel(1, 0)
        for m in masses:
            vals = [schwinger_weight(g, KernelSpec(n, m, e, 1.0)).value for e in grid]
            fit = singular_fit(vals, grid, regular=DEFAULT_REGULAR, ir_scale=1.0)
            exact = float(wheel_log_coefficient(n, k, m))
            err = abs(fit.coeff_log_eps - exact) / abs(exact) if exact else abs(fit.coeff_log_eps)
            print(f"{n:>2} {k:>2} {m:>5.2f} {fit.coeff_log_eps:>16.9e} {exact:>16.9e} {err:>9.1e} {fit.valid}")


if __name__ == "__main__":
    main()

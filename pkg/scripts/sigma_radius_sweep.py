"""Sigma-model beta tensor on spheres and hyperbolic planes of varying radius.

Prints ``r * r * tr(h^-1 beta)`` which is ``-2 sign / (12 pi)`` for every
radius and chart point.

    python scripts/sigma_radius_sweep.py [--radii 0.25,0.5,1,2,4]
"""

import argparse
import math

import numpy as np

from rgflow.geometry import hyperbolic, sphere
from rgflow.sigma import sigma_beta


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--radii", default="0.25,0.5,1,2,4")
    args = p.parse_args()
    print("family,r,x0,x1,scaled_trace,expected")
    for name, make, sign in (("sphere", sphere, 1), ("hyperbolic", hyperbolic, -1)):
        for r in (float(v) for v in args.radii.split(",")):
            chart = make(r)
            for x in ([0.0, 0.0], [0.3 * r, -0.2 * r]):
                b = sigma_beta(chart, x)
                tr = float(np.trace(np.linalg.inv(chart(x)) @ b.tensor))
                print(f"{name},{r},{x[0]},{x[1]},{tr * r * r!r},{-2 * sign / (12 * math.pi)!r}")


if __name__ == "__main__":
    main()

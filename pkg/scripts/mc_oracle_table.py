"""Position-space Monte-Carlo estimates against the Symanzik weight.

    python scripts/mc_oracle_table.py [--samples 200000] [--seeds 5]
"""

import argparse

import numpy as np

from rgflow.graphs import single_edge, theta, wheel
from rgflow.schwinger import KernelSpec, gaussian_graph_weight, mc_position_oracle


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seeds", type=int, default=5)
    args = p.parse_args()
    graphs = {"edge": single_edge(), "wheel2": wheel(2), "wheel3": wheel(3), "theta": theta()}
    print(f"{'graph':>7} {'n':>2} {'exact':>14} {'mean z':>8} {'max |z|':>8}")
    for name, g in graphs.items():
        lengths = np.linspace(0.5, 1.5, g.n_edges) if g.n_edges else np.ones(0)
        for n in (2, 4, 6):
            spec = KernelSpec(n)
            exact = float(gaussian_graph_weight(g, spec, lengths))
            zs = []
            for seed in range(args.seeds):
                mc = mc_position_oracle(g, spec, lengths, args.samples, seed=seed)
                zs.append(0.0 if mc.error_estimate == 0 else (mc.value - exact) / mc.error_estimate)
            print(f"{name:>7} {n:>2} {exact:>14.6e} {np.mean(zs):>8.2f} {np.max(np.abs(zs)):>8.2f}")


if __name__ == "__main__":
    main()

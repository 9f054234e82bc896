"""Command line front end: ``rgflow graphs | beta | sweep | weight | obstruction``.

Exit codes: 0 success, 1 numerical failure (fit or quadrature), 2 usage error.
JSON documents carry ``"schema": "rgflow/1"``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fitting import FitError, eps_grid, singular_fit, DEFAULT_REGULAR
from .flow import (
    FlowError,
    FunctionalSeries,
    ScaleVarianceError,
    beta_one_loop,
    load_theory,
    scalar_theory,
    symbolic_beta,
)
from .geometry import GeometryError, curvature_at, parse_metric
from .graphs import (
    GraphError,
    classify,
    enumerate_connected,
    graph_from_json,
    graph_to_json,
    single_edge,
    tadpole,
    theta,
    wheel,
)
from .schwinger import KernelSpec, QuadratureError, mc_position_oracle, schwinger_weight
from .sigma import (
    OBSTRUCTION_SYMBOLIC,
    SIGMA_SYMBOLIC,
    beta_field_csv,
    obstruction_constant,
    sigma_beta,
)

SCHEMA = "rgflow/1"


class UsageError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    """Raised after the output has been written, to set exit code 1."""


# -- argument types -----------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _point_list(text: str) -> list[list[float]]:
    return [_float_list(p) for p in text.split(";") if p.strip()]


def parse_graph(text: str):
    """``edge``, ``tadpole``, ``theta``, ``wheel:K[,tails=T]`` or ``json:FILE``."""
    name, _, rest = text.partition(":")
    try:
        if name == "edge":
            return single_edge()
        if name == "tadpole":
            return tadpole()
        if name == "theta":
            return theta()
        if name == "wheel":
            parts = rest.split(",")
            k = int(parts[0])
            tails = 0
            for p in parts[1:]:
                key, _, val = p.partition("=")
                if key != "tails":
                    raise UsageError(f"unknown wheel option {key!r}")
                tails = int(val)
            return wheel(k, tails)
        if name == "json":
            return graph_from_json(json.loads(Path(rest).read_text()))
    except (ValueError, OSError) as exc:
        raise UsageError(f"bad graph {text!r}: {exc}") from exc
    raise UsageError(f"unknown graph {text!r}")


# -- parser ---------------------------------------------------------------------


def _kernel_flags(p, dim=None):
    p.add_argument("--dim", type=int, default=dim, help="spacetime dimension n")
    p.add_argument("--mass", type=float, default=0.0)
    p.add_argument("--uv", type=float, default=1e-3, help="UV cutoff eps")
    p.add_argument("--ir", type=float, default=1.0, help="IR scale L")


def _grid_flags(p):
    p.add_argument("--points", type=int, default=12)
    p.add_argument("--decades", type=float, default=2.0)
    p.add_argument("--top", type=float, default=1e-3, help="largest eps as a fraction of L")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (env RGFLOW_THREADS wins)")
    common.add_argument("--seed", type=int, default=0, help="seed for Monte-Carlo estimates")
    common.add_argument("--config", type=Path, default=None, help="TOML file with flag values")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    parser = argparse.ArgumentParser(prog="rgflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    leaves = {}

    p = sub.add_parser("graphs", parents=[common], help="enumerate connected graph classes")
    p.add_argument("--max-vertices", type=int, default=2)
    p.add_argument("--genus", type=int, default=1)
    p.add_argument("--valency", type=_int_list, default=[3])
    p.set_defaults(func=cmd_graphs)
    leaves[("graphs",)] = p

    beta = sub.add_parser("beta", help="one-loop beta functionals")
    bsub = beta.add_subparsers(dest="target", required=True)
    p = bsub.add_parser("scalar", parents=[common], help="scalar theory beta functional")
    p.add_argument("--theory", default="phi4", help="phi3 or phi4")
    p.add_argument("--theory-file", type=Path, default=None, help="TOML/JSON theory definition")
    p.add_argument("--c", type=float, default=1.0, help="coupling of the named theory")
    _kernel_flags(p)
    p.add_argument("--max-vertices", type=int, default=4)
    p.add_argument("--normalization", choices=("paper", "constant-field"), default="paper")
    p.add_argument("--restrict", action="store_true", help="restrict to the log-divergent subspace")
    p.set_defaults(func=cmd_beta_scalar)
    leaves[("beta", "scalar")] = p

    p = bsub.add_parser("sigma", parents=[common], help="sigma-model beta tensor at a point")
    p.add_argument("--metric", default="flat")
    p.add_argument("--point", type=_float_list, default=None)
    p.add_argument("--geometry", choices=("auto", "analytic", "fd"), default="auto")
    p.set_defaults(func=cmd_beta_sigma)
    leaves[("beta", "sigma")] = p

    sweep = sub.add_parser("sweep", help="CSV sweeps")
    ssub = sweep.add_subparsers(dest="target", required=True)
    p = ssub.add_parser("eps", parents=[common], help="graph weight over an eps grid")
    p.add_argument("--graph", default="wheel:3")
    _kernel_flags(p, dim=6)
    _grid_flags(p)
    p.add_argument("--normalization", choices=("paper", "constant-field"), default="constant-field")
    p.set_defaults(func=cmd_sweep_eps)
    leaves[("sweep", "eps")] = p

    p = ssub.add_parser("beta", parents=[common], help="sigma-model beta tensor over points or radii")
    p.add_argument("--metric", default="sphere:r=1")
    p.add_argument("--points", type=_point_list, default=None, help="'x,y;x,y;...'")
    p.add_argument("--radii", type=_float_list, default=None, help="sweep the radius r of the family")
    p.add_argument("--point", type=_float_list, default=None, help="point used with --radii")
    p.add_argument("--geometry", choices=("auto", "analytic", "fd"), default="auto")
    p.set_defaults(func=cmd_sweep_beta)
    leaves[("sweep", "beta")] = p

    p = sub.add_parser("weight", parents=[common], help="Schwinger weight of one graph")
    p.add_argument("--graph", default="wheel:3")
    _kernel_flags(p, dim=6)
    p.add_argument("--lengths", type=_float_list, default=None, help="fixed lengths: Gaussian weight")
    p.add_argument("--mc-samples", type=int, default=0, help="also run the Monte-Carlo oracle")
    p.add_argument("--normalization", choices=("paper", "constant-field"), default="constant-field")
    p.set_defaults(func=cmd_weight)
    leaves[("weight",)] = p

    p = sub.add_parser("obstruction", parents=[common], help="finite part of the obstruction pairing")
    p.add_argument("--ir", type=float, default=1.0)
    p.set_defaults(func=cmd_obstruction)
    leaves[("obstruction",)] = p
    return parser, leaves


def _leaf_key(args) -> tuple:
    return tuple(x for x in (args.command, getattr(args, "target", None)) if x)


def _apply_config(args, leaf: argparse.ArgumentParser) -> None:
    """Values from ``--config`` fill every flag left at its default."""
    if args.config is None:
        return
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        cfg = tomllib.loads(args.config.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    known = {a.dest: a for a in leaf._actions}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "help", "func"):
            raise UsageError(f"unknown config key {key!r} for {' '.join(_leaf_key(args))}")
        if getattr(args, dest) != leaf.get_default(dest):
            continue
        action = known[dest]
        if isinstance(value, str) and action.type is not None:
            try:
                value = action.type(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from exc
        elif isinstance(value, list) and action.type in (_int_list, _float_list, _point_list):
            cast = int if action.type is _int_list else float
            try:
                if action.type is _point_list:
                    value = [[float(x) for x in row] for row in value]
                else:
                    value = [cast(v) for v in value]
            except (TypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from exc
        setattr(args, dest, value)


def _threads(args) -> int:
    env = os.environ.get("RGFLOW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"RGFLOW_THREADS must be an integer, got {env!r}") from None
    else:
        n = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if n < 1:
        raise UsageError("thread count must be positive")
    return n


def _run_config(args) -> dict:
    skip = {"func", "config"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _dump(doc: dict) -> str:
    return json.dumps({"schema": SCHEMA, **doc}, sort_keys=True)


def _kernel(args) -> KernelSpec:
    if args.dim is None or args.dim < 1:
        raise UsageError("--dim must be a positive integer")
    try:
        return KernelSpec(args.dim, args.mass, args.uv, args.ir)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- commands -------------------------------------------------------------------


def cmd_graphs(args, out) -> None:
    if args.max_vertices < 0 or args.genus < 0:
        raise UsageError("--max-vertices and --genus must be non-negative")
    classes = [] if args.max_vertices == 0 else enumerate_connected(args.max_vertices, args.genus, args.valency)
    rows = [
        {
            "graph": graph_to_json(c.canonical_form),
            "genus": c.genus,
            "n_vertices": c.n_vertices,
            "n_tails": c.n_tails,
            "aut_order": c.aut_order,
            "full_aut_order": c.full_aut_order,
        }
        for c in classes
    ]
    if args.format == "json":
        out.write(_dump({"command": "graphs", "classes": rows, "config": _run_config(args)}) + "\n")
    else:
        for r in rows:
            out.write(_dump(r) + "\n")


def _theory(args) -> tuple[FunctionalSeries, int, float]:
    if args.theory_file is not None:
        try:
            text = args.theory_file.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {args.theory_file}: {exc}") from exc
        if args.theory_file.suffix == ".toml":
            try:
                import tomllib  # type: ignore[import-not-found]
            except ModuleNotFoundError:
                import tomli as tomllib
            obj = tomllib.loads(text)
        else:
            obj = json.loads(text)
        F, dim, mass = load_theory(obj)
        return F, dim, mass
    try:
        F, dim = scalar_theory(args.theory, args.c)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    if args.dim is not None and args.dim != dim:
        raise UsageError(f"theory {args.theory} lives on R^{dim}, got --dim {args.dim}")
    return F, dim, args.mass


def cmd_beta_scalar(args, out) -> None:
    F, dim, mass = _theory(args)
    try:
        spec = KernelSpec(dim, mass, args.uv, args.ir)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    res = beta_one_loop(
        F, spec, args.max_vertices, restrict=args.restrict,
        normalization=args.normalization, threads=_threads(args),
    )
    sym = symbolic_beta(F, dim, args.max_vertices, mass=mass, restrict=args.restrict, normalization=args.normalization)
    coeffs = {}
    failed = []
    for (g, k), value in res.coefficients.items():
        fit = res.counterterms.fits.get((g, k))
        if fit is not None and not fit.valid:
            failed.append(f"{g},{k}")
        coeffs[f"{g},{k}"] = {
            "coupling": value,
            "monomial": res.monomial(g, k),
            "monomial_symbolic": str(sym[(g, k)]),
            "monomial_exact": float(sym[(g, k)]),
            "fit": None if fit is None else fit.to_dict(),
        }
    ct = {
        f"{g},{k}": {**f.to_dict(), "monomial_log": f.coeff_log_eps / math.factorial(k)}
        for (g, k), f in res.counterterms.fits.items()
    }
    doc = {
        "command": "beta scalar",
        "dimension": dim,
        "mass": mass,
        "theory": F.to_dict(),
        "coefficients": coeffs,
        "counterterms": ct,
        "metadata": res.metadata(),
        "tolerances": {"fit_residual": 1e-8, "grid": list(res.counterterms.grid)},
        "status": "fit-failed" if failed else "ok",
        "config": _run_config(args),
    }
    out.write(_dump(doc) + "\n")
    if failed:
        raise NumericalFailure(f"invalid singular fit for couplings {failed}")


def _point(chart, point):
    if point is None:
        lo, hi = np.asarray(chart.lower), np.asarray(chart.upper)
        point = list(0.5 * (lo + hi)) if chart.family.startswith("torus") else [0.0] * chart.dim
    if len(point) != chart.dim:
        raise UsageError(f"--point needs {chart.dim} coordinates")
    return point


def cmd_beta_sigma(args, out) -> None:
    chart = parse_metric(args.metric)
    point = _point(chart, args.point)
    b = sigma_beta(chart, point, method=args.geometry)
    curv = curvature_at(chart, point, method=b.metadata["geometry"])
    doc = {
        "command": "beta sigma",
        "metric": args.metric,
        "point": b.point,
        "tensor": b.tensor.tolist(),
        "ricci": curv.ricci.tolist(),
        "coefficient": -1 / (12 * math.pi),
        "coefficient_symbolic": SIGMA_SYMBOLIC,
        "metadata": {"scheme": b.scheme_tag, **b.metadata},
        "tolerances": {"analytic": 1e-6, "fd": 1e-4},
        "config": _run_config(args),
    }
    if args.format == "csv":
        out.write(beta_field_csv([b]))
    else:
        out.write(_dump(doc) + "\n")


def cmd_sweep_eps(args, out) -> None:
    g = parse_graph(args.graph)
    spec = _kernel(args)
    if args.points < 6:
        raise UsageError("--points must be at least 6")
    grid = eps_grid(spec.ir, args.points, args.decades, args.top)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["eps", "value", "error"])
    vals = []
    for e in grid:
        r = schwinger_weight(g, spec.with_uv(float(e)), normalization=args.normalization)
        vals.append(r.value)
        w.writerow([repr(float(e)), repr(r.value), repr(r.error_estimate)])
    try:
        fit = singular_fit(vals, grid, regular=DEFAULT_REGULAR, ir_scale=spec.ir)
    except FitError as exc:
        w.writerow(["fit", "failed", str(exc)])
        raise NumericalFailure(str(exc)) from exc
    w.writerow(["fit", f"coeff_inv_eps={fit.coeff_inv_eps!r}", f"coeff_log_eps={fit.coeff_log_eps!r}",
                f"coeff_const={fit.coeff_const!r}", f"residual={fit.fit_residual!r}", f"valid={fit.valid}"])
    if not fit.valid:
        raise NumericalFailure(f"fit residual {fit.fit_residual:.3g} above tolerance")


def cmd_sweep_beta(args, out) -> None:
    family, _, rest = args.metric.partition(":")
    if args.radii is not None:
        if family not in ("sphere", "hyperbolic"):
            raise UsageError("--radii needs a sphere or hyperbolic family")
        others = ",".join(p for p in rest.split(",") if p and not p.startswith("r="))
        rows = []
        for r in args.radii:
            chart = parse_metric(f"{family}:r={r}" + (f",{others}" if others else ""))
            point = _point(chart, args.point)
            b = sigma_beta(chart, point, method=args.geometry)
            rows.append((r, b, chart(point)))
        d = rows[0][1].tensor.shape[0] if rows else 0
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["r"] + [f"x{i}" for i in range(d)] + [f"beta_{i}{j}" for i in range(d) for j in range(i, d)] + ["trace"])
        for r, b, h in rows:
            tr = float(np.einsum("ij,ij->", np.linalg.inv(h), b.tensor))
            w.writerow([repr(r)] + [repr(v) for v in b.point]
                       + [repr(float(b.tensor[i, j])) for i in range(d) for j in range(i, d)] + [repr(tr)])
        return
    chart = parse_metric(args.metric)
    points = args.points or [_point(chart, args.point)]
    for p in points:
        if len(p) != chart.dim:
            raise UsageError(f"points need {chart.dim} coordinates")
    from .sigma import sigma_beta_field

    tensors = sigma_beta_field(chart, points, threads=_threads(args), method=args.geometry)
    out.write(beta_field_csv(tensors))


def cmd_weight(args, out) -> None:
    g = parse_graph(args.graph)
    spec = _kernel(args)
    doc = {"command": "weight", "graph": graph_to_json(g), "aut_order": classify(g).aut_order,
           "config": _run_config(args)}
    if args.lengths is not None:
        from .schwinger import gaussian_graph_weight

        doc["gaussian"] = float(gaussian_graph_weight(g, spec, np.asarray(args.lengths)))
        if args.mc_samples:
            doc["monte_carlo"] = mc_position_oracle(g, spec, args.lengths, args.mc_samples, seed=args.seed).to_dict()
    else:
        doc["weight"] = schwinger_weight(g, spec, normalization=args.normalization).to_dict()
    out.write(_dump(doc) + "\n")


def cmd_obstruction(args, out) -> None:
    try:
        spec = KernelSpec(2, 0.0, 1e-3 * args.ir, args.ir)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    value = obstruction_constant(spec)
    doc = {
        "command": "obstruction",
        "value": value,
        "symbolic": OBSTRUCTION_SYMBOLIC,
        "exact": -math.log(2) / (4 * math.pi),
        "config": _run_config(args),
    }
    out.write(_dump(doc) + "\n")


# -- entry point ------------------------------------------------------------------


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser, leaves = build_parser()
    args = parser.parse_args(argv)  # argparse exits with status 2 on bad usage
    try:
        _apply_config(args, leaves[_leaf_key(args)])
        _threads(args)
        args.func(args, out)
    except (UsageError, GraphError, GeometryError, ScaleVarianceError) as exc:
        print(f"rgflow: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, FitError, QuadratureError, FlowError, ArithmeticError) as exc:
        print(f"rgflow: numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"rgflow: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Effective interactions, homotopy RG flow and one-loop beta functionals for
scalar theories with derivative-free vertices.

A :class:`FunctionalSeries` holds couplings ``c[g, k]`` multiplying
``hbar^g (1/k!) int phi^k``.  The flow

    W(P, F) = sum_G hbar^g(G) / |Aut G| * w_G(P, F)

is evaluated on constant external fields, so each connected graph class
feeds the coupling at ``(genus, #tails)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

import sympy as sp

from .fitting import DEFAULT_REGULAR, SingularExpansion, eps_grid, singular_fit
from .graphs import (
    GraphClass,
    _colored_aut_count,
    canonical_key,
    enumerate_connected,
    first_betti,
    graph_to_json,
)
from .schwinger import (
    KernelSpec,
    PAPER_CALIBRATION,
    QuadratureError,
    calibration,
    schwinger_weight,
    weight_with_ranges,
)

__all__ = [
    "FunctionalSeries",
    "ScalingAction",
    "FlowError",
    "ScaleVarianceError",
    "CountertermResult",
    "BetaResult",
    "scalar_theory",
    "load_theory",
    "flow_contributions",
    "rg_flow",
    "check_hrge",
    "counterterm_log",
    "scaling_weight",
    "beta_one_loop",
    "wheel_log_coefficient",
    "symbolic_counterterm_log",
    "symbolic_beta",
    "beta_lambda_diagnostic",
]

SCHEME = "eps-inverse+log"


class FlowError(RuntimeError):
    """A graph weight failed during the flow; the message names the graph."""


class ScaleVarianceError(ValueError):
    """The classical action is not scale invariant."""


Key = tuple[int, int]


@dataclass(frozen=True)
class FunctionalSeries:
    """Couplings ``c[g, k]`` of ``hbar^g (1/k!) int phi^k``."""

    couplings: Mapping[Key, float] = field(default_factory=dict)
    hbar_truncation: int = 1

    def __post_init__(self):
        clean = {}
        for (g, k), c in self.couplings.items():
            g, k = int(g), int(k)
            if g < 0 or k < 0:
                raise ValueError(f"invalid coupling index {(g, k)}")
            if g > self.hbar_truncation or c == 0:
                continue
            if g == 0 and k < 3:
                raise ValueError(
                    f"classical coupling c[0,{k}] must vanish: interaction is at least cubic modulo hbar"
                )
            clean[(g, k)] = float(c)
        object.__setattr__(self, "couplings", dict(sorted(clean.items())))

    def __getitem__(self, key: Key) -> float:
        return self.couplings.get(key, 0.0)

    def monomial(self, g: int, k: int) -> float:
        """Coefficient of ``hbar^g int phi^k`` (no ``1/k!``)."""
        return self[(g, k)] / math.factorial(k)

    def vertex_types(self) -> list[Key]:
        return list(self.couplings)

    def classical(self) -> "FunctionalSeries":
        return FunctionalSeries({k: v for k, v in self.couplings.items() if k[0] == 0}, self.hbar_truncation)

    def to_dict(self) -> dict:
        return {f"{g},{k}": c for (g, k), c in self.couplings.items()}


def scalar_theory(name: str, c: float = 1.0) -> tuple[FunctionalSeries, int]:
    """The shipped theories: ``phi3`` on R^6 and ``phi4`` on R^4."""
    table = {"phi3": (3, 6), "phi4": (4, 4)}
    if name not in table:
        raise KeyError(f"unknown theory {name!r}; expected one of {sorted(table)}")
    k, dim = table[name]
    return FunctionalSeries({(0, k): c}), dim


def load_theory(obj: Mapping) -> tuple[FunctionalSeries, int, float]:
    """Parse ``{dimension, mass, couplings: [{g, k, c}]}``."""
    try:
        dim = int(obj["dimension"])
        mass = float(obj.get("mass", 0.0))
        coup = {(int(e["g"]), int(e["k"])): float(e["c"]) for e in obj["couplings"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed theory definition: {exc}") from exc
    return FunctionalSeries(coup), dim, mass


@dataclass(frozen=True)
class ScalingAction:
    """Scaling on R^n; ``k_gf`` is the scaling dimension of the gauge fixing
    operator, ``n/2 - 1`` for the scalar theories."""

    dim: int

    @property
    def k_gf(self) -> Fraction:
        return Fraction(self.dim, 2) - 1

    def weight(self, k: int) -> Fraction:
        return scaling_weight(self.dim, k)


def scaling_weight(n: int, k: int) -> Fraction:
    """Exponent of lambda in the rescaling of ``int phi^k`` on R^n."""
    return Fraction(n) + Fraction(k * (2 - n), 2)


# -- flow ---------------------------------------------------------------------


def _classes(F: FunctionalSeries, max_vertices: int, max_genus: int) -> list[GraphClass]:
    types = [t for t in F.vertex_types() if t[0] <= max_genus]
    if not types or max_vertices < 1:
        return []
    return enumerate_connected(max_vertices, max_genus, (), vertex_types=types)


def _vertex_product(F: FunctionalSeries, cls_graph) -> float:
    g = cls_graph
    return math.prod(F[(g.vertex_genus[v], g.valency[v])] for v in range(g.n_vertices))


def _class_weight(cls: GraphClass, dim: int, mass: float, ranges) -> float:
    g = cls.canonical_form
    try:
        if first_betti(g) <= 1:
            return weight_with_ranges(g, dim, mass, ranges)[0]
        lo, hi = ranges[0]
        if any(r != (lo, hi) for r in ranges):
            raise ValueError("mixed ranges need b1 <= 1")
        return schwinger_weight(g, KernelSpec(dim, mass, lo, hi), method="cubature").value
    except (QuadratureError, ValueError) as exc:
        raise FlowError(f"graph {graph_to_json(g)}: {exc}") from exc


def flow_contributions(
    F: FunctionalSeries, spec: KernelSpec, max_vertices: int = 4, *, threads: int = 1
) -> list[tuple[GraphClass, float]]:
    """Per graph class contribution ``n_tails!/|Aut| * prod(c) * weight`` to
    the coupling at ``(genus, n_tails)``."""
    classes = _classes(F, max_vertices, F.hbar_truncation)

    def one(cls):
        ranges = [(spec.uv, spec.ir)] * cls.canonical_form.n_edges
        w = _class_weight(cls, spec.dim, spec.mass, ranges)
        return cls.tail_weight * _vertex_product(F, cls.canonical_form) * w

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        values = list(pool.map(one, classes))
    return list(zip(classes, values))


def _accumulate(items: Iterable[tuple[Key, float]]) -> dict[Key, float]:
    buckets: dict[Key, list[float]] = {}
    for key, v in items:
        buckets.setdefault(key, []).append(v)
    return {k: math.fsum(v) for k, v in sorted(buckets.items())}


def rg_flow(
    F: FunctionalSeries, spec: KernelSpec, max_vertices: int = 4, *, threads: int = 1
) -> FunctionalSeries:
    """``W(P_{eps->L}, F)`` truncated to ``max_vertices`` vertices and genus
    ``F.hbar_truncation``, on constant external fields."""
    if max_vertices > 4:
        raise ValueError("rg_flow is truncated at 4 vertices")
    if F.hbar_truncation > 1:
        raise ValueError("rg_flow supports hbar truncation <= 1")
    contrib = flow_contributions(F, spec, max_vertices, threads=threads)
    acc = _accumulate(((c.genus, c.n_tails), v) for c, v in contrib)
    return FunctionalSeries(acc, F.hbar_truncation)


def check_hrge(
    F0: FunctionalSeries,
    spec: KernelSpec,
    L1: float,
    L2: float,
    max_vertices: int = 3,
) -> float:
    """Max-norm of ``W(P_{L1->L2}, W(P_{eps->L1}, F0)) - W(P_{eps->L2}, F0)``.

    The composite flow is expanded over graphs whose edges are coloured
    *inner* (``P_{eps->L1}``) or *outer* (``P_{L1->L2}``): the inner
    components are the graphs of the first flow and the outer edges glue
    them.  Each colour class enters with ``1/|Aut|`` of the coloured graph,
    which is what the nested sums produce.  Both sides use the same vertex
    and genus truncation.
    """
    eps = spec.uv
    if not eps < L1 <= L2:
        raise ValueError("need eps < L1 <= L2")
    classes = _classes(F0, max_vertices, F0.hbar_truncation)
    direct = []
    composite = []
    ranges_by_color = ((eps, L1), (L1, L2))
    for cls in classes:
        g = cls.canonical_form
        coup = _vertex_product(F0, g)
        key = (cls.genus, cls.n_tails)
        w = _class_weight(cls, spec.dim, spec.mass, [(eps, L2)] * g.n_edges)
        direct.append((key, cls.tail_weight * coup * w))
        seen = set()
        for colors in product((0, 1), repeat=g.n_edges):
            ckey = canonical_key(g, colors) if g.n_edges else canonical_key(g)
            if ckey in seen:
                continue
            seen.add(ckey)
            aut = _colored_aut_count(ckey, labeled_tails=False)
            ranges = [ranges_by_color[c] for c in colors]
            wc = _class_weight(cls, spec.dim, spec.mass, ranges)
            composite.append((key, math.factorial(cls.n_tails) / aut * coup * wc))
    a, b = _accumulate(direct), _accumulate(composite)
    keys = set(a) | set(b)
    return max((abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys), default=0.0)


# -- counterterms and beta ----------------------------------------------------


@dataclass(frozen=True)
class CountertermResult:
    log: FunctionalSeries
    inv_eps: FunctionalSeries
    fits: dict[Key, SingularExpansion]
    grid: tuple[float, ...]
    normalization: str
    irreducible_only: bool

    @property
    def valid(self) -> dict[Key, bool]:
        return {k: f.valid for k, f in self.fits.items()}

    def invalid(self) -> list[Key]:
        return [k for k, f in self.fits.items() if not f.valid]


def _one_loop_classes(F: FunctionalSeries, max_vertices: int, irreducible_only: bool) -> list[GraphClass]:
    classical = F.classical()
    out = []
    for cls in _classes(classical, max_vertices, 1):
        g = cls.canonical_form
        if first_betti(g) != 1:
            continue
        if irreducible_only and not g.is_wheel():
            continue
        out.append(cls)
    return out


def counterterm_log(
    theory: FunctionalSeries,
    spec: KernelSpec,
    max_vertices: int = 4,
    *,
    grid: Sequence[float] | None = None,
    regular: Sequence[tuple[int, int]] = DEFAULT_REGULAR,
    normalization: str = "paper",
    irreducible_only: bool = True,
    threads: int = 1,
) -> CountertermResult:
    """One-loop counterterms in the ``{1/eps, log eps}`` scheme.

    Sweeps eps over ``grid`` (default :func:`eps_grid` of ``L``), computes the
    one-loop couplings of the flow from the classical vertices and fits each
    against the scheme basis.  With ``irreducible_only`` only the wheels
    (every vertex on the loop) enter: the divergences of graphs with trees
    hanging off the loop are products of a wheel divergence with finite tree
    factors and are cancelled by flowing the lower counterterms at tree level.
    ``spec.uv`` itself is not used; the sweep supplies eps.
    """
    grid = tuple(float(e) for e in (eps_grid(spec.ir) if grid is None else grid))
    classes = _one_loop_classes(theory, max_vertices, irreducible_only)
    kappa = calibration(spec.dim, normalization)

    def at(eps):
        items = []
        for cls in classes:
            g = cls.canonical_form
            w = _class_weight(cls, spec.dim, spec.mass, [(eps, spec.ir)] * g.n_edges)
            items.append(((1, cls.n_tails), kappa * cls.tail_weight * _vertex_product(theory, g) * w))
        return _accumulate(items)

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        sweep = list(pool.map(at, grid))
    keys = sorted({k for row in sweep for k in row})
    fits = {}
    for key in keys:
        vals = [row.get(key, 0.0) for row in sweep]
        fits[key] = singular_fit(vals, grid, regular=regular, ir_scale=spec.ir)
    log = FunctionalSeries({k: f.coeff_log_eps for k, f in fits.items()})
    inv = FunctionalSeries({k: f.coeff_inv_eps for k, f in fits.items()})
    return CountertermResult(log, inv, fits, grid, normalization, irreducible_only)


@dataclass(frozen=True)
class BetaResult:
    """One-loop beta functional ``k_gf * I^CT_log`` on the log-divergent
    classical couplings; coefficients are representatives of the class."""

    coefficients: dict[Key, float]
    k_gf: Fraction
    counterterms: CountertermResult
    dim: int
    mass: float

    def monomial(self, g: int, k: int) -> float:
        return self.coefficients[(g, k)] / math.factorial(k)

    def metadata(self) -> dict:
        return {
            "scheme": SCHEME,
            "convention": "constant-field",
            "normalization": self.counterterms.normalization,
            "calibration": str(PAPER_CALIBRATION.get(self.dim, 1))
            if self.counterterms.normalization == "paper"
            else "1",
            "k_gf": str(self.k_gf),
            "class": "representative of the class",
        }


def _marginal_valencies(theory: FunctionalSeries, dim: int, restrict: bool) -> list[int]:
    classical = theory.classical()
    weights = {k: scaling_weight(dim, k) for (_, k) in classical.couplings}
    variant = [k for k, w in weights.items() if w != 0]
    if variant and not restrict:
        raise ScaleVarianceError(
            f"classical couplings at valencies {variant} are not scale invariant on R^{dim}; "
            "pass restrict=True to use the log-divergent subspace"
        )
    return sorted(k for k, w in weights.items() if w == 0)


def beta_one_loop(
    theory: FunctionalSeries,
    spec: KernelSpec,
    max_vertices: int = 4,
    *,
    restrict: bool = False,
    **ct_kwargs,
) -> BetaResult:
    """``O_beta^(1) = k_gf * I^CT_log`` on the classical log-divergent couplings."""
    valencies = _marginal_valencies(theory, spec.dim, restrict)
    ct = counterterm_log(theory, spec, max_vertices, **ct_kwargs)
    k_gf = ScalingAction(spec.dim).k_gf
    coeffs = {}
    for k in valencies:
        fit = ct.fits.get((1, k))
        coeffs[(1, k)] = float(k_gf) * (fit.coeff_log_eps if fit is not None else 0.0)
    return BetaResult(coeffs, k_gf, ct, spec.dim, spec.mass)


# -- closed forms ---------------------------------------------------------------


def wheel_log_coefficient(dim: int, cycle_length: int, mass=0):
    """Exact ``log eps`` coefficient of the cycle integral of a one-loop graph
    whose loop has ``cycle_length`` edges (constant-field normalization).

    Near the corner the density of ``s = sum(l)`` is ``s^(k-1)/(k-1)!``;
    expanding ``exp(-m^2 s)``, the term ``s^(-1)`` arises from the order
    ``j = n/2 - k``, and ``int_eps ds/s = -log eps + ...``.
    """
    m = sp.nsimplify(mass)
    k = cycle_length
    if dim % 2:
        return sp.Integer(0)
    j = dim // 2 - k
    if j < 0:
        return sp.Integer(0)
    return -((4 * sp.pi) ** sp.Rational(-dim, 2)) * (-(m**2)) ** j / (sp.factorial(j) * sp.factorial(k - 1))


def symbolic_counterterm_log(
    theory: FunctionalSeries,
    dim: int,
    max_vertices: int = 4,
    *,
    mass=0,
    normalization: str = "paper",
) -> dict[Key, sp.Expr]:
    """Exact ``log eps`` counterterms ``c[1, k]`` from the wheels."""
    kappa = sp.Integer(1) if normalization == "constant-field" else sp.nsimplify(PAPER_CALIBRATION.get(dim, 1))
    out: dict[Key, sp.Expr] = {}
    for cls in _one_loop_classes(theory, max_vertices, True):
        g = cls.canonical_form
        coup = sp.Mul(*[sp.nsimplify(theory[(g.vertex_genus[v], g.valency[v])]) for v in range(g.n_vertices)])
        tw = sp.Rational(math.factorial(cls.n_tails), cls.full_aut_order)
        term = kappa * tw * coup * wheel_log_coefficient(dim, g.n_edges, mass)
        key = (1, cls.n_tails)
        out[key] = sp.simplify(out.get(key, 0) + term)
    return out


def symbolic_beta(
    theory: FunctionalSeries, dim: int, max_vertices: int = 4, *, mass=0, restrict: bool = False,
    normalization: str = "paper",
) -> dict[Key, sp.Expr]:
    """Exact ``k_gf * I^CT_log`` in monomial units (coefficient of ``int phi^k``)."""
    valencies = _marginal_valencies(theory, dim, restrict)
    ct = symbolic_counterterm_log(theory, dim, max_vertices, mass=mass, normalization=normalization)
    k_gf = sp.Rational(ScalingAction(dim).k_gf.numerator, ScalingAction(dim).k_gf.denominator)
    return {
        (1, k): sp.simplify(k_gf * ct.get((1, k), sp.Integer(0)) / sp.factorial(k)) for k in valencies
    }


def beta_lambda_diagnostic(
    theory: FunctionalSeries,
    spec: KernelSpec,
    valency: int,
    max_vertices: int = 4,
    *,
    step: float = 1e-3,
    normalization: str = "paper",
) -> float:
    """Finite-difference ``lambda d/dlambda`` of the renormalized one-loop
    coupling at ``(1, valency)`` along ``I_lambda[L] = rho_lambda I[lambda^-k L]``.

    Diagnostic only: the renormalized coupling is approximated at the
    smallest eps of the default grid with the fitted log counterterm removed.
    For a marginal valency ``rho_lambda`` acts trivially, so only the scale
    argument moves.
    """
    k_gf = float(ScalingAction(spec.dim).k_gf)
    ct = counterterm_log(theory, spec, max_vertices, normalization=normalization)
    fit = ct.fits[(1, valency)]
    eps = min(ct.grid)
    classes = [c for c in _one_loop_classes(theory, max_vertices, True) if c.n_tails == valency]
    kappa = calibration(spec.dim, normalization)

    def renormalized(L):
        vals = [
            kappa * c.tail_weight * _vertex_product(theory, c.canonical_form)
            * _class_weight(c, spec.dim, spec.mass, [(eps, L)] * c.canonical_form.n_edges)
            for c in classes
        ]
        return math.fsum(vals) - fit.coeff_log_eps * math.log(eps)

    lam_p, lam_m = 1 + step, 1 - step
    hi = renormalized(lam_p ** (-k_gf) * spec.ir) * lam_p ** float(scaling_weight(spec.dim, valency))
    lo = renormalized(lam_m ** (-k_gf) * spec.ir) * lam_m ** float(scaling_weight(spec.dim, valency))
    return (hi - lo) / (math.log(lam_p) - math.log(lam_m))

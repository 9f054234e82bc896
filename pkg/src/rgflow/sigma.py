"""One-loop beta tensor of the two-dimensional sigma model.

The only one-loop graph with a log divergence is the tadpole on the quartic
vertex built from the order-2 metric jet; its ``log eps`` coefficient
``-1/(4 pi)`` contracted with the jet trace ``Ric/3`` gives
``beta = -Ric/(12 pi)``.  Wheels with two or more vertices are UV finite.
Tadpoles on higher jets are cohomologous to this one and the target
vector-field part of the beta functional vanishes, so neither is built.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from .fitting import DEFAULT_REGULAR, SingularExpansion, eps_grid, singular_fit
from .geometry import MetricChart, jet_trace, metric_jet2_normal
from .graphs import tadpole, wheel
from .schwinger import KernelSpec, WeightResult, gaussian_graph_weight, schwinger_weight

__all__ = [
    "BetaTensor",
    "tadpole_fit",
    "tadpole_log_coefficient",
    "sigma_beta",
    "sigma_beta_field",
    "beta_field_csv",
    "multi_vertex_wheels_finite",
    "WheelFiniteness",
    "obstruction_fit",
    "obstruction_constant",
    "SIGMA_SYMBOLIC",
    "OBSTRUCTION_SYMBOLIC",
]

SIGMA_SYMBOLIC = "-1/(12*pi)"
OBSTRUCTION_SYMBOLIC = "-log(2)/(4*pi)"
SCHEME = "eps-inverse+log"


def _require_2d_massless(spec: KernelSpec) -> None:
    if spec.dim != 2 or spec.mass != 0:
        raise ValueError("sigma-model weights need n = 2 and m = 0")


def tadpole_fit(spec: KernelSpec = KernelSpec(2), grid: Sequence[float] | None = None) -> SingularExpansion:
    """Fit of ``int_eps^L dt / (4 pi t)`` over an eps sweep below ``L``."""
    _require_2d_massless(spec)
    grid = eps_grid(spec.ir) if grid is None else grid
    g = tadpole(2)
    vals = [schwinger_weight(g, spec.with_uv(e)).value for e in grid]
    return singular_fit(vals, grid, ir_scale=spec.ir, residual_tol=1e-10)


@lru_cache(maxsize=32)
def _tadpole_log(spec: KernelSpec) -> float:
    return tadpole_fit(spec).coeff_log_eps


def tadpole_log_coefficient(spec: KernelSpec = KernelSpec(2)) -> float:
    """``log eps`` coefficient of the tadpole weight; ``-1/(4 pi)``."""
    _require_2d_massless(spec)
    return _tadpole_log(spec)


@dataclass(frozen=True)
class BetaTensor:
    point: tuple[float, ...]
    tensor: np.ndarray
    scheme_tag: str = SCHEME
    metadata: dict = field(default_factory=dict)

    def transform(self, A) -> "BetaTensor":
        """Components in coordinates ``y`` with ``x = x0 + A y``."""
        A = np.asarray(A, dtype=float)
        return BetaTensor(self.point, A.T @ self.tensor @ A, self.scheme_tag, dict(self.metadata))

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "tensor": self.tensor.tolist(),
            "scheme": self.scheme_tag,
            **self.metadata,
        }


def sigma_beta(
    chart: MetricChart, point, *, spec: KernelSpec = KernelSpec(2), method: str = "auto"
) -> BetaTensor:
    """One-loop beta tensor at ``point``: tadpole coefficient times the
    ``(k, l)`` trace of the quartic jet vertex."""
    J = metric_jet2_normal(chart, point, method=method)
    h = chart(point)
    beta = tadpole_log_coefficient(spec) * jet_trace(J, h)
    beta = 0.5 * (beta + beta.T)
    meta = {
        "symbolic": f"{SIGMA_SYMBOLIC}*Ric",
        "tadpole_log_coefficient": tadpole_log_coefficient(spec),
        "geometry": method if method != "auto" else ("analytic" if chart.jets is not None else "fd"),
        "family": chart.family,
        "reduction": "higher-jet tadpoles cohomologous to the order-2 tadpole; vector-field part vanishes",
    }
    return BetaTensor(tuple(float(v) for v in np.asarray(point, dtype=float)), beta, SCHEME, meta)


def sigma_beta_field(
    chart: MetricChart, points: Iterable, *, threads: int = 1, method: str = "auto"
) -> list[BetaTensor]:
    points = [np.asarray(p, dtype=float) for p in points]
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        return list(pool.map(lambda p: sigma_beta(chart, p, method=method), points))


def beta_field_csv(tensors: Sequence[BetaTensor], extra: dict | None = None) -> str:
    """CSV rows ``(x0.., [extra..], beta_ij..)`` for ``i <= j``."""
    if not tensors:
        return ""
    d = len(tensors[0].point)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra = extra or {}
    w.writerow([f"x{i}" for i in range(d)] + list(extra) + [f"beta_{i}{j}" for i in range(d) for j in range(i, d)])
    for t in tensors:
        w.writerow(
            [repr(v) for v in t.point]
            + [repr(v) for v in extra.values()]
            + [repr(float(t.tensor[i, j])) for i in range(d) for j in range(i, d)]
        )
    return buf.getvalue()


@dataclass(frozen=True)
class WheelFiniteness:
    weight: WeightResult
    fit: SingularExpansion
    tolerance: float

    @property
    def finite(self) -> bool:
        return abs(self.fit.coeff_log_eps) < self.tolerance and abs(self.fit.coeff_inv_eps) < self.tolerance


def multi_vertex_wheels_finite(
    spec: KernelSpec = KernelSpec(2), k: int = 2, *, tolerance: float = 1e-8, grid: Sequence[float] | None = None
) -> WheelFiniteness:
    """Weight of the ``k``-vertex wheel at ``spec.uv`` and the singular fit of
    an eps sweep.  For ``k >= 2`` the singular coefficients vanish; ``k = 1``
    is the tadpole."""
    _require_2d_massless(spec)
    if k < 1:
        raise ValueError("wheel needs at least one vertex")
    g = tadpole(2) if k == 1 else wheel(k, 2)
    grid = eps_grid(spec.ir) if grid is None else grid
    vals = [schwinger_weight(g, spec.with_uv(e)).value for e in grid]
    fit = singular_fit(vals, grid, regular=DEFAULT_REGULAR, ir_scale=spec.ir)
    return WheelFiniteness(schwinger_weight(g, spec), fit, tolerance)


def _obstruction_integrand(eps: float, L: float) -> float:
    """``int_eps^L dt`` of the two-vertex wheel weight with edge lengths
    ``(eps, t)``: one edge is the heat kernel at time eps, the other the
    propagator from eps to L."""
    g = wheel(2)
    spec = KernelSpec(2, 0.0, eps, L)
    f = lambda t: float(gaussian_graph_weight(g, spec, np.array([eps, t])))
    val, _ = integrate.quad(f, eps, L, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def obstruction_fit(spec: KernelSpec = KernelSpec(2), grid: Sequence[float] | None = None) -> SingularExpansion:
    _require_2d_massless(spec)
    grid = eps_grid(spec.ir) if grid is None else grid
    vals = [_obstruction_integrand(e, spec.ir) for e in grid]
    return singular_fit(vals, grid, regular=DEFAULT_REGULAR, ir_scale=spec.ir)


def obstruction_constant(spec: KernelSpec = KernelSpec(2)) -> float:
    """Finite part of the obstruction pairing: fitted constant minus
    ``log(L)/(4 pi)``; ``-log(2)/(4 pi)``."""
    fit = obstruction_fit(spec)
    return fit.coeff_const - math.log(spec.ir) / (4 * math.pi)

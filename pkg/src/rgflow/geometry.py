"""Coordinate Riemannian metrics and their curvature.

Conventions (the round sphere has positive Ricci curvature):

    Gamma^a_bc   = 1/2 h^ad (d_b h_dc + d_c h_db - d_d h_bc)
    R^a_bcd      = d_c Gamma^a_db - d_d Gamma^a_cb
                   + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb
    R_abcd       = h_ae R^e_bcd
    Ric_bd       = R^a_bad

Built-in families are conformally flat, ``h = exp(2f) delta``, with closed
form derivatives of ``f``; custom metrics come from JSON expressions and are
differentiated by central differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

__all__ = [
    "GeometryError",
    "MetricChart",
    "CurvatureData",
    "flat",
    "sphere",
    "hyperbolic",
    "torus_conformal",
    "custom_from_json",
    "parse_metric",
    "curvature_at",
    "curvature_from_jets",
    "metric_jet2_normal",
    "jet_trace",
]

FD_STEP = 1e-4


class GeometryError(ValueError):
    """Invalid metric, chart point or metric description."""


Jets = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class MetricChart:
    """A metric on a coordinate box.

    ``jets(x)`` (optional) returns ``(h, dh, ddh)`` with ``dh[a, b, c] =
    d_c h_ab`` and ``ddh[a, b, c, d] = d_c d_d h_ab``.
    """

    dim: int
    metric: Callable[[np.ndarray], np.ndarray]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    family: str = "custom"
    params: dict = field(default_factory=dict)
    jets: Optional[Jets] = None
    scale: float = 1.0

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.metric(np.asarray(x, dtype=float)), dtype=float)

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > np.asarray(self.lower) + margin) and np.all(x < np.asarray(self.upper) - margin))

    def linear_pullback(self, A, origin=None) -> "MetricChart":
        """Chart in coordinates ``y`` with ``x = origin + A y``.

        The metric transforms as ``A^T h(x) A``; jets pick up one factor of
        ``A`` per derivative.  The new box is the image of the old one when
        ``A`` is diagonal, otherwise a box inside a ball around the origin.
        """
        A = np.asarray(A, dtype=float)
        if A.shape != (self.dim, self.dim) or abs(np.linalg.det(A)) < 1e-12:
            raise GeometryError("reparametrization must be an invertible dim x dim matrix")
        x0 = np.zeros(self.dim) if origin is None else np.asarray(origin, dtype=float)
        to_x = lambda y: x0 + A @ np.asarray(y, dtype=float)
        metric = lambda y: A.T @ self(to_x(y)) @ A
        jets = None
        if self.jets is not None:
            def pulled_jets(y):
                h, dh, ddh = self.jets(to_x(y))
                return (
                    A.T @ h @ A,
                    np.einsum("ijk,ia,jb,kc->abc", dh, A, A, A),
                    np.einsum("ijkl,ia,jb,kc,ld->abcd", ddh, A, A, A, A),
                )

            jets = pulled_jets
        half = 0.5 * float(np.min(np.asarray(self.upper) - np.asarray(self.lower)))
        centre = 0.5 * (np.asarray(self.upper) + np.asarray(self.lower))
        room = half - float(np.linalg.norm(x0 - centre))
        r = max(room, 0.0) / float(np.linalg.norm(A, 2)) / math.sqrt(self.dim)
        return MetricChart(
            self.dim, metric, tuple([-r] * self.dim), tuple([r] * self.dim),
            f"{self.family}(linear)", dict(self.params), jets, self.scale,
        )


@dataclass(frozen=True)
class CurvatureData:
    point: tuple[float, ...]
    metric: np.ndarray
    christoffel: np.ndarray  # Gamma[a, b, c] = Gamma^a_bc
    riemann: np.ndarray  # R[a, b, c, d] = R_abcd, fully covariant
    ricci: np.ndarray
    method: str

    @property
    def scalar(self) -> float:
        return float(np.einsum("ab,ab->", np.linalg.inv(self.metric), self.ricci))


# -- built-in conformally flat families ------------------------------------------


def _conformal(dim, f_jets, lower, upper, family, params, scale) -> MetricChart:
    """``h = exp(2f) delta`` from ``f_jets(x) = (f, df, ddf)``."""
    eye = np.eye(dim)

    def metric(x):
        f, _, _ = f_jets(x)
        return math.exp(2 * f) * eye

    def jets(x):
        f, df, ddf = f_jets(x)
        e = math.exp(2 * f)
        h = e * eye
        dh = 2 * e * np.einsum("ab,c->abc", eye, df)
        ddh = e * np.einsum("ab,cd->abcd", eye, 4 * np.outer(df, df) + 2 * ddf)
        return h, dh, ddh

    return MetricChart(dim, metric, tuple(lower), tuple(upper), family, params, jets, scale)


def flat(dim: int = 2) -> MetricChart:
    zero = lambda x: (0.0, np.zeros(dim), np.zeros((dim, dim)))
    return _conformal(dim, zero, [-1e3] * dim, [1e3] * dim, "flat", {"d": dim}, 1.0)


def _ball_factor(dim, r, sign):
    # f = log(2 r^2 / (r^2 + sign |x|^2))
    def f_jets(x):
        x = np.asarray(x, dtype=float)
        q = r * r + sign * float(x @ x)
        if q <= 0:
            raise GeometryError("point outside the chart")
        f = math.log(2 * r * r / q)
        df = -2 * sign * x / q
        ddf = -2 * sign * np.eye(dim) / q + 4 * np.outer(x, x) / q**2
        return f, df, ddf
    return f_jets


def sphere(r: float = 1.0, dim: int = 2) -> MetricChart:
    """Round sphere of radius ``r`` in the stereographic chart."""
    if r <= 0:
        raise GeometryError("radius must be positive")
    b = 10.0 * r
    return _conformal(dim, _ball_factor(dim, r, +1), [-b] * dim, [b] * dim, "sphere", {"r": r, "d": dim}, r)


def hyperbolic(r: float = 1.0, dim: int = 2) -> MetricChart:
    """Hyperbolic space of curvature radius ``r`` in the Poincare ball."""
    if r <= 0:
        raise GeometryError("radius must be positive")
    b = 0.95 * r / math.sqrt(dim)
    return _conformal(dim, _ball_factor(dim, r, -1), [-b] * dim, [b] * dim, "hyperbolic", {"r": r, "d": dim}, r)


def torus_conformal(a: float = 0.1, dim: int = 2) -> MetricChart:
    """Flat torus chart ``[0, 1]^d`` with conformal factor
    ``f = a * sum(sin(2 pi x_i))``."""
    tp = 2 * math.pi

    def f_jets(x):
        x = np.asarray(x, dtype=float)
        return (
            a * float(np.sum(np.sin(tp * x))),
            a * tp * np.cos(tp * x),
            np.diag(-a * tp * tp * np.sin(tp * x)),
        )

    return _conformal(dim, f_jets, [0.0] * dim, [1.0] * dim, "torus_conformal", {"a": a, "d": dim}, 1.0)


def custom_from_json(obj) -> MetricChart:
    """Metric from ``{"coords": [...], "metric": [[expr, ...], ...],
    "domain": [[lo, hi], ...], "scale": s}``; entries are sympy expressions
    in the coordinate names.  Curvature uses finite differences."""
    import sympy as sp

    if isinstance(obj, (str, Path)):
        obj = json.loads(Path(obj).read_text())
    try:
        names = list(obj["coords"])
        rows = obj["metric"]
        dim = len(names)
        syms = sp.symbols(names)
        mat = sp.Matrix([[sp.sympify(e, locals=dict(zip(names, syms))) for e in row] for row in rows])
        domain = obj.get("domain", [[-1.0, 1.0]] * dim)
        scale = float(obj.get("scale", 1.0))
    except (KeyError, TypeError, sp.SympifyError) as exc:
        raise GeometryError(f"malformed custom metric: {exc}") from exc
    if mat.shape != (dim, dim) or len(domain) != dim:
        raise GeometryError("metric matrix and domain must match the coordinate count")
    if mat != mat.T:
        raise GeometryError("metric matrix must be symmetric")
    fn = sp.lambdify(syms, mat, "numpy")
    metric = lambda x: np.array(fn(*np.asarray(x, dtype=float)), dtype=float)
    lo = tuple(float(d[0]) for d in domain)
    hi = tuple(float(d[1]) for d in domain)
    return MetricChart(dim, metric, lo, hi, "custom", {"coords": names}, None, scale)


def _parse_params(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(",")):
        if "=" not in part:
            raise GeometryError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_metric(text: str) -> MetricChart:
    """``flat``, ``flat:d=3``, ``sphere:r=1.0``, ``hyperbolic:r=2,d=3``,
    ``torus:a=0.1`` or ``custom:file=metric.json``."""
    family, _, rest = text.partition(":")
    params = _parse_params(rest)
    try:
        d = int(params.pop("d", 2))
        if family == "flat":
            chart = flat(d)
        elif family == "sphere":
            chart = sphere(float(params.pop("r", 1.0)), d)
        elif family == "hyperbolic":
            chart = hyperbolic(float(params.pop("r", 1.0)), d)
        elif family in ("torus", "torus_conformal"):
            chart = torus_conformal(float(params.pop("a", 0.1)), d)
        elif family == "custom":
            if "file" not in params:
                raise GeometryError("custom metric needs file=...")
            path = params.pop("file")
            try:
                chart = custom_from_json(Path(path))
            except OSError as exc:
                raise GeometryError(f"cannot read {path}: {exc}") from exc
        else:
            raise GeometryError(f"unknown metric family {family!r}")
    except ValueError as exc:
        if isinstance(exc, GeometryError):
            raise
        raise GeometryError(f"bad parameter in {text!r}: {exc}") from exc
    if params:
        raise GeometryError(f"unknown parameters {sorted(params)} for {family}")
    return chart


# -- curvature -------------------------------------------------------------------


def _check_pd(h: np.ndarray, where) -> None:
    if not np.allclose(h, h.T, rtol=1e-12, atol=1e-14):
        raise GeometryError(f"metric not symmetric at {where}")
    try:
        np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        raise GeometryError(f"metric not positive definite at {where}") from None


def curvature_from_jets(h: np.ndarray, dh: np.ndarray, ddh: np.ndarray):
    """Christoffel symbols, covariant Riemann tensor and Ricci tensor from the
    metric and its first two derivatives at a point."""
    hinv = np.linalg.inv(h)
    # lower Christoffel [d, b, c] = 1/2 (d_b h_dc + d_c h_db - d_d h_bc)
    low = 0.5 * (np.einsum("dcb->dbc", dh) + dh - np.einsum("bcd->dbc", dh))
    gamma = np.einsum("ad,dbc->abc", hinv, low)
    # d_e of lower Christoffel: [d, b, c, e]
    dlow = 0.5 * (
        np.einsum("dcbe->dbce", ddh) + np.einsum("dbce->dbce", ddh) - np.einsum("bcde->dbce", ddh)
    )
    dhinv = -np.einsum("ap,pqe,qd->ade", hinv, dh, hinv)
    dgamma = np.einsum("ade,dbc->abce", dhinv, low) + np.einsum("ad,dbce->abce", hinv, dlow)
    # R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb
    Rup = (
        np.einsum("adbc->abcd", dgamma)
        - np.einsum("acbd->abcd", dgamma)
        + np.einsum("ace,edb->abcd", gamma, gamma)
        - np.einsum("ade,ecb->abcd", gamma, gamma)
    )
    R = np.einsum("ae,ebcd->abcd", h, Rup)
    ric = np.einsum("abad->bd", Rup)
    ric = 0.5 * (ric + ric.T)
    return gamma, R, ric


def _fd_jets(chart: MetricChart, x: np.ndarray, step: float):
    d = chart.dim
    E = np.eye(d) * step
    cache = {}

    def H(offset):
        key = tuple(np.round(offset / step).astype(int))
        if key not in cache:
            p = x + offset
            h = chart(p)
            _check_pd(h, tuple(p))
            cache[key] = h
        return cache[key]

    h0 = H(np.zeros(d))
    dh = np.empty((d, d, d))
    ddh = np.empty((d, d, d, d))
    for c in range(d):
        dh[:, :, c] = (H(E[c]) - H(-E[c])) / (2 * step)
        ddh[:, :, c, c] = (H(E[c]) - 2 * h0 + H(-E[c])) / step**2
        for e in range(c):
            v = (H(E[c] + E[e]) - H(E[c] - E[e]) - H(-E[c] + E[e]) + H(-E[c] - E[e])) / (4 * step**2)
            ddh[:, :, c, e] = ddh[:, :, e, c] = v
    return h0, dh, ddh


def curvature_at(chart: MetricChart, point, *, method: str = "auto", step: float | None = None) -> CurvatureData:
    """Curvature of ``chart`` at ``point``.

    ``method`` is ``"analytic"`` (closed-form jets), ``"fd"`` (central
    differences with step ``1e-4 * chart.scale``) or ``"auto"`` (analytic
    when available).
    """
    x = np.asarray(point, dtype=float)
    if x.shape != (chart.dim,):
        raise GeometryError(f"point must have {chart.dim} coordinates")
    if method == "auto":
        method = "analytic" if chart.jets is not None else "fd"
    if method == "analytic":
        if chart.jets is None:
            raise GeometryError("chart has no closed-form derivatives")
        if not chart.contains(x):
            raise GeometryError(f"point {tuple(x)} outside the chart")
        h, dh, ddh = chart.jets(x)
        _check_pd(h, tuple(x))
    elif method == "fd":
        step = FD_STEP * chart.scale if step is None else step
        if not chart.contains(x, margin=2 * step):
            raise GeometryError(f"point {tuple(x)} too close to the chart boundary")
        h, dh, ddh = _fd_jets(chart, x, step)
    else:
        raise ValueError(f"unknown method {method!r}")
    gamma, R, ric = curvature_from_jets(h, dh, ddh)
    return CurvatureData(tuple(float(v) for v in x), h, gamma, R, ric, method)


def metric_jet2_normal(chart: MetricChart, point, **kwargs) -> np.ndarray:
    """Quartic vertex tensor ``J[i, j, k, l] = (R_ikjl + R_iljk) / 6``.

    Symmetric in ``(i, j)`` and in ``(k, l)``; its ``(k, l)`` trace with
    the inverse metric is ``Ric / 3``.  Up to an overall sign fixed by this
    trace, it is the quadratic coefficient of the metric in geodesic normal
    coordinates (computed from curvature, not from geodesics).
    """
    R = curvature_at(chart, point, **kwargs).riemann
    J = (np.einsum("ikjl->ijkl", R) + np.einsum("iljk->ijkl", R)) / 6.0
    J = 0.5 * (J + np.einsum("ijkl->jikl", J))
    return 0.5 * (J + np.einsum("ijkl->ijlk", J))


def jet_trace(J: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Contract the ``(k, l)`` slots of ``J`` with ``h^{kl}``."""
    return np.einsum("ijkl,kl->ij", J, np.linalg.inv(h))

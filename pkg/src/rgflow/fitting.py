"""Least-squares extraction of the singular part of an epsilon sweep.

The renormalization scheme treats ``1/eps`` and ``log eps`` as purely
singular.  A sweep ``omega(eps)`` is fitted against ``{1/eps, log eps, 1}``
plus optional *regular* nuisance terms ``eps**p * log(eps)**q`` (p >= 1),
which vanish as eps -> 0 and therefore never enter the counterterm; they
only absorb the finite-eps corrections so that the singular coefficients
converge quickly on a modest grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "FitError",
    "SingularExpansion",
    "singular_fit",
    "eps_grid",
    "DEFAULT_REGULAR",
]

# eps, eps*log(eps), eps^2, eps^2*log(eps)
DEFAULT_REGULAR: tuple[tuple[int, int], ...] = ((1, 0), (1, 1), (2, 0), (2, 1))


class FitError(ArithmeticError):
    """The singular fit is ill-conditioned or does not describe the data."""


@dataclass(frozen=True)
class SingularExpansion:
    coeff_inv_eps: float
    coeff_log_eps: float
    coeff_const: float
    fit_residual: float
    eps_grid: tuple[float, ...]
    residual_tol: float = 1e-8
    regular_terms: tuple[tuple[int, int], ...] = ()
    regular_coeffs: tuple[float, ...] = field(default=())
    condition_number: float = 0.0

    @property
    def valid(self) -> bool:
        return self.fit_residual < self.residual_tol

    def singular_part(self, eps: float) -> float:
        return self.coeff_inv_eps / eps + self.coeff_log_eps * np.log(eps)

    def to_dict(self) -> dict:
        return {
            "coeff_inv_eps": self.coeff_inv_eps,
            "coeff_log_eps": self.coeff_log_eps,
            "coeff_const": self.coeff_const,
            "fit_residual": self.fit_residual,
            "valid": self.valid,
        }


def eps_grid(ir_scale: float, points: int = 12, decades: float = 2.0, top: float = 1e-3) -> np.ndarray:
    """Geometric grid of ``points`` values spanning ``decades`` below
    ``top * ir_scale``."""
    hi = top * ir_scale
    return np.geomspace(hi * 10.0 ** (-decades), hi, points)


def _column(eps: np.ndarray, p: int, q: int) -> np.ndarray:
    return eps**p * np.log(eps) ** q


def singular_fit(
    omega: Callable[[float], float] | Sequence[float] | np.ndarray,
    eps: Sequence[float] | np.ndarray,
    *,
    regular: Sequence[tuple[int, int]] = (),
    ir_scale: float | None = None,
    residual_tol: float = 1e-8,
    cond_cap: float = 1e10,
    strict: bool = False,
) -> SingularExpansion:
    """Fit ``omega`` on ``eps`` against ``{1/eps, log eps, 1}`` (+ ``regular``).

    ``omega`` is either a callable or the sampled values.  The reported
    ``fit_residual`` is the max-norm residual relative to the max-norm of
    the data; ``strict`` raises :class:`FitError` for an invalid fit instead
    of returning it flagged.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.ndim != 1 or eps.size < 6:
        raise FitError("need at least 6 sample points")
    if np.any(eps <= 0):
        raise FitError("eps grid must be positive")
    if ir_scale is not None and np.any(eps >= ir_scale / 10):
        raise FitError("eps grid must lie below ir_scale / 10")
    if callable(omega):
        y = np.array([float(omega(e)) for e in eps])
    else:
        y = np.asarray(omega, dtype=float)
    if y.shape != eps.shape:
        raise FitError("values and grid differ in length")
    regular = tuple(tuple(t) for t in regular)
    if any(p < 1 for p, _ in regular):
        raise FitError("regular terms must vanish as eps -> 0 (power >= 1)")
    cols = [1.0 / eps, np.log(eps), np.ones_like(eps)] + [_column(eps, p, q) for p, q in regular]
    A = np.column_stack(cols)
    if A.shape[1] > eps.size:
        raise FitError("more basis functions than sample points")
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    cond = float(np.linalg.cond(As))
    if not np.isfinite(cond) or cond > cond_cap:
        raise FitError(f"ill-conditioned design matrix (condition number {cond:.3g})")
    coef, *_ = np.linalg.lstsq(As, y, rcond=None)
    coef = coef / scale
    resid = A @ coef - y
    ynorm = float(np.max(np.abs(y))) or 1.0
    res = float(np.max(np.abs(resid)) / ynorm)
    out = SingularExpansion(
        coeff_inv_eps=float(coef[0]),
        coeff_log_eps=float(coef[1]),
        coeff_const=float(coef[2]),
        fit_residual=res,
        eps_grid=tuple(float(e) for e in eps),
        residual_tol=residual_tol,
        regular_terms=regular,
        regular_coeffs=tuple(float(c) for c in coef[3:]),
        condition_number=cond,
    )
    if strict and not out.valid:
        raise FitError(f"fit residual {res:.3g} exceeds {residual_tol:.3g}")
    return out

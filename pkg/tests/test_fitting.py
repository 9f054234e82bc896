import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rgflow.fitting import DEFAULT_REGULAR, FitError, eps_grid, singular_fit

coeff = st.floats(-1e3, 1e3, allow_nan=False).filter(lambda x: abs(x) > 1e-3 or x == 0)


def test_grid_contract():
    g = eps_grid(1.0)
    assert len(g) == 12
    assert np.all(np.diff(g) > 0)
    assert g[-1] / g[0] == pytest.approx(100.0)
    assert g[-1] == pytest.approx(1e-3)


@settings(max_examples=80, deadline=None)
@given(coeff, coeff, coeff)
def test_exact_on_basis_functions(a, b, c):
    eps = eps_grid(1.0)
    fit = singular_fit(lambda e: a / e + b * math.log(e) + c, eps)
    scale = max(abs(a) / eps[0], abs(b) * abs(math.log(eps[0])), abs(c), 1e-300)
    assert abs(fit.coeff_inv_eps - a) <= 1e-9 * scale * eps[0]
    assert abs(fit.coeff_log_eps - b) <= 1e-9 * scale
    assert abs(fit.coeff_const - c) <= 1e-9 * scale
    assert fit.fit_residual < 1e-10


@settings(max_examples=40, deadline=None)
@given(coeff, coeff, coeff, coeff)
def test_regular_terms_do_not_leak(b, c, d, f):
    eps = eps_grid(1.0)
    fit = singular_fit(
        lambda e: b * math.log(e) + c + d * e + f * e * e * math.log(e), eps, regular=DEFAULT_REGULAR
    )
    scale = max(abs(b), abs(c), abs(d), abs(f), 1.0)
    assert fit.coeff_log_eps == pytest.approx(b, abs=1e-7 * scale)
    assert fit.coeff_inv_eps == pytest.approx(0.0, abs=1e-9 * scale)


def test_log_of_ir_scale_lands_in_constant():
    for L in (0.5, 1.0, 7.0):
        eps = eps_grid(L)
        fit = singular_fit(lambda e: math.log(L / e), eps, ir_scale=L)
        assert fit.coeff_log_eps == pytest.approx(-1.0, rel=1e-12)
        assert fit.coeff_const == pytest.approx(math.log(L), abs=1e-10)


def test_non_basis_divergence_is_flagged():
    eps = eps_grid(1.0)
    fit = singular_fit(lambda e: 1 / e**2, eps)
    assert not fit.valid
    with pytest.raises(FitError):
        singular_fit(lambda e: 1 / e**2, eps, strict=True)


def test_preconditions():
    with pytest.raises(FitError):
        singular_fit([1, 2, 3], [1e-3, 2e-3, 3e-3])
    with pytest.raises(FitError):
        singular_fit(lambda e: e, np.geomspace(1e-3, 0.5, 8), ir_scale=1.0)
    with pytest.raises(FitError):
        singular_fit(lambda e: e, np.linspace(-1e-3, 1e-3, 8))
    with pytest.raises(FitError):
        singular_fit(lambda e: e, eps_grid(1.0), regular=[(0, 1)])
    with pytest.raises(FitError):
        singular_fit(lambda e: e, np.full(8, 1e-3))  # singular design matrix


def test_to_dict_and_singular_part():
    fit = singular_fit(lambda e: 2 / e - 3 * math.log(e), eps_grid(1.0))
    d = fit.to_dict()
    assert d["valid"] and set(d) >= {"coeff_inv_eps", "coeff_log_eps", "coeff_const", "fit_residual"}
    assert fit.singular_part(1e-4) == pytest.approx(2e4 - 3 * math.log(1e-4))

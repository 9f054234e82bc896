import math

import numpy as np
import pytest

from rgflow.geometry import curvature_at, flat, hyperbolic, sphere, torus_conformal
from rgflow.schwinger import KernelSpec
from rgflow.sigma import (
    _obstruction_integrand,
    beta_field_csv,
    multi_vertex_wheels_finite,
    obstruction_constant,
    obstruction_fit,
    sigma_beta,
    sigma_beta_field,
    tadpole_fit,
    tadpole_log_coefficient,
)

TWELVE_PI = 12 * math.pi


@pytest.mark.parametrize("eps,L", [(1e-3, 1.0), (1e-4, 0.3), (1e-2, 20.0)])
def test_tadpole_coefficient(eps, L):
    spec = KernelSpec(2, 0.0, eps, L)
    fit = tadpole_fit(spec)
    assert fit.fit_residual < 1e-10
    assert tadpole_log_coefficient(spec) == pytest.approx(-1 / (4 * math.pi), rel=1e-12)
    assert fit.coeff_const == pytest.approx(math.log(L) / (4 * math.pi), abs=1e-10)


def test_tadpole_needs_massless_two_dim():
    with pytest.raises(ValueError):
        tadpole_log_coefficient(KernelSpec(4))
    with pytest.raises(ValueError):
        tadpole_log_coefficient(KernelSpec(2, 1.0))


def test_flat_beta_is_zero():
    assert np.all(sigma_beta(flat(), [0.3, 0.1]).tensor == 0)


@pytest.mark.parametrize("r", [0.5, 1.0, 3.0])
def test_constant_curvature_beta(r):
    x = [0.2 * r, -0.1 * r]
    for chart, sign in ((sphere(r), -1), (hyperbolic(r), 1)):
        b = sigma_beta(chart, x)
        want = sign * chart(x) / (TWELVE_PI * r * r)
        assert np.abs(b.tensor - want).max() < 1e-6 * np.abs(want).max()


def test_pipeline_matches_ricci_oracle():
    chart = torus_conformal(0.15)
    for p in ([0.15, 0.3], [0.6, 0.3], [0.35, 0.8]):
        for method, tol in (("analytic", 1e-6), ("fd", 1e-4)):
            b = sigma_beta(chart, p, method=method)
            ric = curvature_at(chart, p, method="analytic").ricci
            assert np.abs(b.tensor + ric / TWELVE_PI).max() < tol * np.abs(ric / TWELVE_PI).max()


def test_beta_transforms_as_a_tensor():
    A = np.array([[0.9, 0.2], [0.1, 1.1]])
    chart = torus_conformal(0.1)
    x0 = np.array([0.4, 0.6])
    moved = chart.linear_pullback(A, origin=x0)
    direct = sigma_beta(moved, [0.0, 0.0]).tensor
    pulled = sigma_beta(chart, x0).transform(A).tensor
    assert np.allclose(direct, pulled, rtol=1e-10, atol=1e-14)
    assert np.array_equal(direct, direct.T)


def test_field_sweep_csv():
    chart = sphere(1.0)
    tensors = sigma_beta_field(chart, [[0, 0], [0.1, 0.2]], threads=2)
    text = beta_field_csv(tensors)
    lines = text.strip().splitlines()
    assert lines[0] == "x0,x1,beta_00,beta_01,beta_11"
    assert len(lines) == 3
    assert float(lines[1].split(",")[2]) == pytest.approx(-4 / TWELVE_PI)


@pytest.mark.parametrize("k", [2, 3])
def test_multi_vertex_wheels_are_finite(k):
    res = multi_vertex_wheels_finite(k=k)
    assert res.finite
    assert abs(res.fit.coeff_log_eps) < 1e-8 and abs(res.fit.coeff_inv_eps) < 1e-8
    assert res.weight.value > 0


def test_tadpole_is_the_contrast_case():
    res = multi_vertex_wheels_finite(k=1)
    assert not res.finite
    assert res.fit.coeff_log_eps == pytest.approx(-1 / (4 * math.pi), rel=1e-10)


@pytest.mark.parametrize("L", [1.0, 0.4, 5.0])
def test_obstruction_constant(L):
    val = obstruction_constant(KernelSpec(2, 0.0, 1e-3, L))
    assert val == pytest.approx(-math.log(2) / (4 * math.pi), abs=1e-6)


def test_obstruction_sweep_matches_closed_form():
    spec = KernelSpec(2)
    fit = obstruction_fit(spec)
    for e in fit.eps_grid[::4]:
        want = math.log((1.0 + e) / (2 * e)) / (4 * math.pi)
        assert _obstruction_integrand(e, 1.0) == pytest.approx(want, rel=1e-11)
    assert fit.coeff_log_eps == pytest.approx(-1 / (4 * math.pi), rel=1e-9)

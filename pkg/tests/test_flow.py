import math
from fractions import Fraction

import pytest
import sympy as sp

from rgflow.flow import (
    FunctionalSeries,
    ScaleVarianceError,
    ScalingAction,
    beta_lambda_diagnostic,
    beta_one_loop,
    check_hrge,
    counterterm_log,
    flow_contributions,
    load_theory,
    rg_flow,
    scalar_theory,
    scaling_weight,
    symbolic_beta,
    symbolic_counterterm_log,
    wheel_log_coefficient,
)
from rgflow.schwinger import KernelSpec


def test_series_validation():
    with pytest.raises(ValueError):
        FunctionalSeries({(0, 2): 1.0})
    F = FunctionalSeries({(0, 3): 2.0, (1, 1): 0.5, (2, 2): 9.0, (1, 4): 0.0})
    assert F.couplings == {(0, 3): 2.0, (1, 1): 0.5}
    assert F.monomial(0, 3) == pytest.approx(2.0 / 6)
    assert F[(5, 5)] == 0.0


def test_load_theory():
    F, dim, mass = load_theory({"dimension": 6, "mass": 0.5, "couplings": [{"g": 0, "k": 3, "c": 2.0}]})
    assert (dim, mass, F.couplings) == (6, 0.5, {(0, 3): 2.0})
    with pytest.raises(ValueError):
        load_theory({"couplings": []})
    with pytest.raises(KeyError):
        scalar_theory("phi5")


@pytest.mark.parametrize("n,k,w", [(4, 4, 0), (6, 3, 0), (4, 3, 1), (6, 4, -2), (2, 7, 2)])
def test_scaling_weight(n, k, w):
    assert scaling_weight(n, k) == w


def test_gauge_fixing_dimension():
    assert ScalingAction(4).k_gf == 1 and ScalingAction(6).k_gf == 2
    assert isinstance(ScalingAction(2).k_gf, Fraction) and ScalingAction(2).k_gf == 0


# -- flow -------------------------------------------------------------------------


def test_tree_level_exchange():
    # phi^3 exchange: three channels, each with the integrated propagator L - eps
    F, _ = scalar_theory("phi3", 1.5)
    spec = KernelSpec(6, 0.0, 1e-2, 1.0)
    W = rg_flow(FunctionalSeries(F.couplings, hbar_truncation=0), spec, 2)
    assert W[(0, 4)] == pytest.approx(3 * 1.5**2 * (1.0 - 1e-2), rel=1e-14)
    assert W[(0, 3)] == 1.5


def test_contributions_scale_with_vertex_count():
    spec = KernelSpec(4, 0.3, 1e-2, 1.0)
    a = flow_contributions(scalar_theory("phi4", 1.0)[0], spec, 2)
    b = flow_contributions(scalar_theory("phi4", 2.0)[0], spec, 2)
    for (ca, va), (cb, vb) in zip(a, b):
        assert ca.key == cb.key
        assert vb == pytest.approx(va * 2**ca.n_vertices, rel=1e-12)


def test_rg_flow_truncation_limits():
    spec = KernelSpec(4)
    with pytest.raises(ValueError):
        rg_flow(scalar_theory("phi4")[0], spec, 5)


@pytest.mark.parametrize("name", ["phi3", "phi4"])
@pytest.mark.parametrize("eps,L1,L2", [(1e-2, 0.1, 1.0), (1e-3, 0.3, 0.7), (5e-3, 0.05, 2.0)])
def test_hrge_semigroup(name, eps, L1, L2):
    F, dim = scalar_theory(name, 0.8)
    assert check_hrge(F, KernelSpec(dim, 0.0, eps, 1.0), L1, L2) < 1e-8


def test_hrge_massive_and_degenerate():
    F, dim = scalar_theory("phi3")
    spec = KernelSpec(dim, 1.2, 1e-2, 1.0)
    assert check_hrge(F, spec, 0.2, 0.9) < 1e-8
    assert check_hrge(F, spec, 0.5, 0.5) == 0.0
    with pytest.raises(ValueError):
        check_hrge(F, spec, 0.5, 0.4)


# -- counterterms ------------------------------------------------------------------------


def test_wheel_log_coefficient_closed_form():
    assert wheel_log_coefficient(4, 2) == -1 / (16 * sp.pi**2)
    assert wheel_log_coefficient(6, 3) == -1 / (128 * sp.pi**3)
    assert wheel_log_coefficient(6, 4) == 0
    assert wheel_log_coefficient(5, 2) == 0
    m = sp.Symbol("m")
    assert sp.simplify(wheel_log_coefficient(6, 2, m) - m**2 / (64 * sp.pi**3)) == 0


def test_phi4_counterterm_matches_closed_form():
    F, dim = scalar_theory("phi4", 1.0)
    ct = counterterm_log(F, KernelSpec(dim))
    assert ct.fits[(1, 4)].valid
    assert ct.log.monomial(1, 4) == pytest.approx(-1 / (256 * math.pi**2), rel=1e-8)


def test_counterterm_scales_with_coupling():
    F, dim = scalar_theory("phi3", 2.0)
    ct = counterterm_log(F, KernelSpec(dim))
    exact = float(symbolic_counterterm_log(F, dim)[(1, 3)])
    assert ct.log[(1, 3)] == pytest.approx(exact, rel=1e-8)
    assert exact == pytest.approx(8 * float(symbolic_counterterm_log(scalar_theory("phi3")[0], dim)[(1, 3)]))


def test_quadratically_divergent_tadpole_is_flagged():
    F, dim = scalar_theory("phi3")
    ct = counterterm_log(F, KernelSpec(dim))
    assert (1, 1) in ct.invalid()
    assert ct.valid[(1, 3)]


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_mass_terms(m):
    F, dim = scalar_theory("phi3")
    ct0 = counterterm_log(F, KernelSpec(dim))
    ct = counterterm_log(F, KernelSpec(dim, m))
    assert ct.log[(1, 3)] == pytest.approx(ct0.log[(1, 3)], rel=1e-6)
    exact = symbolic_counterterm_log(F, dim, mass=m)
    assert ct.log[(1, 2)] == pytest.approx(float(exact[(1, 2)]), rel=1e-6)
    assert ct0.log[(1, 2)] == pytest.approx(0.0, abs=1e-15)


def test_reducible_graphs_optional():
    F, dim = scalar_theory("phi4")
    a = counterterm_log(F, KernelSpec(dim), 2)
    b = counterterm_log(F, KernelSpec(dim), 2, irreducible_only=False)
    assert set(a.fits) <= set(b.fits)
    assert a.irreducible_only and not b.irreducible_only


# -- beta ------------------------------------------------------------------------------------


def test_beta_phi4():
    F, dim = scalar_theory("phi4")
    b = beta_one_loop(F, KernelSpec(dim))
    assert b.k_gf == 1
    assert b.monomial(1, 4) == pytest.approx(-1 / (256 * math.pi**2), rel=1e-8)
    md = b.metadata()
    assert md["scheme"] == "eps-inverse+log" and md["convention"] == "constant-field"


def test_beta_symbolic_routes():
    assert symbolic_beta(scalar_theory("phi4")[0], 4) == {(1, 4): -1 / (256 * sp.pi**2)}
    assert symbolic_beta(scalar_theory("phi3")[0], 6) == {(1, 3): -1 / (2**22 * sp.pi**3)}


def test_beta_numeric_matches_symbolic_phi3():
    F, dim = scalar_theory("phi3", 1.3)
    b = beta_one_loop(F, KernelSpec(dim))
    assert b.k_gf == 2
    assert b.monomial(1, 3) == pytest.approx(float(symbolic_beta(F, dim)[(1, 3)]), rel=1e-7)


def test_scale_variance():
    F, _ = scalar_theory("phi3")
    with pytest.raises(ScaleVarianceError):
        beta_one_loop(F, KernelSpec(4))
    assert beta_one_loop(F, KernelSpec(4), restrict=True).coefficients == {}


def test_lambda_diagnostic_matches_beta():
    F, dim = scalar_theory("phi4")
    spec = KernelSpec(dim)
    beta = beta_one_loop(F, spec).coefficients[(1, 4)]
    assert beta_lambda_diagnostic(F, spec, 4) == pytest.approx(beta, rel=1e-3)

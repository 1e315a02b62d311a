import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kirchhoff_lab import (
    App1Params,
    App2Params,
    InfeasibleError,
    InvalidDomainError,
    KirchhoffTerm,
    app1_build,
    app2_build,
    build_grid,
    run_application,
)
from kirchhoff_lab.applications import minimize_psi, psi_coefficients, scan_delta
from kirchhoff_lab.grid import ScalarField
from kirchhoff_lab.ordering import check_order, verify_subsolution

M1 = KirchhoffTerm.affine(1, 0)


def psi_min_closed_form(c1, c2, q, p):
    """Stationary point of c1 S^(q-1) + c2 S^(p-1)."""
    S = ((1 - q) * c1 / ((p - 1) * c2)) ** (1 / (p - q))
    return S, c1 * S ** (q - 1) + c2 * S ** (p - 1)


def test_psi_continuum_oracle():
    # sup e = 1/8 and sup |e'| = 1/2 on (0, 1)
    c1 = 0.1 * 0.125**0.5 + 0.1 * 0.5**0.5
    c2 = 0.125**2
    assert c1 == pytest.approx(0.106066, abs=1e-6) and c2 == 0.015625
    S, val = minimize_psi(c1, c2, 0.5, 2.0)
    assert S == pytest.approx(2.26, abs=1e-2)
    assert val == pytest.approx(0.106, abs=1e-3)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.05, 0.95), st.floats(1.05, 5.0))
def test_psi_matches_closed_form(c1, c2, q, p):
    S, val = minimize_psi(c1, c2, q, p)
    S0, val0 = psi_min_closed_form(c1, c2, q, p)
    assert val == pytest.approx(val0, rel=1e-9)
    assert S == pytest.approx(S0, rel=1e-4)


def test_app1_build_discrete_psi(line199):
    b = app1_build(line199, App1Params(0.1, 0.1, 0.5, 2.0, M1))
    c1, c2 = psi_coefficients(b.barriers.upper.with_values(b.barriers.upper.values / b.S), 0.1, 0.1, 0.5, 2.0)
    S0, val0 = psi_min_closed_form(c1, c2, 0.5, 2.0)
    assert b.psi_min == pytest.approx(val0, rel=1e-10)
    assert b.S == pytest.approx(S0, rel=1e-5)
    assert b.psi_min <= M1.m
    assert 0 < b.delta <= 1


def test_app1_infeasible(line199):
    with pytest.raises(InfeasibleError, match="infeasible: min psi > m"):
        app1_build(line199, App1Params(1e3, 1e3, 0.5, 2.0, M1))


def test_app1_infeasible_before_solve(line199, monkeypatch):
    import kirchhoff_lab.applications as apps

    monkeypatch.setattr(apps, "solve_P", lambda *a, **k: pytest.fail("solver should not run"))
    with pytest.raises(InfeasibleError):
        run_application("app1", line199, App1Params(1e3, 1e3, 0.5, 2.0, M1))


def test_app1_feasibility_monotone():
    g = build_grid(1, 1.0, 63)
    from kirchhoff_lab.grid import field_norms
    from kirchhoff_lab.linalg import solve_poisson_unit

    e = solve_poisson_unit(g)
    lams = [0.05, 0.5, 2.0, 5.0, 20.0]
    feasible = [[minimize_psi(*psi_coefficients(e, lam, mu, 0.5, 2.0), 0.5, 2.0)[1] <= 1.0 for mu in lams] for lam in lams]
    feasible = np.array(feasible)
    # feasibility is a down-set in (lambda, mu)
    for i in range(len(lams)):
        for j in range(len(lams)):
            if feasible[i, j]:
                assert feasible[: i + 1, : j + 1].all()
    assert feasible[0, 0] and not feasible[-1, -1]


@pytest.mark.parametrize("which", ["app1", "app2"])
def test_halving_keeps_passing(line199, which):
    if which == "app1":
        b = app1_build(line199, App1Params(0.1, 0.1, 0.5, 2.0, M1))
    else:
        b = app2_build(line199, App2Params(10.0, 1.0, 0.5, 2.0, KirchhoffTerm.affine(1, 1)))
    phi = b.eigen.phi1
    for k in range(8):
        low = phi.with_values(b.delta * 0.5**k * phi.values)
        assert verify_subsolution(low, b.reaction, b.alpha).passed
        assert check_order(low, b.barriers.upper).passed


def test_app2_build(line199):
    b = app2_build(line199, App2Params(10.0, 1.0, 0.5, 2.0, KirchhoffTerm.affine(1, 1)))
    assert b.alpha == 2.0
    assert 0 < b.delta <= 1
    assert np.all(b.barriers.upper.values == 1.0) and b.barriers.upper.faces == (1.0, 1.0)


def test_app2_without_logistic_term_is_infeasible():
    g = build_grid(1, 1.0, 31)
    with pytest.raises(InfeasibleError, match="infeasible subsolution"):
        app2_build(g, App2Params(0.0, 1.0, 0.5, 2.0, KirchhoffTerm.affine(1, 1)))


def test_scan_delta_returns_first_passing(line199):
    b = app2_build(line199, App2Params(10.0, 1.0, 0.5, 2.0, KirchhoffTerm.affine(1, 1)))
    delta, k = scan_delta(b.eigen.phi1, b.barriers.upper, b.reaction, b.alpha)
    assert delta == 0.5**k == b.delta
    if k > 0:
        low = b.eigen.phi1.with_values(2 * delta * b.eigen.phi1.values)
        assert not (verify_subsolution(low, b.reaction, b.alpha).passed and check_order(low, b.barriers.upper).passed)


@pytest.mark.parametrize(
    "build",
    [
        lambda: App1Params(0.0, 0.1, 0.5, 2.0, M1),
        lambda: App1Params(0.1, 0.1, 1.0, 2.0, M1),
        lambda: App1Params(0.1, 0.1, 0.5, 0.9, M1),
        lambda: App2Params(-1.0, 1.0, 0.5, 2.0, M1),
        lambda: App2Params(1.0, 1.0, 0.5, 2.5, M1),
        lambda: App2Params(1.0, 0.0, 0.5, 2.0, M1),
    ],
)
def test_params_invalid(build):
    with pytest.raises(InvalidDomainError):
        build()


@pytest.fixture(scope="module")
def app1_square():
    g = build_grid(2, [1.0, 1.0], [31, 31])
    return run_application("app1", g, App1Params(0.1, 0.1, 0.5, 2.0, KirchhoffTerm.affine(1, 1)))


def test_app1_square_invariants(app1_square):
    rep, build = app1_square
    tol = rep.extra["order_tol"]
    assert rep.accepted
    assert np.min(rep.u.values) > 0
    assert np.max(rep.u.values) <= build.S * build.extra["e_sup"] + tol
    assert rep.margin_lower >= -tol and rep.margin_upper >= -tol
    assert rep.R_final == rep.extra["R_initial"]
    assert all(c["pass"] for c in rep.extra["checks"].values())


def test_app2_invariants(line199):
    rep, build = run_application("app2", line199, App2Params(10.0, 1.0, 0.5, 2.0, KirchhoffTerm.affine(1, 1)))
    tol = rep.extra["order_tol"]
    assert rep.accepted
    assert np.all(rep.u.values >= build.barriers.lower.values - tol)
    assert np.all(rep.u.values <= 1.0 + tol)
    assert np.min(rep.u.values) > 0


def test_unknown_application(line199):
    with pytest.raises(InvalidDomainError):
        run_application("app3", line199, None)

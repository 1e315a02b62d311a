"""Barrier construction and end-to-end runs for the two model problems.

Model 1: ``lam u^q + u^p + mu |grad u|^q`` with ``0 < q < 1 < p``; upper
barrier ``S e`` (``e`` the torsion function), lower barrier ``delta phi_1``.

Model 2: ``A u^q (B - u) + |grad u|^eta``; upper barrier the constant ``B``,
lower barrier ``delta phi_1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InfeasibleError, InvalidDomainError
from .grid import Grid, ScalarField, field_norms
from .linalg import EigenPair, principal_eigenpair, solve_poisson_unit
from .nonlinearity import BarrierPair, KirchhoffTerm, ReactionSpec, app1_reaction, app2_reaction
from .ordering import check_order, verify_subsolution, verify_supersolution
from .solver import SolveReport, SolverConfig, solve_P

log = logging.getLogger(__name__)

MAX_HALVINGS = 60


@dataclass(frozen=True)
class App1Params:
    lam: float
    mu: float
    q: float
    p: float
    M: KirchhoffTerm

    def __post_init__(self):
        if not (self.lam > 0 and self.mu > 0):
            raise InvalidDomainError("lambda and mu must be positive")
        if not 0 < self.q < 1 < self.p:
            raise InvalidDomainError(f"need 0 < q < 1 < p, got q={self.q}, p={self.p}")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "mu": self.mu, "q": self.q, "p": self.p, "M": self.M.to_dict()}


@dataclass(frozen=True)
class App2Params:
    A: float
    B: float
    q: float
    eta: float
    M: KirchhoffTerm

    def __post_init__(self):
        # A = 0 is allowed so the degenerate case reaches the subsolution scan.
        if self.A < 0 or not self.B > 0:
            raise InvalidDomainError("need A >= 0 and B > 0")
        if not 0 < self.q < 1:
            raise InvalidDomainError(f"q must lie in (0, 1), got {self.q}")
        if not 1 < self.eta <= 2:
            raise InvalidDomainError(f"eta must lie in (1, 2], got {self.eta}")

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "q": self.q, "eta": self.eta, "M": self.M.to_dict()}


@dataclass
class BuildResult:
    barriers: BarrierPair
    reaction: ReactionSpec
    delta: float
    alpha: float
    eigen: EigenPair
    S: Optional[float] = None
    psi_min: Optional[float] = None
    halvings: int = 0
    extra: dict = field(default_factory=dict)


def psi_coefficients(e: ScalarField, lam: float, mu: float, q: float, p: float) -> tuple:
    """``(c1, c2)`` with ``psi(S) = c1 S^(q-1) + c2 S^(p-1)``."""
    norms = field_norms(e)
    c1 = lam * norms.sup_norm**q + mu * norms.grad_sup_norm**q
    c2 = norms.sup_norm**p
    return c1, c2


def minimize_psi(c1: float, c2: float, q: float, p: float) -> tuple:
    """Golden-section minimisation of ``psi`` over ``log S``; returns ``(S, psi(S))``."""
    psi_log = lambda z: c1 * np.exp((q - 1.0) * z) + c2 * np.exp((p - 1.0) * z)
    zs = np.linspace(-40.0, 40.0, 801)
    vals = psi_log(zs)
    i = int(np.clip(np.argmin(vals), 1, len(zs) - 2))
    res = minimize_scalar(psi_log, bracket=(zs[i - 1], zs[i], zs[i + 1]), method="golden", tol=1e-12)
    return float(np.exp(res.x)), float(res.fun)


def scan_delta(phi1: ScalarField, upper: ScalarField, reaction: ReactionSpec, alpha: float, start: float = 1.0) -> tuple:
    """Halve ``delta`` from ``start`` until ``delta phi1`` is a subsolution below ``upper``.

    Returns ``(delta, halvings)``.
    """
    delta = start
    for k in range(MAX_HALVINGS + 1):
        low = phi1.with_values(delta * phi1.values)
        if verify_subsolution(low, reaction, alpha).passed and check_order(low, upper).passed:
            return delta, k
        delta *= 0.5
    raise InfeasibleError(f"infeasible subsolution: no delta >= {start * 0.5**MAX_HALVINGS:.3g} passes")


def app1_build(grid: Grid, params: App1Params, eig_tol: float = 1e-8) -> BuildResult:
    """Upper barrier ``S* e`` with ``S*`` minimising ``psi``, lower barrier ``delta phi_1``.

    Raises
    ------
    InfeasibleError
        If ``min psi > m`` (``lambda``, ``mu`` too large) or the ``delta``
        scan runs out of halvings.
    """
    m = params.M.m
    e = solve_poisson_unit(grid)
    c1, c2 = psi_coefficients(e, params.lam, params.mu, params.q, params.p)
    S, psi_min = minimize_psi(c1, c2, params.q, params.p)
    if psi_min > m:
        raise InfeasibleError(f"infeasible: min psi > m ({psi_min:.6g} > {m:.6g})")
    reaction = app1_reaction(params.lam, params.mu, params.q, params.p)
    upper = e.with_values(S * e.values)
    eig = principal_eigenpair(grid, eig_tol)
    alpha = params.M.max_on(0.0, 1.0)
    delta, halvings = scan_delta(eig.phi1, upper, reaction, alpha)
    lower = eig.phi1.with_values(delta * eig.phi1.values)
    return BuildResult(
        BarrierPair(lower, upper), reaction, delta, alpha, eig, S=S, psi_min=psi_min, halvings=halvings,
        extra={"e_sup": field_norms(e).sup_norm, "e_grad_sup": field_norms(e).grad_sup_norm},
    )


def app2_build(grid: Grid, params: App2Params, eig_tol: float = 1e-8) -> BuildResult:
    """Upper barrier the constant ``B`` (trace ``B``), lower barrier ``delta phi_1``."""
    reaction = app2_reaction(params.A, params.B, params.q, params.eta)
    upper = grid.field(np.full(grid.shape, params.B), boundary=params.B)
    eig = principal_eigenpair(grid, eig_tol)
    alpha = params.M.max_on(0.0, 1.0)
    delta, halvings = scan_delta(eig.phi1, upper, reaction, alpha)
    lower = eig.phi1.with_values(delta * eig.phi1.values)
    return BuildResult(BarrierPair(lower, upper), reaction, delta, alpha, eig, halvings=halvings)


def run_application(which: str, grid: Grid, params, cfg: SolverConfig | None = None) -> tuple:
    """Build barriers, solve, and re-check everything post hoc.

    The lower barrier is built with ``alpha = max_[0,1] M``.  After solving,
    the subsolution inequality is re-checked with ``alpha* = max_[0,s*] M``;
    if that fails, ``delta`` is halved further until it holds and the problem
    is solved once more from the previous solution.

    Returns ``(report, build)``.
    """
    cfg = SolverConfig() if cfg is None else cfg
    if which == "app1":
        build = app1_build(grid, params)
    elif which == "app2":
        build = app2_build(grid, params)
    else:
        raise InvalidDomainError(f"unknown application {which!r}")
    M = params.M
    report = solve_P(grid, M, build.reaction, cfg, build.barriers)
    delta_initial = build.delta
    alpha_star = M.max_on(0.0, report.s_star)
    if not verify_subsolution(build.barriers.lower, build.reaction, alpha_star).passed:
        log.info("lower barrier fails with alpha* = %.6g; shrinking delta", alpha_star)
        delta, extra_halvings = scan_delta(build.eigen.phi1, build.barriers.upper, build.reaction, alpha_star, build.delta)
        lower = build.eigen.phi1.with_values(delta * build.eigen.phi1.values)
        build = replace(build, barriers=BarrierPair(lower, build.barriers.upper), delta=delta, halvings=build.halvings + extra_halvings)
        report = solve_P(grid, M, build.reaction, cfg, build.barriers, report.u)
        alpha_star = M.max_on(0.0, report.s_star)

    tol = report.extra["order_tol"]
    b = build.barriers
    checks = {
        "order_lower": check_order(b.lower, report.u, tol).to_dict(),
        "order_upper": check_order(report.u, b.upper, tol).to_dict(),
        "supersolution": verify_supersolution(b.upper, build.reaction, M.m).to_dict(),
        "subsolution_alpha": verify_subsolution(b.lower, build.reaction, build.alpha).to_dict(),
        "subsolution_alpha_star": verify_subsolution(b.lower, build.reaction, alpha_star).to_dict(),
    }
    report.extra.update(
        application=which,
        alpha=build.alpha,
        alpha_star=alpha_star,
        delta=build.delta,
        delta_initial=delta_initial,
        delta_halvings=build.halvings,
        lambda1=build.eigen.lambda1,
        u_min=float(np.min(report.u.values)),
        u_max=float(np.max(report.u.values)),
        checks=checks,
    )
    if build.S is not None:
        report.extra.update(S=build.S, psi_min=build.psi_min)
    return report, build

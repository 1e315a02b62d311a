"""Nested solvers for the nonlocal problem ``-M(||grad u||^2) Lap u = f(x, u, grad u)``.

The nonlocal coefficient is handled by a scalar unknown ``s``: for a fixed
``s`` the problem ``-M(s) Lap u = F(x, u, grad u)`` is local and is solved by
damped Picard iteration; ``s`` is then pinned down by bisection on
``phi(s) = ||u_s||^2 - s``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import BracketError, GradientBoundError, InvalidDomainError, NoConvergenceError, OrderingError
from .grid import Grid, ScalarField, energy_product, field_norms, gradient_values, integrate, neg_laplacian_values
from .linalg import cg_arrays, neg_laplacian_operator
from .nonlinearity import (
    BarrierPair,
    KirchhoffTerm,
    ReactionSpec,
    TruncationConfig,
    envelope_sup,
    eval_f_R,
    eval_gamma_R,
    eval_z_R,
    truncation_factor,
)

log = logging.getLogger(__name__)

Reaction = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SolverConfig:
    lin_tol: float = 1e-10
    picard_tol: float = 1e-8
    picard_damping: float = 0.7
    outer_tol: float = 1e-8
    max_inner: int = 2000
    max_outer: int = 200
    R_initial: Optional[float] = None
    R_growth: float = 2.0
    R_max_doublings: int = 12
    l: float = 0.5
    order_tol_rel: float = 1e-6
    order_tol: Optional[float] = None

    def __post_init__(self):
        for name in ("lin_tol", "picard_tol", "outer_tol", "order_tol_rel"):
            if not getattr(self, name) > 0:
                raise InvalidDomainError(f"{name} must be positive")
        if not 0.0 < self.picard_damping <= 1.0:
            raise InvalidDomainError("picard_damping must lie in (0, 1]")
        if self.R_growth <= 1.0:
            raise InvalidDomainError("R_growth must exceed 1")
        if self.R_initial is not None and self.R_initial <= 0:
            raise InvalidDomainError("R_initial must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveReport:
    u: ScalarField
    s_star: float
    residual_sup: float
    iters_inner: int
    iters_outer: int
    grad_sup: float
    h1_seminorm_sq: float
    R_final: Optional[float] = None
    apriori_K: Optional[float] = None
    margin_lower: Optional[float] = None
    margin_upper: Optional[float] = None
    accepted: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "s_star": self.s_star,
            "residual_sup": self.residual_sup,
            "iters_inner": self.iters_inner,
            "iters_outer": self.iters_outer,
            "R_final": self.R_final,
            "grad_sup": self.grad_sup,
            "margin_lower": self.margin_lower,
            "margin_upper": self.margin_upper,
            "apriori_K": self.apriori_K,
            "accepted": self.accepted,
            "h1_seminorm_sq": self.h1_seminorm_sq,
        }
        out.update(self.extra)
        return out


class PicardResult(NamedTuple):
    u: ScalarField
    iterations: int
    update: float
    residual_sup: float


def _grad(grid: Grid, values: np.ndarray) -> np.ndarray:
    return gradient_values(ScalarField(grid, values))


def nodal_residual(grid: Grid, c: float, F: Reaction, u: ScalarField) -> float:
    """``max_i |c (-Lap u)_i - F(x_i, u_i, (grad u)_i)|``."""
    rhs = F(grid.points(), u.values, gradient_values(u))
    return float(np.max(np.abs(c * neg_laplacian_values(u) - rhs)))


def semilinear_picard(grid: Grid, c: float, F: Reaction, cfg: SolverConfig, u0: ScalarField | None = None) -> PicardResult:
    """Damped Picard iteration for ``-c Lap u = F(x, u, grad u)``, zero Dirichlet data.

    Each step solves the linear problem with CG (warm-started from the current
    iterate) and relaxes by ``cfg.picard_damping``; stops once the sup-norm
    update drops below ``cfg.picard_tol``.
    """
    if not c > 0:
        raise InvalidDomainError(f"diffusion coefficient must be positive, got {c}")
    A = neg_laplacian_operator(grid, c)
    pts = grid.points()
    theta = cfg.picard_damping
    u = np.zeros(grid.shape) if u0 is None else np.array(u0.values, dtype=float)
    max_cg = 10 * grid.size
    update = np.inf
    for k in range(1, cfg.max_inner + 1):
        rhs = F(pts, u, _grad(grid, u))
        w, _, _ = cg_arrays(A.apply, rhs, cfg.lin_tol, max_cg, u)
        u_new = (1.0 - theta) * u + theta * w
        update = float(np.max(np.abs(u_new - u)))
        u = u_new
        if update <= cfg.picard_tol:
            break
    else:
        field_ = ScalarField(grid, u)
        raise NoConvergenceError(
            f"Picard iteration stalled after {cfg.max_inner} steps (last update {update:.3e})",
            residual=nodal_residual(grid, c, F, field_),
            last=field_,
            iterations=cfg.max_inner,
        )
    field_ = ScalarField(grid, u)
    return PicardResult(field_, k, update, nodal_residual(grid, c, F, field_))


def kirchhoff_fixed_point(
    grid: Grid,
    M: KirchhoffTerm,
    F: Reaction,
    cfg: SolverConfig,
    s_hi: float | None = None,
    u0: ScalarField | None = None,
) -> SolveReport:
    """Solve ``-M(||u||^2) Lap u = F`` by bisection on the scalar ``s = ||u||^2``.

    ``s_hi`` is the upper end of the bracket; when omitted it is twice the
    energy of the ``s = 0`` solution.  If ``phi(s_hi) > 0`` the bracket is
    enlarged tenfold once before giving up with :class:`BracketError`.
    """
    state = {"u": u0, "inner": 0}
    samples = {}

    def phi(s):
        res = semilinear_picard(grid, M(s), F, cfg, state["u"])
        state["u"] = res.u
        state["inner"] += res.iterations
        energy = energy_product(res.u, res.u)
        samples[s] = energy - s
        return energy - s, res

    def finish(s, res, outer):
        norms = field_norms(res.u)
        residual = nodal_residual(grid, M(norms.h1_seminorm_sq), F, res.u)
        return SolveReport(
            u=res.u,
            s_star=float(s),
            residual_sup=residual,
            iters_inner=state["inner"],
            iters_outer=outer,
            grad_sup=norms.grad_sup_norm,
            h1_seminorm_sq=norms.h1_seminorm_sq,
            extra={"phi_monotone": _phi_monotone(samples)},
        )

    phi0, res0 = phi(0.0)
    if phi0 <= cfg.outer_tol:
        return finish(0.0, res0, 0)
    hi = 2.0 * phi0 + cfg.outer_tol if s_hi is None else float(s_hi)
    phi_hi, res_hi = phi(hi)
    if phi_hi > 0:
        hi *= 10.0
        log.info("enlarging outer bracket to %.6g", hi)
        phi_hi, res_hi = phi(hi)
        if phi_hi > 0:
            raise BracketError(f"phi(s) = ||u_s||^2 - s is still positive at s_hi = {hi:.6g}")
    if abs(phi_hi) <= cfg.outer_tol:
        return finish(hi, res_hi, 0)

    lo = 0.0
    best = (abs(phi0), 0.0, res0)
    for k in range(1, cfg.max_outer + 1):
        mid = 0.5 * (lo + hi)
        pm, res = phi(mid)
        if abs(pm) < best[0]:
            best = (abs(pm), mid, res)
        if abs(pm) <= cfg.outer_tol:
            return finish(mid, res, k)
        if pm > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, hi):
            break
    raise NoConvergenceError(
        f"outer bisection stopped with |phi| = {best[0]:.3e} > outer_tol",
        residual=best[0],
        last=best[2].u,
        iterations=k,
    )


def _phi_monotone(samples: dict) -> bool:
    """Whether the sampled ``phi`` values are nonincreasing in ``s``."""
    ss = sorted(samples)
    vals = np.array([samples[s] for s in ss])
    return bool(np.all(np.diff(vals) <= 1e-10 * max(1.0, float(np.max(np.abs(vals))))))


def order_tolerance(barriers: BarrierPair, cfg: SolverConfig) -> float:
    if cfg.order_tol is not None:
        return float(cfg.order_tol)
    return cfg.order_tol_rel * max(float(np.max(np.abs(barriers.upper.values))), 1e-300)


def penalized_reaction(f: ReactionSpec, trunc: TruncationConfig, barriers: BarrierPair) -> Reaction:
    """``z_R(x, t, y) - gamma_R(x, t)`` on all nodes of the barrier grid."""

    def F(x, t, y):
        return eval_z_R(f, trunc, barriers, t, y) - eval_gamma_R(trunc, barriers, t)

    return F


def band_bound(f: ReactionSpec, trunc: TruncationConfig, barriers: BarrierPair) -> float:
    """Truncated-reaction bound over the band plus the penalty over one band width."""
    grid = barriers.grid
    sup_h = envelope_sup(f, grid.points(), barriers.lower.values, barriers.upper.values)
    width = float(np.max(barriers.upper.values - barriers.lower.values))
    return sup_h * truncation_factor(trunc.R, f.eta, grid.dim) + width**trunc.l


def solve_auxiliary_B(
    grid: Grid,
    M: KirchhoffTerm,
    f: ReactionSpec,
    cfg: SolverConfig,
    trunc: TruncationConfig,
    barriers: BarrierPair,
    u0: ScalarField | None = None,
) -> SolveReport:
    """Solve the penalised, frozen problem and check the solution stays in the band.

    Raises
    ------
    OrderingError
        If the solution leaves ``[lower, upper]`` by more than the ordering
        tolerance, which means the barrier inequalities fail numerically.
    """
    if barriers.grid != grid:
        raise InvalidDomainError("barriers live on a different grid")
    F = penalized_reaction(f, trunc, barriers)
    c_band = band_bound(f, trunc, barriers)
    l1_upper = integrate(np.abs(barriers.upper.values), grid)
    s_hi = 2.0 * (c_band * grid.measure / M.m) * max(1.0, l1_upper)
    if u0 is None:
        u0 = grid.field(0.5 * (barriers.lower.values + barriers.upper.values))
    rep = kirchhoff_fixed_point(grid, M, F, cfg, s_hi=s_hi, u0=u0)

    tol = order_tolerance(barriers, cfg)
    gap_upper = barriers.upper.values - rep.u.values
    gap_lower = rep.u.values - barriers.lower.values
    rep.margin_upper = float(np.min(gap_upper))
    rep.margin_lower = float(np.min(gap_lower))
    rep.R_final = trunc.R
    rep.extra.update(
        order_tol=tol,
        penalty_max=float(np.max(np.abs(eval_gamma_R(trunc, barriers, rep.u.values)))),
        l=trunc.l,
    )
    for gap, side in ((gap_upper, "upper"), (gap_lower, "lower")):
        if np.min(gap) < -tol:
            worst = tuple(int(i) for i in np.unravel_index(int(np.argmin(gap)), gap.shape))
            raise OrderingError(
                f"solution crosses the {side} barrier by {-np.min(gap):.3e} at node {worst}",
                worst_node=worst,
                margin=float(np.min(gap)),
            )
    return rep


def apriori_bound(f: ReactionSpec, M: KirchhoffTerm, R: float, barriers: BarrierPair) -> float:
    """``K = C1 int |upper| / m`` with ``C1`` the truncated-reaction bound on ``[0, sup upper]``."""
    grid = barriers.grid
    t_hi = float(np.max(barriers.upper.values))
    t_lo = min(0.0, float(np.min(barriers.lower.values)))
    c1 = envelope_sup(f, grid.points(), t_lo, t_hi) * truncation_factor(R, f.eta, grid.dim)
    return c1 * integrate(np.abs(barriers.upper.values), grid) / M.m


def initial_radius(barriers: BarrierPair) -> float:
    grads = [np.max(np.sqrt(np.sum(g**2, axis=-1))) for g in (barriers.lower_grad, barriers.upper_grad)]
    return float(max(1.0, *grads))


def solve_P(
    grid: Grid,
    M: KirchhoffTerm,
    f: ReactionSpec,
    cfg: SolverConfig,
    barriers: BarrierPair,
    u0: ScalarField | None = None,
) -> SolveReport:
    """Solve the original problem by growing the truncation radius until it is inactive.

    Each round solves the penalised problem with radius ``R``; the result is
    accepted once ``max |grad u| <= R``, where truncation changes nothing.
    """
    R_barrier = initial_radius(barriers)
    R = R_barrier if cfg.R_initial is None else float(cfg.R_initial)
    if R < R_barrier - 1e-12:
        raise InvalidDomainError(f"R_initial = {R} is below the barrier gradient bound {R_barrier:.6g}")
    R_initial = R
    inner = outer = 0
    for doublings in range(cfg.R_max_doublings + 1):
        trunc = TruncationConfig(R, cfg.l)
        rep = solve_auxiliary_B(grid, M, f, cfg, trunc, barriers, u0)
        inner += rep.iters_inner
        outer += rep.iters_outer
        log.info("R = %.6g: s* = %.6g, max|grad u| = %.6g", R, rep.s_star, rep.grad_sup)
        if rep.grad_sup <= R:
            break
        u0 = rep.u
        R *= cfg.R_growth
    else:
        raise GradientBoundError(
            f"max |grad u| = {rep.grad_sup:.6g} still exceeds R = {R / cfg.R_growth:.6g} after {cfg.R_max_doublings} doublings"
        )
    rep.iters_inner, rep.iters_outer = inner, outer
    rep.accepted = True
    rep.apriori_K = apriori_bound(f, M, R, barriers)
    grad = gradient_values(rep.u)
    pts = grid.points()
    rep.extra.update(
        R_initial=R_initial,
        R_doublings=doublings,
        apriori_ok=bool(M.m * rep.h1_seminorm_sq <= M.m * rep.apriori_K * (1 + 1e-12)),
        truncation_inactive=bool(np.array_equal(eval_f_R(f, trunc, pts, rep.u.values, grad), f(pts, rep.u.values, grad))),
        residual_P=nodal_residual(grid, M(rep.h1_seminorm_sq), lambda x, t, y: f(x, t, y), rep.u),
        alpha_star=M.max_on(0.0, rep.s_star),
    )
    return rep

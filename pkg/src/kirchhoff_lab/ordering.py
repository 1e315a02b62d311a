"""Nodal checks of barrier inequalities, band ordering, and operator structure.

Failures here are reported, not raised: every check returns a small report
object with a pass flag and the worst node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidDomainError
from .grid import Grid, ScalarField, _check_same_grid, energy_product, gradient_values, neg_laplacian_values
from .nonlinearity import BarrierPair, KirchhoffTerm, ReactionSpec, TruncationConfig, eval_gamma_R, eval_z_R


@dataclass(frozen=True)
class CheckReport:
    passed: bool
    worst_node: tuple
    worst_margin: float

    def to_dict(self) -> dict:
        return {"pass": self.passed, "worst_node": list(self.worst_node), "worst_margin": self.worst_margin}


def _worst(margin: np.ndarray) -> tuple:
    idx = np.unravel_index(int(np.argmin(margin)), margin.shape)
    return tuple(int(i) for i in idx), float(margin[idx])


def verify_supersolution(ubar: ScalarField, f: ReactionSpec, m: float, tol: float = 0.0) -> CheckReport:
    """``(-Lap ubar)_i >= f(x_i, ubar_i, (grad ubar)_i) / m - tol`` at every node, trace >= 0."""
    lhs = neg_laplacian_values(ubar)
    rhs = f(ubar.grid.points(), ubar.values, gradient_values(ubar)) / m
    node, margin = _worst(lhs - rhs)
    return CheckReport(margin >= -tol and min(ubar.faces) >= 0, node, margin)


def verify_subsolution(ulow: ScalarField, f: ReactionSpec, alpha: float, tol: float = 0.0) -> CheckReport:
    """``(-Lap ulow)_i <= f(x_i, ulow_i, (grad ulow)_i) / alpha + tol`` at every node."""
    if not ulow.zero_trace:
        raise InvalidDomainError("subsolution candidates must vanish on the boundary")
    lhs = neg_laplacian_values(ulow)
    rhs = f(ulow.grid.points(), ulow.values, gradient_values(ulow)) / alpha
    node, margin = _worst(rhs - lhs)
    return CheckReport(margin >= -tol, node, margin)


@dataclass(frozen=True)
class OrderReport:
    passed: bool
    min_gap: float
    argmin_node: tuple

    def to_dict(self) -> dict:
        return {"pass": self.passed, "min_gap": self.min_gap, "argmin_node": list(self.argmin_node)}


def check_order(lower: ScalarField, upper: ScalarField, tol: float = 0.0) -> OrderReport:
    _check_same_grid(lower, upper)
    node, gap = _worst(upper.values - lower.values)
    return OrderReport(gap >= -tol, gap, node)


def operator_pairing(M: KirchhoffTerm, u: ScalarField, w: ScalarField) -> float:
    """``<L u, w> = M(||u||^2) * (grad u, grad w)``."""
    return M(energy_product(u, u)) * energy_product(u, w)


def b_pairing(M: KirchhoffTerm, f: ReactionSpec, trunc: TruncationConfig, barriers: BarrierPair, w: ScalarField) -> float:
    """``<B(w), w>`` for the penalised operator."""
    grad = gradient_values(w)
    z = eval_z_R(f, trunc, barriers, w.values, grad)
    g = eval_gamma_R(trunc, barriers, w.values)
    vol = w.grid.cell_volume
    return operator_pairing(M, w, w) - vol * float(np.sum(z * w.values)) + vol * float(np.sum(g * w.values))


@dataclass
class ProbeReport:
    trials: int
    monotone_pass: int
    min_monotone_rel: float
    zero_on_diagonal: bool
    convex_pass: int
    rays: list = field(default_factory=list)
    ray_scales: tuple = ()
    threshold: float = 0.0

    @property
    def passed(self) -> bool:
        return (
            self.monotone_pass == self.trials
            and self.convex_pass == self.trials
            and self.zero_on_diagonal
            and all(r["increasing_tail"] for r in self.rays)
        )

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "monotonicity_pass": self.monotone_pass,
            "min_monotone_rel": self.min_monotone_rel,
            "zero_on_diagonal": self.zero_on_diagonal,
            "convexity_pass": self.convex_pass,
            "ray_scales": list(self.ray_scales),
            "coercivity_threshold": self.threshold,
            "coercivity_rays": self.rays,
            "pass": self.passed,
        }


def probe_operator_properties(
    grid: Grid,
    M: KirchhoffTerm,
    trials: int = 100,
    seed: int = 0,
    reaction: Optional[ReactionSpec] = None,
    barriers: Optional[BarrierPair] = None,
    trunc: Optional[TruncationConfig] = None,
    n_rays: int = 5,
    ray_scales=(1.0, 2.0, 4.0, 8.0, 16.0),
    threshold: float = 10.0,
    floor: float = 1e-12,
) -> ProbeReport:
    """Sample monotonicity of ``L``, midpoint convexity of its potential, and coercivity of ``B``.

    Fields are seeded uniform ``[-1, 1]`` node values with zero trace.  The
    coercivity rays use the penalised operator built from ``reaction`` and
    ``barriers``; without them the first application's operator on this grid
    is used.  Rays are normalised to unit energy; the tail of each ray
    (scales >= 4) must be strictly increasing.
    """
    if trials < 1:
        raise InvalidDomainError("trials must be >= 1")
    if reaction is None or barriers is None:
        from .applications import App1Params, app1_build

        params = App1Params(0.1, 0.1, 0.5, 2.0, M)
        build = app1_build(grid, params)
        reaction, barriers = build.reaction, build.barriers
    if trunc is None:
        from .solver import initial_radius

        trunc = TruncationConfig(initial_radius(barriers))

    rng = np.random.default_rng(seed)
    potential = lambda w: 0.5 * M.antiderivative(energy_product(w, w))
    mono_ok = convex_ok = 0
    min_rel = np.inf
    zero_diag = True
    fields = []
    for _ in range(trials):
        u = grid.field(rng.uniform(-1.0, 1.0, grid.shape))
        v = grid.field(rng.uniform(-1.0, 1.0, grid.shape))
        fields.append(u)
        d = grid.field(u.values - v.values)
        inner = operator_pairing(M, u, d) - operator_pairing(M, v, d)
        scale = operator_pairing(M, u, u) + operator_pairing(M, v, v)
        rel = inner / scale
        min_rel = min(min_rel, rel)
        if rel >= -floor and inner > 0:
            mono_ok += 1
        twin = grid.field(u.values.copy())
        d0 = grid.field(u.values - twin.values)
        zero_diag &= operator_pairing(M, u, d0) - operator_pairing(M, twin, d0) == 0.0
        mid = grid.field(0.5 * (u.values + v.values))
        if potential(mid) <= 0.5 * (potential(u) + potential(v)) * (1 + floor):
            convex_ok += 1

    rays = []
    for u in fields[:n_rays]:
        # unit-energy direction, so the scale t equals ||t u||
        direction = u.values / np.sqrt(energy_product(u, u))
        ratios = []
        for t in ray_scales:
            w = grid.field(t * direction)
            ratios.append(float(b_pairing(M, reaction, trunc, barriers, w) / np.sqrt(energy_product(w, w))))
        tail = [r for t, r in zip(ray_scales, ratios) if t >= 4]
        crossing = next((t for t, r in zip(ray_scales, ratios) if r > threshold), None)
        rays.append({"ratios": ratios, "increasing_tail": bool(np.all(np.diff(tail) > 0)), "crossing_t": crossing})

    return ProbeReport(trials, mono_ok, float(min_rel), bool(zero_diag), convex_ok, rays, tuple(ray_scales), threshold)

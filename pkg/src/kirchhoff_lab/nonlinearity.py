"""Kirchhoff coefficient, reactions, and the truncation/freezing/penalty kernels.

All reaction callables are vectorised: ``x`` has shape ``(..., dim)``, ``t``
shape ``(...)`` and ``y`` shape ``(..., dim)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, InvalidDomainError, OrderingError
from .grid import ScalarField, gradient_values


@dataclass(frozen=True)
class KirchhoffTerm:
    """Nonlocal coefficient ``M``: affine ``a + b t`` or piecewise-linear table.

    A table is given by breakpoints ``ts`` (starting at 0) and values; past the
    last breakpoint it continues with the last slope.  ``m`` is the positive
    floor; it defaults to ``M(0)``, the minimum of a nondecreasing ``M``.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    ts: Optional[tuple] = None
    values: Optional[tuple] = None
    m: Optional[float] = None

    def __post_init__(self):
        if self.kind == "affine":
            if self.b < 0:
                raise InvalidDomainError(f"M slope b must be >= 0, got {self.b}")
            m = self.a if self.m is None else float(self.m)
        elif self.kind == "tabulated":
            ts = np.asarray(self.ts, dtype=float)
            vs = np.asarray(self.values, dtype=float)
            if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2:
                raise InvalidDomainError("tabulated M needs matching 1-D ts and values (>= 2 samples)")
            if ts[0] != 0.0 or np.any(np.diff(ts) <= 0):
                raise InvalidDomainError("tabulated M breakpoints must start at 0 and increase")
            if np.any(np.diff(vs) < 0):
                raise InvalidDomainError("tabulated M must be nondecreasing")
            object.__setattr__(self, "ts", tuple(ts))
            object.__setattr__(self, "values", tuple(vs))
            m = vs[0] if self.m is None else float(self.m)
        else:
            raise InvalidDomainError(f"unknown M form {self.kind!r}")
        if not m > 0:
            raise InvalidDomainError(f"floor m must be positive, got {m}")
        object.__setattr__(self, "m", float(m))
        if self(0.0) < self.m:
            raise InvalidDomainError(f"M(0) = {self(0.0)} is below the floor m = {self.m}")

    @classmethod
    def affine(cls, a: float, b: float = 0.0, m: float | None = None) -> "KirchhoffTerm":
        return cls("affine", a=float(a), b=float(b), m=m)

    @classmethod
    def tabulated(cls, ts, values, m: float | None = None) -> "KirchhoffTerm":
        return cls("tabulated", ts=tuple(ts), values=tuple(values), m=m)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("M is defined on t >= 0 only")
        if self.kind == "affine":
            out = self.a + self.b * t
        else:
            ts, vs = np.asarray(self.ts), np.asarray(self.values)
            slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])
            out = np.where(t <= ts[-1], np.interp(t, ts, vs), vs[-1] + slope * (t - ts[-1]))
        return float(out) if out.ndim == 0 else out

    def antiderivative(self, t: float) -> float:
        """``int_0^t M``; exact for both forms."""
        t = float(t)
        if t < 0:
            raise DomainError("M_hat is defined on t >= 0 only")
        if self.kind == "affine":
            return self.a * t + 0.5 * self.b * t * t
        ts = np.asarray(self.ts)
        knots = np.concatenate([ts[ts < t], [t]])
        return float(np.trapezoid(self(knots), knots))

    def max_on(self, lo: float, hi: float) -> float:
        """``max_{lo <= t <= hi} M(t)``."""
        pts = [lo, hi]
        if self.kind == "tabulated":
            pts += [s for s in self.ts if lo <= s <= hi]
        return float(np.max(self(np.asarray(pts))))

    def to_dict(self) -> dict:
        if self.kind == "affine":
            return {"form": "affine", "a": self.a, "b": self.b, "m": self.m}
        return {"form": "tabulated", "ts": list(self.ts), "values": list(self.values), "m": self.m}


def eval_M(M: KirchhoffTerm, t):
    return M(t)


def eval_M_hat(M: KirchhoffTerm, t: float) -> float:
    return M.antiderivative(t)


def _norm(y):
    return np.sqrt(np.sum(np.square(y), axis=-1))


@dataclass(frozen=True)
class ReactionSpec:
    """Reaction ``f(x, t, y) >= 0`` with growth envelope ``h`` and gradient exponent ``eta``.

    ``f <= h(x, t) (1 + |y|^eta)`` is the growth hypothesis the truncation
    bounds rely on.
    """

    func: Callable
    envelope: Callable
    eta: float
    tag: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.eta <= 2.0:
            raise InvalidDomainError(f"eta must lie in [0, 2], got {self.eta}")

    def __call__(self, x, t, y):
        out = np.asarray(self.func(x, t, y), dtype=float)
        if np.any(out < 0):
            raise DomainError(f"reaction {self.tag!r} returned negative values")
        return out

    eval = __call__

    def to_dict(self) -> dict:
        return {"reaction": self.tag, **self.params}


def app1_reaction(lam: float, mu: float, q: float, p: float) -> ReactionSpec:
    """``lam |t|^q + |t|^p + mu |y|^q``; envelope ``lam |t|^q + |t|^p + mu``, eta = q."""

    def f(x, t, y):
        at = np.abs(t)
        return lam * at**q + at**p + mu * _norm(y) ** q

    def h(x, t):
        at = np.abs(t)
        return lam * at**q + at**p + mu

    return ReactionSpec(f, h, q, "app1", {"lambda": lam, "mu": mu, "q": q, "p": p})


def app2_reaction(A: float, B: float, q: float, eta: float) -> ReactionSpec:
    """Three-branch ``A t^q (B - t) + |y|^eta`` with the t-part cut off outside ``[0, B]``.

    Envelope ``h = A c^q (B - c) + 1`` with ``c = clip(t, 0, B)``, so that
    ``f = g + |y|^eta <= (g + 1)(1 + |y|^eta)``.
    """

    def part(t):
        c = np.clip(t, 0.0, B)
        return A * c**q * (B - c)

    def f(x, t, y):
        return part(t) + _norm(y) ** eta

    def h(x, t):
        return part(t) + 1.0

    return ReactionSpec(f, h, eta, "app2", {"A": A, "B": B, "q": q, "eta": eta})


def constant_reaction(c: float) -> ReactionSpec:
    if c < 0:
        raise InvalidDomainError("constant reaction must be nonnegative")
    return ReactionSpec(
        lambda x, t, y: np.full(np.shape(t), float(c)),
        lambda x, t: np.full(np.shape(t), float(c)),
        0.0,
        "constant",
        {"value": c},
    )


@dataclass(frozen=True)
class TruncationConfig:
    R: float
    l: float = 0.5

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidDomainError(f"truncation radius R must be positive, got {self.R}")
        if not 0.0 < self.l < 1.0:
            raise InvalidDomainError(f"penalty exponent l must lie in (0, 1), got {self.l}")


@dataclass(frozen=True, eq=False)
class BarrierPair:
    """Lower and upper barriers with their node gradients cached."""

    lower: ScalarField
    upper: ScalarField
    lower_grad: np.ndarray = field(init=False, repr=False)
    upper_grad: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.lower.grid != self.upper.grid:
            raise InvalidDomainError("barriers live on different grids")
        if not self.lower.zero_trace:
            raise InvalidDomainError("lower barrier must have zero boundary trace")
        if min(self.upper.faces) < 0:
            raise InvalidDomainError("upper barrier must have a nonnegative boundary trace")
        gap = self.upper.values - self.lower.values
        if np.min(gap) < 0:
            worst = np.unravel_index(int(np.argmin(gap)), gap.shape)
            raise OrderingError("lower barrier exceeds upper barrier", worst_node=worst, margin=float(gap[worst]))
        object.__setattr__(self, "lower_grad", gradient_values(self.lower))
        object.__setattr__(self, "upper_grad", gradient_values(self.upper))

    @property
    def grid(self):
        return self.lower.grid


def clamp_grad(y, R: float):
    """Componentwise clamp of ``y`` to ``[-R, R]``."""
    return np.clip(y, -R, R)


def truncation_factor(R: float, eta: float, dim: int) -> float:
    """``1 + R^eta N^(eta/2)``, the gradient factor bounding ``f_R / h``."""
    return 1.0 + R**eta * dim ** (eta / 2.0)


def eval_f_R(f: ReactionSpec, cfg: TruncationConfig, x, t, y):
    return f(x, t, clamp_grad(y, cfg.R))


def eval_z_R(f: ReactionSpec, cfg: TruncationConfig, barriers: BarrierPair, t, y, index=Ellipsis):
    """Freeze the truncated reaction at the nearest barrier outside the band.

    ``index`` selects nodes; the default evaluates every node at once.  Ties
    ``t == lower`` or ``t == upper`` take the middle branch.
    """
    x = barriers.grid.points()[index]
    lo, hi = barriers.lower.values[index], barriers.upper.values[index]
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    out = eval_f_R(f, cfg, x, t, y)
    below, above = t < lo, t > hi
    if np.any(below):
        out = np.where(below, eval_f_R(f, cfg, x, lo, barriers.lower_grad[index]), out)
    if np.any(above):
        out = np.where(above, eval_f_R(f, cfg, x, hi, barriers.upper_grad[index]), out)
    return out


def eval_gamma_R(cfg: TruncationConfig, barriers: BarrierPair, t, index=Ellipsis):
    """Sublinear penalty ``-(lower - t)_+^l + (t - upper)_+^l``."""
    t = np.asarray(t, dtype=float)
    lo, hi = barriers.lower.values[index], barriers.upper.values[index]
    return -np.maximum(lo - t, 0.0) ** cfg.l + np.maximum(t - hi, 0.0) ** cfg.l


def envelope_sup(f: ReactionSpec, points, t_lo, t_hi, samples: int = 65) -> float:
    """Sup of ``h(x, t)`` over nodes and ``t`` sampled in ``[t_lo, t_hi]`` (per node)."""
    s = np.linspace(0.0, 1.0, samples)
    node_shape = points.shape[:-1]
    t_lo = np.broadcast_to(np.asarray(t_lo, dtype=float), node_shape)[..., None]
    t_hi = np.broadcast_to(np.asarray(t_hi, dtype=float), node_shape)[..., None]
    ts = t_lo + (t_hi - t_lo) * s
    xs = np.broadcast_to(points[..., None, :], ts.shape + (points.shape[-1],))
    return float(np.max(f.envelope(xs, ts)))

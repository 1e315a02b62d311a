"""Matrix-free conjugate gradients and the principal Dirichlet eigenpair."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NoConvergenceError
from .grid import Grid, ScalarField

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearOperator:
    """Linear map on zero-trace nodal arrays of a fixed grid."""

    grid: Grid
    apply: Callable[[np.ndarray], np.ndarray]
    symmetric: bool = True

    def __call__(self, u: ScalarField) -> ScalarField:
        return ScalarField(self.grid, self.apply(u.values))


def _neg_lap_zero_trace(v: np.ndarray, h: tuple) -> np.ndarray:
    # 3/5-point stencil with zero ghosts, written out for speed inside CG.
    out = 2.0 * v
    out[1:] -= v[:-1]
    out[:-1] -= v[1:]
    out /= h[0] ** 2
    if v.ndim == 2:
        oy = 2.0 * v
        oy[:, 1:] -= v[:, :-1]
        oy[:, :-1] -= v[:, 1:]
        out += oy / h[1] ** 2
    return out


def neg_laplacian_operator(grid: Grid, scale: float = 1.0) -> LinearOperator:
    """``scale * (-Laplace)`` with homogeneous Dirichlet data."""
    h = grid.h
    if scale == 1.0:
        return LinearOperator(grid, lambda v: _neg_lap_zero_trace(v, h))
    return LinearOperator(grid, lambda v: scale * _neg_lap_zero_trace(v, h))


def identity_operator(grid: Grid) -> LinearOperator:
    return LinearOperator(grid, lambda v: np.array(v, dtype=float))


def diagonal_operator(grid: Grid, diag) -> LinearOperator:
    d = np.asarray(diag, dtype=float).reshape(grid.shape)
    return LinearOperator(grid, lambda v: d * v)


def cg_arrays(apply, b, tol, max_iter, x0=None):
    """Plain CG on arrays.  Returns ``(x, iterations, relative_residual)``.

    The stopping test is re-done on the true residual, so drift in the
    recursive residual cannot produce a false success.
    """
    bnorm = float(np.linalg.norm(b))
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    target = tol * bnorm
    it = 0
    while True:
        r = b - apply(x)
        rr = float(np.vdot(r, r))
        if np.sqrt(rr) <= target:
            return x, it, np.sqrt(rr) / bnorm
        if it >= max_iter:
            raise NoConvergenceError(
                f"CG did not reach relative residual {tol:g} in {max_iter} iterations",
                residual=np.sqrt(rr) / bnorm,
                last=x,
                iterations=it,
            )
        p = r.copy()
        while it < max_iter:
            Ap = apply(p)
            alpha = rr / float(np.vdot(p, Ap))
            x += alpha * p
            r -= alpha * Ap
            it += 1
            rr_new = float(np.vdot(r, r))
            if np.sqrt(rr_new) <= target:
                break
            p *= rr_new / rr
            p += r
            rr = rr_new


def cg_solve(A: LinearOperator, rhs: ScalarField, tol: float = 1e-10, max_iter: int | None = None, x0=None) -> ScalarField:
    """Solve ``A u = rhs`` to ``||A u - rhs||_2 <= tol ||rhs||_2``.

    Raises
    ------
    NoConvergenceError
        If ``max_iter`` (default ``10 * nodes``) is exhausted; carries the
        last relative residual and iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    max_iter = 10 * A.grid.size if max_iter is None else max_iter
    start = None if x0 is None else (x0.values if isinstance(x0, ScalarField) else x0)
    x, _, relres = cg_arrays(A.apply, np.asarray(rhs.values, dtype=float), tol, max_iter, start)
    assert relres <= tol
    return ScalarField(A.grid, x)


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    phi1: ScalarField
    residual: float
    iterations: int


def principal_eigenpair(grid: Grid, tol: float = 1e-8, max_iter: int = 500) -> EigenPair:
    """Smallest Dirichlet eigenpair of -Laplace by inverse power iteration (shift 0).

    Starts from the all-ones vector.  Stops once consecutive Rayleigh quotients
    agree to ``tol * lambda`` and the sup-norm residual of the sup-normalised
    eigenvector is at most ``tol * lambda``.
    """
    A = neg_laplacian_operator(grid)
    inner_tol = min(1e-12, tol * 1e-4)
    x = np.ones(grid.shape)
    lam_prev = np.inf
    for k in range(1, max_iter + 1):
        y, _, _ = cg_arrays(A.apply, x, inner_tol, 10 * grid.size, x / lam_prev if np.isfinite(lam_prev) else None)
        y /= np.max(np.abs(y))
        Ay = A.apply(y)
        lam = float(np.vdot(y, Ay) / np.vdot(y, y))
        resid = float(np.max(np.abs(Ay - lam * y)))
        x = y
        if abs(lam - lam_prev) < tol * lam and resid <= tol * lam:
            break
        lam_prev = lam
    else:
        raise NoConvergenceError("inverse iteration did not converge", residual=resid / lam, last=x, iterations=max_iter)
    if np.sum(x) < 0:
        x = -x
    x /= np.max(x)
    if np.min(x) <= 0:
        raise NoConvergenceError("principal eigenvector is not strictly positive", residual=resid / lam, last=x, iterations=k)
    log.debug("eigenpair: lambda1=%.12g after %d iterations, residual %.3e", lam, k, resid / lam)
    return EigenPair(lam, ScalarField(grid, x), resid / lam, k)


def solve_poisson_unit(grid: Grid, tol: float = 1e-12) -> ScalarField:
    """Torsion function: ``-Laplace e = 1`` with zero Dirichlet data."""
    e = cg_solve(neg_laplacian_operator(grid), grid.field(np.ones(grid.shape)), tol)
    if np.min(e.values) <= 0:
        raise NoConvergenceError("Poisson solution is not strictly positive", residual=None, last=e.values)
    return e

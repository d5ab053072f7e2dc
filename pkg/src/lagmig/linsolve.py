"""Per-layer implicit solves: conjugate gradients on d(x,y)*u - L u.

The implicit depth stepping produces one symmetric positive definite system
per expansion order and rational term, all sharing the operator

    A u = d(x,y) * u - L u,     d > 0,

with L the horizontal stencil Laplacian (zero extension at edges).  d grows
like eta^2/c^2, so A is strongly diagonally dominant and plain CG converges
in tens of iterations; preconditioning is deliberately absent (an incomplete
factorization cuts iterations but multiplies total time several-fold at
these iteration counts).

The buffer-zone domain decomposition exploits the fast spatial decay of A's
Green function: the grid is tiled into non-overlapping rectangles, each tile
is extended by a buffer ring in which the right-hand side is zeroed, the
local homogeneous-Dirichlet problems are solved independently (in parallel),
and the local solutions are summed onto the global grid.  Accuracy is set by
the Green-function decay across the buffer, convergence improves because
each tile sees a smaller velocity contrast than the whole layer.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from lagmig.stencil import Layout2D, _apply_stencil, apply_L


@dataclass
class LayerOperator:
    """SPD layer operator u -> diag * u - L u."""

    layout: Layout2D
    diag: np.ndarray

    def __post_init__(self):
        self.diag = np.ascontiguousarray(self.diag, dtype=np.float64)
        if self.diag.shape != (self.layout.nx, self.layout.ny):
            raise ValueError(
                f"diag shape {self.diag.shape} != layout ({self.layout.nx}, {self.layout.ny})"
            )
        if not np.all(self.diag > 0):
            raise ValueError("diag must be strictly positive for definiteness")

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.diag * u - apply_L(u, self.layout)


class ConvergenceError(RuntimeError):
    pass


@njit(cache=True)
def _cg_kernel(diag, rhs, inv_dx2, inv_dy2, eps, maxiter, history):
    nx, ny = rhs.shape
    x = np.zeros((nx, ny))
    rhs_norm2 = 0.0
    for i in range(nx):
        for j in range(ny):
            rhs_norm2 += rhs[i, j] * rhs[i, j]
    if rhs_norm2 == 0.0:
        return x, 0
    r = rhs.copy()
    p = rhs.copy()
    ap = np.empty((nx, ny))
    rs_old = rhs_norm2
    tol2 = eps * eps * rhs_norm2
    for it in range(maxiter):
        _apply_stencil(p, ap, inv_dx2, inv_dy2)
        pap = 0.0
        for i in range(nx):
            for j in range(ny):
                ap[i, j] = diag[i, j] * p[i, j] - ap[i, j]
                pap += p[i, j] * ap[i, j]
        alpha = rs_old / pap
        rs_new = 0.0
        for i in range(nx):
            for j in range(ny):
                x[i, j] += alpha * p[i, j]
                r[i, j] -= alpha * ap[i, j]
                rs_new += r[i, j] * r[i, j]
        if history.size > it:
            history[it] = np.sqrt(rs_new / rhs_norm2)
        if rs_new <= tol2:
            return x, it + 1
        beta = rs_new / rs_old
        for i in range(nx):
            for j in range(ny):
                p[i, j] = r[i, j] + beta * p[i, j]
        rs_old = rs_new
    return x, maxiter + 1


_EMPTY_HISTORY = np.empty(0)


def cg_solve(
    op: LayerOperator,
    rhs: np.ndarray,
    eps: float = 1e-6,
    maxiter: int = 1000,
    return_history: bool = False,
):
    """Conjugate gradients from a zero initial guess.

    Stops when ||r_i||_2 / ||rhs||_2 <= eps; raises ConvergenceError with the
    achieved residual if maxiter is not enough.  Returns (solution, iterations)
    or (solution, iterations, residual_history).
    """
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if rhs.shape != (op.layout.nx, op.layout.ny):
        raise ValueError(f"rhs shape {rhs.shape} incompatible with layout")
    if not np.all(np.isfinite(rhs)):
        raise ValueError("rhs must be finite")
    history = np.zeros(maxiter) if return_history else _EMPTY_HISTORY
    sol, iters = _cg_kernel(
        op.diag, rhs, 1.0 / op.layout.dx**2, 1.0 / op.layout.dy**2, eps, maxiter, history
    )
    if iters > maxiter:
        res = np.linalg.norm(rhs - op.apply(sol)) / np.linalg.norm(rhs)
        raise ConvergenceError(
            f"CG did not reach eps={eps:.1e} in {maxiter} iterations "
            f"(achieved relative residual {res:.3e})"
        )
    if return_history:
        return sol, iters, history[:iters]
    return sol, iters


@dataclass(frozen=True)
class DDMConfig:
    """Non-overlapping px-by-py tiling with a buffer ring of the given width."""

    px: int
    py: int
    buffer: int = 8

    def __post_init__(self):
        if self.px < 1 or self.py < 1:
            raise ValueError("subdomain counts must be >= 1")
        if self.buffer < 0:
            raise ValueError("buffer width must be nonnegative")


def _splits(n: int, parts: int) -> np.ndarray:
    return np.linspace(0, n, parts + 1).astype(np.int64)


@njit(cache=True, parallel=True)
def _ddm_kernel(
    diag, rhs, x0, x1, y0, y1, ex0, ex1, ey0, ey1, inv_dx2, inv_dy2, eps, maxiter, locbuf, iters
):
    nsub = x0.size
    for s in prange(nsub):
        h = ex1[s] - ex0[s]
        w = ey1[s] - ey0[s]
        lrhs = np.zeros((h, w))
        lrhs[x0[s] - ex0[s] : x1[s] - ex0[s], y0[s] - ey0[s] : y1[s] - ey0[s]] = rhs[
            x0[s] : x1[s], y0[s] : y1[s]
        ]
        ldiag = np.ascontiguousarray(diag[ex0[s] : ex1[s], ey0[s] : ey1[s]])
        no_history = np.empty(0)
        sol, it = _cg_kernel(ldiag, lrhs, inv_dx2, inv_dy2, eps, maxiter, no_history)
        locbuf[s, :h, :w] = sol
        iters[s] = it


def ddm_solve(
    op: LayerOperator,
    rhs: np.ndarray,
    cfg: DDMConfig,
    eps: float = 1e-6,
    maxiter: int = 1000,
):
    """Buffer-zone domain decomposition solve.

    Each tile is solved with the right-hand side zeroed inside its buffer
    ring, and the tile solutions (including their ring response) are summed
    onto the global grid in fixed tile order, so the result is deterministic.
    With px = py = 1 and any buffer this degenerates to a single global CG.

    Returns (solution, max iterations over subdomains).  The solution matches
    the global solve up to the Green-function decay across the buffer ring,
    not exactly.
    """
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if rhs.shape != (op.layout.nx, op.layout.ny):
        raise ValueError(f"rhs shape {rhs.shape} incompatible with layout")
    nx, ny = op.layout.nx, op.layout.ny
    xs = _splits(nx, cfg.px)
    ys = _splits(ny, cfg.py)
    if np.any(np.diff(xs) < 1) or np.any(np.diff(ys) < 1):
        raise ValueError(f"grid {nx}x{ny} too small for {cfg.px}x{cfg.py} subdomains")
    buf = cfg.buffer
    x0 = np.repeat(xs[:-1], cfg.py)
    x1 = np.repeat(xs[1:], cfg.py)
    y0 = np.tile(ys[:-1], cfg.px)
    y1 = np.tile(ys[1:], cfg.px)
    ex0 = np.maximum(x0 - buf, 0)
    ex1 = np.minimum(x1 + buf, nx)
    ey0 = np.maximum(y0 - buf, 0)
    ey1 = np.minimum(y1 + buf, ny)
    nsub = x0.size
    locbuf = np.zeros((nsub, int(np.max(ex1 - ex0)), int(np.max(ey1 - ey0))))
    iters = np.zeros(nsub, dtype=np.int64)
    _ddm_kernel(
        op.diag,
        rhs,
        x0,
        x1,
        y0,
        y1,
        ex0,
        ex1,
        ey0,
        ey1,
        1.0 / op.layout.dx**2,
        1.0 / op.layout.dy**2,
        eps,
        maxiter,
        locbuf,
        iters,
    )
    if np.any(iters > maxiter):
        bad = int(np.argmax(iters))
        raise ConvergenceError(
            f"subdomain {bad} did not reach eps={eps:.1e} in {maxiter} iterations"
        )
    out = np.zeros((nx, ny))
    for s in range(nsub):
        out[ex0[s] : ex1[s], ey0[s] : ey1[s]] += locbuf[
            s, : ex1[s] - ex0[s], : ey1[s] - ey0[s]
        ]
    return out, int(np.max(iters))

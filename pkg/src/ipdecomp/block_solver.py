"""Per-block barrier subproblems.

For fixed (t, lambda) each block solves

    min  f_i(x) + t phi_i(x) + <lambda, B_i x>   s.t.  A_i x = a_i,  x in int(X_i)

by equality-constrained damped Newton in the null space of A_i: with U_i an
orthonormal basis of null(A_i) the step is -U (U^T H U)^{-1} U^T grad. The
Cholesky factor of the reduced Hessian U^T H U at the returned point is kept
so the dual Hessian can be assembled without refactoring. The reduced form
avoids the cancellation of H^{-1} - H^{-1} A^T (A H^{-1} A^T)^{-1} A H^{-1}
when t is small and H has entries spanning many orders of magnitude.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.linalg

from .errors import HessianNotPD, MaxIterExceeded
from .functions import objective_alpha

DELTA_STAR = 2.0 - math.sqrt(3.0)
EPS_X = 1e-8
MAX_INNER_NEWTON = 200
_ROUNDOFF = 1e-15
# cold starts below this barrier weight first follow t down by decades
COLD_START_T = 1e-2


@dataclasses.dataclass
class BlockSolution:
    x: np.ndarray
    nu: np.ndarray
    H: np.ndarray
    chol_reduced: np.ndarray
    kkt_residual: float
    inner_iters: int
    objective: float
    barrier: float
    history: list = dataclasses.field(default_factory=list)


def _max_step(x, dx, lower, upper) -> float:
    """Largest s with lower < x + s dx < upper (inf when dx = 0)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        s_up = np.where(dx > 0, (upper - x) / dx, np.inf)
        s_lo = np.where(dx < 0, (lower - x) / dx, np.inf)
    return float(min(s_up.min(initial=np.inf), s_lo.min(initial=np.inf)))


def _backtrack(merit, x, dx, slope, s) -> tuple[float, float]:
    """Armijo backtracking from step s; returns (accepted step, merit decrease), step 0 if none."""
    f0 = merit(x)
    while s > 1e-14:
        f1 = merit(x + s * dx)
        if f1 <= f0 + 0.25 * s * slope:
            return s, f0 - f1
        s *= 0.5
    return 0.0, 0.0


def _cholesky(M, what):
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise HessianNotPD(f"{what} is not positive definite") from exc


def solve_block(
    block,
    t: float,
    lam,
    warm_start=None,
    *,
    eps_x: float = EPS_X,
    max_iter: int = MAX_INNER_NEWTON,
    penalty: tuple[float, np.ndarray] | None = None,
) -> BlockSolution:
    """Minimize the block's barrier Lagrangian at (t, lambda).

    ``penalty = (rho, offset)`` adds (rho/2) ||B_i x + offset||^2, which is
    how the alternating-direction baseline reuses this solver.

    Iterates stay strictly interior: the damped step 1/(1 + delta) uses the
    block's self-concordance constant and is further capped at 99% of the
    distance to the box boundary. Every step is projected onto null(A_i).
    Stops once ||grad + A^T nu|| <= t * eps_x, or at the roundoff floor when
    that target is below what double precision can resolve.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    lam = np.asarray(lam, dtype=float).reshape(-1)
    warm_iters = 0
    if warm_start is None and t < COLD_START_T:
        # the damped step needs O(1/t) iterations from far away; warm-start along t instead
        tk = 1.0
        while tk > t:
            sol = solve_block(block, tk, lam, warm_start, eps_x=eps_x, max_iter=max_iter, penalty=penalty)
            warm_start, warm_iters = sol.x, warm_iters + sol.inner_iters
            tk *= 0.1
    obj, bar = block.objective, block.barrier
    lower, upper = block.box.lower, block.box.upper
    A, B = block.A, block.B
    has_local = block.m_local > 0
    x = np.array(block.interior_point if warm_start is None else warm_start, dtype=float)
    half_M = 0.5 * objective_alpha(obj) / math.sqrt(t)
    coupling_grad = B.T @ lam
    prev_res = math.inf
    no_progress = False
    history = []

    def merit(y):
        val = obj.value(y) + t * bar.value(y) + float(coupling_grad @ y)
        if penalty is not None:
            val += 0.5 * penalty[0] * float(np.sum((B @ y + penalty[1]) ** 2))
        return val

    for it in range(max_iter + 1):
        g_f = obj.gradient(x)
        g_b = bar.gradient(x)
        g = g_f + t * g_b + coupling_grad
        H = obj.hessian(x)
        H[np.diag_indices_from(H)] += t * bar.hessian_diag(x)
        scale = np.linalg.norm(g_f) + t * np.linalg.norm(g_b) + np.linalg.norm(coupling_grad)
        if penalty is not None:
            rho, offset = penalty
            pen_grad = rho * (B.T @ (B @ x + offset))
            g = g + pen_grad
            H = H + rho * (B.T @ B)
            scale += np.linalg.norm(pen_grad)

        U = block.null_space
        L = _cholesky(U.T @ H @ U if has_local else H, "reduced block Hessian")
        gr = U.T @ g if has_local else g
        z = scipy.linalg.solve_triangular(L, gr, lower=True)
        if has_local:
            # least-squares multiplier: its residual is the projected gradient norm
            nu = -block.A_pinv.T @ g
            residual = float(np.linalg.norm(g + A.T @ nu))
        else:
            nu = np.zeros(0)
            residual = float(np.linalg.norm(g))
        decrement = half_M * float(np.linalg.norm(z))
        history.append(residual)

        stalled = no_progress or (it > 0 and decrement < 1e-7 and residual > 0.5 * prev_res)
        if residual <= max(t * eps_x, _ROUNDOFF * (1.0 + scale)) or stalled:
            return BlockSolution(
                x=x,
                nu=nu,
                H=H,
                chol_reduced=L,
                kkt_residual=residual,
                inner_iters=it + warm_iters,
                objective=obj.value(x),
                barrier=bar.value(x),
                history=history,
            )
        if it == max_iter:
            break
        prev_res = residual

        dx = -scipy.linalg.solve_triangular(L.T, z, lower=False)
        if has_local:
            dx = block.project_null(U @ dx)
        s_max = 0.99 * _max_step(x, dx, lower, upper)
        if penalty is None:
            sigma = 1.0 / (1.0 + decrement) if decrement > DELTA_STAR else 1.0
            sigma = min(sigma, s_max)
        else:
            # the damped rule crawls when t is tiny; the penalized solve backtracks instead
            slope = float(g @ dx)
            roundoff = 1e-15 * (1.0 + abs(merit(x)))
            if -slope <= roundoff:
                no_progress = True
                continue
            sigma, gain = _backtrack(merit, x, dx, slope, min(1.0, s_max))
            no_progress = gain <= roundoff
        x = x + sigma * dx

    raise MaxIterExceeded(
        f"block Newton did not converge in {max_iter} iterations (t={t:.3e}, residual={residual:.3e})"
    )


def dual_value_contribution(sol: BlockSolution, block, t: float, lam) -> float:
    """d_i(t, lambda) = -f_i(x) - t phi_i(x) - <lambda, B_i x> at the block minimizer."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    return -sol.objective - t * sol.barrier - float(lam @ (block.B @ sol.x))

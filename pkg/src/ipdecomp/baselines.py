"""Reference solvers.

The oracle solves the coupled barrier problem over all variables at once
(no decomposition), so it provides central points x(t) and f* to check the
decomposition against. The alternating-direction baseline (ADI) minimizes a
quadratic-penalty augmented Lagrangian block by block in Gauss-Seidel order
with a steepest-ascent multiplier update.
"""

from __future__ import annotations

import dataclasses
import math
import time

import numpy as np
import scipy.linalg

from .block_solver import solve_block
from .errors import MaxIterExceeded
from .functions import BoxLog
from .path_following import SolveReport
from .problem import RANK_RTOL, analytic_center

ORACLE_GAP = 1e-8
# absolute KKT tolerance of the ADI block subproblems
ADI_BLOCK_TOL = 1e-9


# ---------------------------------------------------------------------------
# Monolithic barrier oracle
# ---------------------------------------------------------------------------


class _Monolithic:
    """f(x) + t phi(x) over the stacked variable with E x = e."""

    def __init__(self, problem):
        self.problem = problem
        self.lower, self.upper, self.E, self.e = problem.stacked()
        self.barrier = BoxLog(self.lower, self.upper)
        self.off = problem.offsets
        self.pinv = np.linalg.pinv(self.E, rcond=RANK_RTOL)
        self._start = None

    @property
    def start(self):
        if self._start is None:
            self._start = analytic_center(self.lower, self.upper, self.E, self.e)
        return self._start

    def parts(self, x):
        return self.problem.split(x)

    def f(self, x):
        return self.problem.objective_value(self.parts(x))

    def f_grad_hess(self, x):
        n = x.size
        g = np.zeros(n)
        H = np.zeros((n, n))
        for i, (blk, xi) in enumerate(zip(self.problem.blocks, self.parts(x))):
            s = slice(self.off[i], self.off[i + 1])
            g[s] = blk.objective.gradient(xi)
            H[s, s] = blk.objective.hessian(xi)
        return g, H

    def inside(self, x):
        return bool(np.all(x > self.lower) and np.all(x < self.upper))


def _oracle_newton(mono: _Monolithic, t: float, x: np.ndarray, max_iter: int = 500):
    """Feasible-start Newton with backtracking on f + t phi; returns (x, kkt residual)."""
    E = mono.E
    k = E.shape[0]
    n = x.size
    for _ in range(max_iter):
        g_f, H = mono.f_grad_hess(x)
        g = g_f + t * mono.barrier.gradient(x)
        H[np.diag_indices(n)] += t * mono.barrier.hessian_diag(x)
        # symmetric diagonal scaling keeps the KKT matrix tame at small t
        D = 1.0 / np.sqrt(np.diag(H))
        K = np.zeros((n + k, n + k))
        K[:n, :n] = D[:, None] * H * D[None, :]
        K[:n, n:] = (E * D[None, :]).T
        K[n:, :n] = E * D[None, :]
        rhs = np.concatenate([-D * g, np.zeros(k)])
        sol = scipy.linalg.solve(K, rhs, assume_a="sym")
        dx = D * sol[:n]
        nu = sol[n:]
        dx = dx - mono.pinv @ (E @ dx)
        residual = float(np.linalg.norm(g + E.T @ nu))
        dec2 = float(-g @ dx)
        F0 = mono.f(x) + t * mono.barrier.value(x)
        # dec2 / 2 estimates F(x) - F(x(t)); stop once it is at roundoff level
        if dec2 <= 1e-15 * max(1.0, abs(F0)):
            return x, residual
        s = 1.0
        while True:
            xn = x + s * dx
            if np.array_equal(xn, x):
                return x, residual
            if mono.inside(xn):
                Fn = mono.f(xn) + t * mono.barrier.value(xn)
                if Fn <= F0 - 0.25 * s * dec2:
                    break
            s *= 0.5
            if s < 1e-14:
                return x, residual
        x = xn
    raise MaxIterExceeded(f"oracle Newton did not converge at t={t:.3e}")


def oracle_central_point(problem, t: float, x0=None) -> np.ndarray:
    """x(t) = argmin f(x) + t phi(x) s.t. [D_A; B] x = [a; b], solved monolithically."""
    mono = _Monolithic(problem)
    x = mono.start if x0 is None else np.asarray(x0, dtype=float)
    x, _ = _oracle_newton(mono, t, x)
    return x


@dataclasses.dataclass
class OracleResult:
    x_star: np.ndarray
    f_star: float
    t_grid: list
    points: list
    kkt_residuals: list
    gap_bound: float


def oracle_optimum(problem, *, gap: float = ORACLE_GAP, factor: float = 0.1) -> OracleResult:
    """Follow x(t) down a geometric grid of t until t * N_phi <= gap."""
    mono = _Monolithic(problem)
    n_phi = problem.barrier_complexity
    t = 1.0
    x = mono.start
    grid, points, residuals = [], [], []
    while True:
        x, res = _oracle_newton(mono, t, x)
        grid.append(t)
        points.append(x.copy())
        residuals.append(res)
        if t * n_phi <= gap:
            break
        t = max(t * factor, gap / n_phi)
    return OracleResult(x, mono.f(x), grid, points, residuals, t * n_phi)


# ---------------------------------------------------------------------------
# Alternating direction baseline
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class AdiConfig:
    penalty: float = 1.0
    ascent_step: float = 1.0
    max_sweeps: int = 5000
    tol: float = 1e-4
    t_barrier: float = 1e-6
    lambda0: np.ndarray | None = None

    def __post_init__(self):
        if self.penalty <= 0 or self.ascent_step <= 0:
            raise ValueError("penalty and ascent_step must be positive")


def adi_solve(problem, config: AdiConfig | None = None, x0=None) -> SolveReport:
    """Gauss-Seidel minimization of f + <lambda, Bx - b> + (rho/2)||Bx - b||^2, then lambda += step rho (Bx - b).

    Box constraints are kept by a log barrier with a small fixed weight.
    Stops when ||Bx - b|| <= tol and the objective moved by at most tol in
    the last sweep; one function evaluation is counted per sweep.
    """
    config = config or AdiConfig()
    start = time.perf_counter()
    rho, t = config.penalty, config.t_barrier
    xs = [blk.interior_point.copy() for blk in problem.blocks] if x0 is None else [np.array(x) for x in x0]
    lam = np.zeros(problem.m) if config.lambda0 is None else np.array(config.lambda0, dtype=float)
    r = problem.coupling_residual(xs)
    f_prev = problem.objective_value(xs)
    trace = []
    block_iters = 0
    sweeps = 0
    status = "budget"
    while sweeps < config.max_sweeps:
        for i, blk in enumerate(problem.blocks):
            offset = r - blk.B @ xs[i]
            sol = solve_block(blk, t, lam, xs[i], eps_x=ADI_BLOCK_TOL / t, penalty=(rho, offset))
            block_iters += sol.inner_iters
            xs[i] = sol.x
            r = offset + blk.B @ xs[i]
        sweeps += 1
        lam = lam + config.ascent_step * rho * r
        f = problem.objective_value(xs)
        res = float(np.linalg.norm(r))
        trace.append({"k": sweeps, "objective": f, "primal_residual": res})
        if res <= config.tol and abs(f - f_prev) <= config.tol:
            status = "ok"
            break
        f_prev = f
    report = SolveReport(
        method="adi",
        status=status,
        x_final=xs,
        lambda_final=lam,
        t_final=t,
        barrier_complexity=problem.barrier_complexity,
        outer_iters=sweeps,
        inner_iters_total=0,
        fct_evals=sweeps,
        block_newton_iters=block_iters,
        objective=problem.objective_value(xs),
        primal_residual=float(np.linalg.norm(r)),
        final_decrement=math.nan,
        wall_time=time.perf_counter() - start,
        trace=trace,
    )
    if status != "ok":
        raise MaxIterExceeded(f"ADI did not reach tol={config.tol} in {config.max_sweeps} sweeps", report)
    return report

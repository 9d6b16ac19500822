"""Gradient, Hessian, Newton direction and decrement of the augmented dual.

With x_i = x_i(t, lambda) the block minimizers,

    d(t, lambda)      = <lambda, b> + sum_i d_i(t, lambda)
    grad d(t, lambda) = b - sum_i B_i x_i
    hess d(t, lambda) = sum_i G_i,
    G_i = B_i [H_i^-1 - H_i^-1 A_i^T (A_i H_i^-1 A_i^T)^-1 A_i H_i^-1] B_i^T.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .block_solver import EPS_X, MAX_INNER_NEWTON, BlockSolution, dual_value_contribution, solve_block
from .errors import HessianNotPD
from .parallel import BlockPool


@dataclasses.dataclass(frozen=True, eq=False)
class DualState:
    t: float
    lam: np.ndarray
    value: float
    grad: np.ndarray
    hess: np.ndarray
    chol: np.ndarray
    newton_dir: np.ndarray | None
    decrement: float | None
    solutions: tuple[BlockSolution, ...]
    fct_evals: int = 0

    @property
    def xs(self) -> list[np.ndarray]:
        return [sol.x for sol in self.solutions]


def block_hessian(block, sol: BlockSolution) -> np.ndarray:
    """G_i = B_i U (U^T H_i U)^{-1} U^T B_i^T from the stored reduced factor.

    Equal to B_i [H^-1 - H^-1 A^T (A H^-1 A^T)^-1 A H^-1] B_i^T, since both
    are the inverse of H restricted to null(A_i).
    """
    Z = scipy.linalg.solve_triangular(sol.chol_reduced, block.coupling_null.T, lower=True)
    return Z.T @ Z


def newton_direction(state: DualState) -> np.ndarray:
    """Solve hess * d = -grad with the stored Cholesky factor."""
    if not np.any(state.grad):
        return np.zeros_like(state.grad)
    return -scipy.linalg.cho_solve((state.chol, True), state.grad)


def newton_decrement(state: DualState, sc) -> float:
    """delta = alpha(t)/2 * sqrt(grad^T hess^-1 grad)."""
    y = scipy.linalg.solve_triangular(state.chol, state.grad, lower=True)
    return 0.5 * sc.alpha_t(state.t) * float(np.linalg.norm(y))


def assemble(problem, t, lam, solutions, sc=None, *, pool: BlockPool | None = None, fct_evals: int = 0):
    """Combine block solutions computed at exactly (t, lambda) into a DualState.

    The G_i are summed in block order so the result does not depend on how
    the per-block work was scheduled. With ``sc`` given the Newton direction
    and decrement are filled in as well.
    """
    lam = np.asarray(lam, dtype=float).reshape(-1)
    solutions = tuple(solutions)
    blocks = problem.blocks
    mapper = pool.map if pool is not None else (lambda f, *it: list(map(f, *it)))
    Gs = mapper(block_hessian, blocks, solutions)
    hess = np.zeros((problem.m, problem.m))
    grad = problem.b.copy()
    value = float(lam @ problem.b)
    for blk, sol, G in zip(blocks, solutions, Gs):
        hess += G
        grad -= blk.B @ sol.x
        value += dual_value_contribution(sol, blk, t, lam)
    hess = 0.5 * (hess + hess.T)
    try:
        chol = np.linalg.cholesky(hess)
    except np.linalg.LinAlgError as exc:
        raise HessianNotPD(
            "dual Hessian is not positive definite; check the rank of [D_A; B]"
        ) from exc
    state = DualState(t, lam, value, grad, hess, chol, None, None, solutions, fct_evals)
    if sc is None:
        return state
    return dataclasses.replace(state, newton_dir=newton_direction(state), decrement=newton_decrement(state, sc))


class DualEvaluator:
    """Evaluates d(t, .) by a parallel sweep of block solves.

    Keeps the last block minimizers as warm starts and counts one
    function evaluation per sweep.
    """

    def __init__(self, problem, *, threads: int = 1, eps_x: float = EPS_X, max_block_iter: int = MAX_INNER_NEWTON):
        self.problem = problem
        self.sc = problem.sc_constants
        self.pool = BlockPool(threads)
        self.eps_x = eps_x
        self.max_block_iter = max_block_iter
        self.fct_evals = 0
        self.block_iters = 0
        self._warm = [None] * problem.N

    def close(self):
        self.pool.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def solve_blocks(self, t, lam) -> list[BlockSolution]:
        def work(blk, warm):
            return solve_block(blk, t, lam, warm, eps_x=self.eps_x, max_iter=self.max_block_iter)

        sols = self.pool.map(work, self.problem.blocks, self._warm)
        self._warm = [sol.x for sol in sols]
        self.block_iters += sum(sol.inner_iters for sol in sols)
        return sols

    def evaluate(self, t, lam) -> DualState:
        lam = np.asarray(lam, dtype=float).reshape(-1)
        sols = self.solve_blocks(t, lam)
        self.fct_evals += 1
        return assemble(self.problem, t, lam, sols, self.sc, pool=self.pool, fct_evals=self.fct_evals)


def dual_value(problem, t, lam, **kw) -> float:
    """Convenience one-shot evaluation of d(t, lambda)."""
    with DualEvaluator(problem, **kw) as ev:
        return ev.evaluate(t, lam).value


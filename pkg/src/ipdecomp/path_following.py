"""Newton path-following on the augmented dual.

``center`` drives lambda into the neighbourhood {delta(t, lambda) <= eps_v}
at a fixed barrier weight; ``solve`` then shrinks t geometrically and
re-centers after every reduction until t * N_phi <= eps, which certifies
f(x) - f* <= eps for the centered primal point.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from typing import Literal

import numpy as np

from .block_solver import DELTA_STAR, EPS_X, solve_block
from .dual_newton import DualEvaluator, DualState
from .errors import MaxIterExceeded

logger = logging.getLogger(__name__)

LONG_STEP_TAU = 0.85


def step_size(delta: float) -> float:
    """Damped step 1/(1 + delta) outside the quadratic region, full step inside."""
    if delta < 0:
        raise ValueError("decrement must be nonnegative")
    return 1.0 / (1.0 + delta) if delta > DELTA_STAR else 1.0


def short_step_factor(sc) -> float:
    """tau = 2c / (2c + 1) with c = 1/4 + 2 xi / delta* + eta."""
    c = 0.25 + 2.0 * sc.xi / DELTA_STAR + sc.eta
    return 2.0 * c / (2.0 * c + 1.0)


@dataclasses.dataclass
class PathConfig:
    t0: float = 1.0
    lambda0: np.ndarray | None = None
    eps: float = 1e-4
    eps_v: float = DELTA_STAR / 2.0
    tau: float = LONG_STEP_TAU
    mode: Literal["long", "short"] = "long"
    max_outer: int = 10_000
    max_inner: int = 100
    max_center: int = 500
    eps_x: float = EPS_X
    threads: int = 1
    feas_tol: float = 1e-6
    polish_delta: float | None = None

    def __post_init__(self):
        if self.mode not in ("long", "short"):
            raise ValueError(f"mode must be 'long' or 'short', got {self.mode!r}")
        if self.t0 <= 0 or self.eps <= 0 or self.eps_v <= 0:
            raise ValueError("t0, eps and eps_v must be positive")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.mode == "short":
            # the one-step guarantee only holds for this neighbourhood
            self.eps_v = DELTA_STAR / 2.0
        if self.polish_delta is None:
            self.polish_delta = self.eps_v


@dataclasses.dataclass
class SolveReport:
    method: str
    status: str
    x_final: list
    lambda_final: np.ndarray
    t_final: float
    barrier_complexity: float
    outer_iters: int
    inner_iters_total: int
    fct_evals: int
    block_newton_iters: int
    objective: float
    primal_residual: float
    final_decrement: float
    wall_time: float
    tau: float | None = None
    mode: str | None = None
    trace: list = dataclasses.field(default_factory=list)
    newton_steps: list = dataclasses.field(default_factory=list)

    @property
    def gap_bound(self) -> float:
        return self.t_final * self.barrier_complexity

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["x_final"] = [np.asarray(x).tolist() for x in self.x_final]
        out["lambda_final"] = np.asarray(self.lambda_final).tolist()
        out["gap_bound"] = self.gap_bound
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SolveReport":
        fields = {f.name for f in dataclasses.fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in fields}
        kwargs["x_final"] = [np.asarray(x, dtype=float) for x in data["x_final"]]
        kwargs["lambda_final"] = np.asarray(data["lambda_final"], dtype=float)
        return cls(**kwargs)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, allow_nan=True)

    @classmethod
    def load(cls, path) -> "SolveReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def certified_gap(report: SolveReport) -> float:
    """Upper bound t_final * N_phi on f(x_final) - f*."""
    return report.t_final * report.barrier_complexity


def _newton_step(ev: DualEvaluator, state: DualState, phase: str, steps: list, *, full=False) -> DualState:
    """lambda+ = lambda + sigma(delta) dlambda, then re-evaluate at the same t."""
    sigma = 1.0 if full else step_size(state.decrement)
    new = ev.evaluate(state.t, state.lam + sigma * state.newton_dir)
    steps.append(
        {
            "phase": phase,
            "t": state.t,
            "delta": state.decrement,
            "sigma": sigma,
            "dual_before": state.value,
            "dual_after": new.value,
            "delta_after": new.decrement,
            "alpha_t": ev.sc.alpha_t(state.t),
        }
    )
    return new


def _center_from(ev, state, eps_v, budget, phase, steps):
    iters = 0
    while state.decrement > eps_v:
        if iters >= budget:
            raise MaxIterExceeded(
                f"centering at t={state.t:.3e} stopped with delta={state.decrement:.3e} after {iters} steps"
            )
        state = _newton_step(ev, state, phase, steps)
        iters += 1
    return state, iters


def center(problem, t, lambda_init, eps_v, budget, *, evaluator: DualEvaluator | None = None, steps=None):
    """Damped Newton on d(t, .) until delta(t, lambda) <= eps_v.

    Returns (lambda, state, iterations).
    """
    own = evaluator is None
    ev = evaluator or DualEvaluator(problem)
    steps = [] if steps is None else steps
    try:
        state = ev.evaluate(t, lambda_init)
        state, iters = _center_from(ev, state, eps_v, budget, "center", steps)
    finally:
        if own:
            ev.close()
    return state.lam, state, iters


def _trace_row(k, state, delta_update=None):
    """One outer record; short-step rows carry delta(t+, lambda) before the step, delta itself is not recomputed."""
    return {
        "k": k,
        "t": state.t,
        "delta": None if delta_update is not None else state.decrement,
        "delta_update": delta_update,
        "dual_value": state.value,
        "grad_norm": float(np.linalg.norm(state.grad)),
        "fct_evals": state.fct_evals,
    }


def _solve_uncoupled(problem, config, start):
    """No coupling rows: the problem splits into independent barrier problems."""
    t = config.t0
    xs = [None] * problem.N
    outer, block_iters = 0, 0
    n_phi = problem.barrier_complexity
    while True:
        sols = [solve_block(b, t, np.zeros(0), w, eps_x=config.eps_x) for b, w in zip(problem.blocks, xs)]
        xs = [s.x for s in sols]
        block_iters += sum(s.inner_iters for s in sols)
        if t * n_phi <= config.eps:
            break
        if outer >= config.max_outer:
            raise MaxIterExceeded(f"outer budget of {config.max_outer} exhausted")
        t *= config.tau
        outer += 1
    return SolveReport(
        method="dip",
        status="ok",
        x_final=xs,
        lambda_final=np.zeros(0),
        t_final=t,
        barrier_complexity=n_phi,
        outer_iters=outer,
        inner_iters_total=0,
        fct_evals=outer + 1,
        block_newton_iters=block_iters,
        objective=problem.objective_value(xs),
        primal_residual=0.0,
        final_decrement=0.0,
        wall_time=time.perf_counter() - start,
        tau=config.tau,
        mode=config.mode,
    )


def solve(problem, config: PathConfig | None = None) -> SolveReport:
    """Path-following decomposition: center at t0, then shrink t by tau with re-centering.

    In short-step mode tau is fixed by the self-concordance constants and
    each reduction is followed by exactly one full Newton step. After the
    loop ends, Newton steps at t_final continue until the coupling residual
    is within feas_tol (1 + ||b||) and delta <= polish_delta (eps_v by
    default), so that the returned primal point is feasible.
    """
    config = config or PathConfig()
    start = time.perf_counter()
    if problem.m == 0:
        return _solve_uncoupled(problem, config, start)

    sc = problem.sc_constants
    tau = short_step_factor(sc) if config.mode == "short" else config.tau
    n_phi = problem.barrier_complexity
    lam0 = np.zeros(problem.m) if config.lambda0 is None else np.asarray(config.lambda0, dtype=float)
    steps: list = []
    trace: list = []
    outer = 0
    inner_total = 0

    with DualEvaluator(problem, threads=config.threads, eps_x=config.eps_x) as ev:

        def partial(status, state):
            return _report(problem, ev, state, status, outer, inner_total, tau, config, trace, steps, start)

        state = ev.evaluate(config.t0, lam0)
        try:
            state, iters = _center_from(ev, state, config.eps_v, config.max_center, "center", steps)
            inner_total += iters
            trace.append(_trace_row(0, state))
            while state.t * n_phi > config.eps:
                if outer >= config.max_outer:
                    raise MaxIterExceeded(f"outer budget of {config.max_outer} exhausted")
                t_next = tau * state.t
                outer += 1
                if config.mode == "short":
                    before = ev.evaluate(t_next, state.lam)
                    steps.append(
                        {
                            "phase": "short",
                            "t": t_next,
                            "delta": before.decrement,
                            "sigma": 1.0,
                            "dual_before": before.value,
                            "dual_after": None,
                            "delta_after": None,
                            "alpha_t": sc.alpha_t(t_next),
                        }
                    )
                    lam = before.lam + before.newton_dir
                    inner_total += 1
                    if t_next * n_phi <= config.eps:
                        state = ev.evaluate(t_next, lam)
                    else:
                        # the next reduction evaluates at (tau t_next, lam); carry the point forward
                        state = dataclasses.replace(before, lam=lam, t=t_next)
                else:
                    state = ev.evaluate(t_next, state.lam)
                    state, iters = _center_from(ev, state, config.eps_v, config.max_inner, "inner", steps)
                    inner_total += iters
                short = config.mode == "short" and t_next * n_phi > config.eps
                trace.append(_trace_row(outer, state, before.decrement if short else None))
            state, iters = _polish(ev, state, config, problem, steps)
            inner_total += iters
        except MaxIterExceeded as exc:
            exc.report = partial("budget", state)
            raise
        return partial("ok", state)


def _polish(ev, state, config, problem, steps):
    target = config.feas_tol * (1.0 + np.linalg.norm(problem.b))
    iters = 0
    while state.decrement > config.polish_delta or np.linalg.norm(state.grad) > target:
        if iters >= config.max_inner:
            if np.linalg.norm(state.grad) <= target:
                break
            raise MaxIterExceeded(
                f"final centering left residual {np.linalg.norm(state.grad):.3e} > {target:.3e}"
            )
        state = _newton_step(ev, state, "polish", steps)
        iters += 1
    return state, iters


def _report(problem, ev, state, status, outer, inner_total, tau, config, trace, steps, start):
    xs = state.xs
    return SolveReport(
        method="dip",
        status=status,
        x_final=xs,
        lambda_final=state.lam,
        t_final=state.t,
        barrier_complexity=problem.barrier_complexity,
        outer_iters=outer,
        inner_iters_total=inner_total,
        fct_evals=ev.fct_evals,
        block_newton_iters=ev.block_iters,
        objective=problem.objective_value(xs),
        primal_residual=float(np.linalg.norm(problem.coupling_residual(xs))),
        final_decrement=float(state.decrement) if state.decrement is not None else math.nan,
        wall_time=time.perf_counter() - start,
        tau=tau,
        mode=config.mode,
        trace=trace,
        newton_steps=steps,
    )

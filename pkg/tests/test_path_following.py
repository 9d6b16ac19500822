import dataclasses
import math

import numpy as np
import pytest

from ipdecomp.baselines import oracle_central_point
from ipdecomp.block_solver import DELTA_STAR
from ipdecomp.dual_newton import DualEvaluator
from ipdecomp.errors import MaxIterExceeded
from ipdecomp.functions import ScConstants
from ipdecomp.path_following import (
    PathConfig,
    SolveReport,
    center,
    certified_gap,
    short_step_factor,
    solve,
    step_size,
)
from ipdecomp.problem import SeparableProblem

from conftest import linear_block, two_block_qp


def test_step_size_rule():
    assert DELTA_STAR == pytest.approx(0.2679491924)
    assert step_size(1.0) == 0.5
    assert step_size(0.2) == 1.0
    assert step_size(0.3) == pytest.approx(1 / 1.3)
    assert step_size(DELTA_STAR) == 1.0
    with pytest.raises(ValueError):
        step_size(-0.1)


def test_short_step_factor_values():
    sc = ScConstants(alpha=2.0, xi=2 * math.sqrt(2), eta=math.sqrt(2) + 0.5, beta=0.0, n_max=2.0)
    c = 0.25 + 2 * sc.xi / DELTA_STAR + sc.eta
    assert c == pytest.approx(23.27588, abs=1e-5)
    assert c == pytest.approx(23.277, abs=2e-3)
    assert short_step_factor(sc) == pytest.approx(0.97897, abs=1e-5)
    tiny = ScConstants(alpha=2.0, xi=1e-12, eta=1e-12, beta=0.0, n_max=2.0)
    assert short_step_factor(tiny) == pytest.approx(1 / 3)
    doubled = dataclasses.replace(sc, xi=2 * sc.xi)
    assert short_step_factor(doubled) > short_step_factor(sc)


def test_config_validation():
    with pytest.raises(ValueError):
        PathConfig(tau=1.0)
    with pytest.raises(ValueError):
        PathConfig(mode="medium")
    with pytest.raises(ValueError):
        PathConfig(eps=0.0)
    assert PathConfig(mode="short", eps_v=0.01).eps_v == DELTA_STAR / 2


def test_center_returns_immediately_when_centered(qp2):
    lam, state, iters = center(qp2, 1.0, np.zeros(qp2.m), DELTA_STAR / 2, 100)
    lam2, state2, iters2 = center(qp2, 1.0, lam, DELTA_STAR / 2, 100)
    assert iters2 == 0 and np.array_equal(lam2, lam)


def test_center_damped_and_quadratic_phases(small_network):
    steps = []
    with DualEvaluator(small_network) as ev:
        center(small_network, 0.5, np.zeros(small_network.m), 1e-6, 200, evaluator=ev, steps=steps)
    assert any(s["delta"] > DELTA_STAR for s in steps)
    for s in steps:
        t, d = s["t"], s["delta"]
        if d > DELTA_STAR:
            bound = 4 * t / s["alpha_t"] ** 2 * (d - math.log1p(d))
            assert s["dual_after"] - s["dual_before"] <= -bound * (1 - 1e-6) + 1e-12
        else:
            assert s["delta_after"] <= d**2 / (1 - d) ** 2 + 1e-6


def test_center_budget(small_network):
    with pytest.raises(MaxIterExceeded):
        center(small_network, 0.5, np.zeros(small_network.m), 1e-6, 2)


def test_quadratic_phase_arithmetic():
    assert 0.2**2 / 0.8**2 == pytest.approx(0.0625)
    d = DELTA_STAR
    assert d**2 / (1 - d) ** 2 == pytest.approx(d / 2)


def test_solve_gap_and_feasibility(small_quadratic):
    report = solve(small_quadratic, PathConfig(eps=1e-4))
    assert report.status == "ok"
    assert report.gap_bound <= 1e-4 and report.gap_bound == certified_gap(report)
    assert report.primal_residual <= 1e-6 * (1 + np.linalg.norm(small_quadratic.b))
    assert report.tau == 0.85
    for blk, x in zip(small_quadratic.blocks, report.x_final):
        assert blk.box.contains_strictly(x)
        assert np.allclose(blk.A @ x, blk.a, atol=1e-9)
    for row in report.trace:
        assert row["delta"] <= PathConfig().eps_v


def test_termination_threshold():
    # N_phi = 20 and eps = 1e-3: stop as soon as t <= 5e-5
    blocks = [linear_block(np.ones(5), np.zeros(5), np.ones(5), B=np.eye(5)[:1]) for _ in range(2)]
    p = SeparableProblem(blocks, [1.0])
    assert p.barrier_complexity == 20
    report = solve(p, PathConfig(eps=1e-3))
    assert report.t_final <= 5e-5 < report.t_final / 0.85


def test_trace_records_path(small_quadratic):
    report = solve(small_quadratic, PathConfig(eps=1e-2))
    ts = [row["t"] for row in report.trace]
    assert ts[0] == 1.0
    assert all(b == pytest.approx(0.85 * a) for a, b in zip(ts, ts[1:]))
    assert report.outer_iters == len(ts) - 1
    assert report.fct_evals >= report.outer_iters + 1


def test_lambda_converges(small_network):
    report = solve(small_network, PathConfig(eps=1e-6))
    steps = [s for s in report.newton_steps if s["phase"] != "center"]
    assert steps
    lam_trace = report.trace
    assert report.final_decrement <= PathConfig().eps_v
    # the multipliers settle: last outer updates move lambda very little
    assert report.status == "ok" and len(lam_trace) > 10


def test_central_path_bound_along_oracle(qp2):
    grid = [1.0, 0.1, 0.01]
    fs = [qp2.objective_value(oracle_central_point(qp2, t)) for t in grid]
    assert fs[0] >= fs[1] >= fs[2]
    n_phi = qp2.barrier_complexity
    for (t, f), (t2, f2) in zip(zip(grid, fs), zip(grid[1:], fs[1:])):
        assert f - f2 <= n_phi * (t - t2)


def test_short_mode_single_step(qp2):
    report = solve(qp2, PathConfig(mode="short", eps=1e-2))
    sc = qp2.sc_constants
    assert report.tau == pytest.approx(short_step_factor(sc))
    short = [s for s in report.newton_steps if s["phase"] == "short"]
    assert len(short) == report.outer_iters - 1 or len(short) == report.outer_iters
    assert all(s["delta"] <= DELTA_STAR + 1e-8 for s in short)
    expected = math.ceil(math.log(qp2.barrier_complexity / 1e-2) / math.log(1 / report.tau))
    assert abs(report.outer_iters - expected) <= 2


def test_uncoupled_problem_bypasses_dual():
    blocks = [linear_block([1.0, -1.0], [0.0, 0.0], [1.0, 1.0], A=[[1.0, 1.0]], a=[1.0]) for _ in range(2)]
    p = SeparableProblem(blocks, np.zeros(0))
    report = solve(p, PathConfig(eps=1e-6))
    assert report.gap_bound <= 1e-6
    for x in report.x_final:
        assert x[0] == pytest.approx(0.0, abs=1e-6) and x[1] == pytest.approx(1.0, abs=1e-6)


def test_budget_carries_partial_report(small_quadratic):
    with pytest.raises(MaxIterExceeded) as info:
        solve(small_quadratic, PathConfig(max_outer=3))
    report = info.value.report
    assert isinstance(report, SolveReport) and report.status == "budget"
    assert report.outer_iters == 3


def test_report_round_trip(tmp_path, qp2):
    report = solve(qp2, PathConfig(eps=1e-3))
    path = tmp_path / "r.json"
    report.save(path)
    back = SolveReport.load(path)
    assert back.to_dict() == report.to_dict()


def test_lambda0_warm_start():
    p = two_block_qp(seed=2)
    first = solve(p, PathConfig(eps=1e-4))
    again = solve(p, PathConfig(eps=1e-4, lambda0=first.lambda_final, t0=first.t_final))
    assert again.outer_iters == 0
    assert again.objective == pytest.approx(first.objective, abs=1e-6)

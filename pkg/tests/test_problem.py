import json

import numpy as np
import pytest

from ipdecomp.errors import BadSlackBounds, DimensionMismatch, Infeasible, ProblemFileError
from ipdecomp.functions import Linear, Quadratic
from ipdecomp.generators import GenSpec, generate
from ipdecomp.problem import (
    Block,
    Box,
    SeparableProblem,
    add_slack_block,
    analytic_center,
    find_interior_point,
    slack_upper_bound,
    validate_rank,
)

from conftest import linear_block, two_block_qp


def test_box_invariants():
    with pytest.raises(ValueError):
        Box([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        Box([0.0], [np.inf])
    with pytest.raises(DimensionMismatch):
        Box([0.0, 0.0], [1.0])
    box = Box([0.0, -1.0], [2.0, 1.0])
    assert np.allclose(box.center, [1.0, 0.0])
    assert box.contains_strictly([1.0, 0.5]) and not box.contains_strictly([2.0, 0.0])


def test_block_shape_checks():
    with pytest.raises(DimensionMismatch):
        linear_block([1.0, 1.0], [0.0, 0.0], [1.0, 1.0], A=[[1.0, 1.0, 1.0]], a=[1.0])
    with pytest.raises(DimensionMismatch):
        Block(Linear([1.0]), Box([0.0, 0.0], [1.0, 1.0]), np.zeros((0, 2)), np.zeros(0), np.zeros((1, 2)))


def test_problem_coupling_rows_must_agree():
    blk = linear_block([1.0], [0.0], [1.0], B=[[1.0]])
    with pytest.raises(DimensionMismatch):
        SeparableProblem([blk], [1.0, 2.0])


def test_rank_pass_by_hand():
    blk = linear_block([0.0, 0.0], [0.0, 0.0], [1.0, 1.0], A=[[1.0, 1.0]], a=[1.0], B=[[1.0, 0.0]])
    report = validate_rank(SeparableProblem([blk], [0.5]))
    assert report.passed and report.coupling_rank == 1


def test_rank_fail_by_hand():
    blk = linear_block([0.0, 0.0], [0.0, 0.0], [1.0, 1.0], A=[[1.0, 1.0]], a=[1.0], B=[[1.0, 1.0]])
    report = validate_rank(SeparableProblem([blk], [1.0]))
    assert not report.passed and not report.coupling_full_rank
    assert report.messages


def test_rank_without_coupling():
    blk = linear_block([0.0, 0.0], [0.0, 0.0], [1.0, 1.0], A=[[1.0, 1.0]], a=[1.0])
    assert validate_rank(SeparableProblem([blk, blk], np.zeros(0))).passed


def test_rank_flags_dependent_local_rows():
    blk = linear_block([0.0] * 3, [0.0] * 3, [1.0] * 3, A=[[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]], a=[1.0, 2.0], m=0)
    report = validate_rank(SeparableProblem([blk], np.zeros(0)))
    assert not report.passed and report.local_full_rank == [False]


def test_barrier_complexity_is_twice_dimension(qp2):
    assert qp2.barrier_complexity == 2 * qp2.n


def test_interior_point_examples():
    blk = linear_block([0.0, 0.0], [0.0, 0.0], [1.0, 1.0], A=[[1.0, 1.0]], a=[1.0])
    assert np.allclose(find_interior_point(blk), [0.5, 0.5])
    blk = linear_block([0.0, 0.0, 0.0], [0.0] * 3, [2.0] * 3)
    assert np.allclose(find_interior_point(blk), [1.0, 1.0, 1.0])
    blk = linear_block([0.0, 0.0], [0.0, 0.0], [1.0, 1.0], A=[[1.0, 1.0]], a=[2.0])
    with pytest.raises(Infeasible):
        find_interior_point(blk)


def test_interior_point_when_projection_leaves_box():
    # the projected box center violates x_1 > 0; the LP fallback finds the interior
    A = np.array([[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 0.0]])
    a = np.array([0.05, 1.9])
    x = analytic_center(np.zeros(4), np.array([1.0, 10.0, 1.0, 1.0]), A, a)
    assert np.allclose(A @ x, a)
    assert np.all(x > 0) and np.all(x < [1.0, 10.0, 1.0, 1.0])


def test_inconsistent_local_equalities():
    with pytest.raises(Infeasible):
        analytic_center(np.zeros(2), np.ones(2), np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 0.5]))


def test_slack_block_construction():
    blk = linear_block([1.0, 1.0], [0.0, 0.0], [1.0, 1.0], B=np.eye(2))
    p = SeparableProblem([blk], [1.0, 1.0])
    q = add_slack_block(p, Box([0.0, 0.0], [10.0, 10.0]))
    assert q.N == 2
    assert np.allclose(q.blocks[-1].B, np.eye(2))
    assert q.blocks[-1].objective.value(np.array([3.0, 4.0])) == 0.0
    assert q.barrier_complexity == p.barrier_complexity + 4
    assert validate_rank(q).passed


def test_slack_block_rejects_bad_bounds():
    p = SeparableProblem([linear_block([1.0], [0.0], [1.0], B=[[1.0]])], [1.0])
    with pytest.raises(BadSlackBounds):
        add_slack_block(p, Box([0.5], [2.0]))
    with pytest.raises(BadSlackBounds):
        add_slack_block(p, Box([0.0 - 1.0], [0.0]))
    with pytest.raises(DimensionMismatch):
        add_slack_block(p, Box([0.0, 0.0], [1.0, 1.0]))


def test_slack_bound_keeps_feasible_points_interior():
    # sum_i B_i x_i <= b on two random blocks; every feasible x gets a slack strictly inside (0, bound)
    rng = np.random.default_rng(3)
    blocks = [
        linear_block(rng.normal(size=3), -np.ones(3), 2 * np.ones(3), B=rng.normal(size=(2, 3))) for _ in range(2)
    ]
    p = SeparableProblem(blocks, np.array([1.0, -0.5]))
    bound = slack_upper_bound(p)
    for _ in range(500):
        xs = [rng.uniform(-1.0, 2.0, size=3) for _ in range(2)]
        r = p.coupling_residual(xs)
        if np.all(r <= 0):
            slack = -r
            assert np.all(slack < bound)
    assert np.all(bound > 0)


def test_stacked_matrix(small_quadratic):
    lower, upper, E, e = small_quadratic.stacked()
    assert E.shape == (3 * 3 + 6, small_quadratic.n)
    assert np.linalg.matrix_rank(E) == E.shape[0]
    assert lower.size == upper.size == small_quadratic.n


def test_problem_file_round_trip(tmp_path, small_network):
    path = tmp_path / "net.json"
    small_network.save(path)
    back = SeparableProblem.load(path)
    assert back.dumps() == small_network.dumps()
    xs = [blk.interior_point for blk in small_network.blocks]
    assert back.objective_value(xs) == pytest.approx(small_network.objective_value(xs))


def test_problem_file_rejects_unknown_fields(tmp_path):
    data = two_block_qp().to_dict()
    data["comment"] = "hi"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ProblemFileError):
        SeparableProblem.load(path)
    data = two_block_qp().to_dict()
    data["blocks"][0]["box"]["mid"] = [0.0]
    with pytest.raises(ProblemFileError):
        SeparableProblem.from_dict(data)
    data = two_block_qp().to_dict()
    data["blocks"][0]["A"]["shape"] = [1, 3]
    with pytest.raises(ProblemFileError):
        SeparableProblem.from_dict(data)
    path.write_text("{not json")
    with pytest.raises(ProblemFileError):
        SeparableProblem.load(path)


def test_quadratic_objective_in_file(tmp_path):
    blk = Block(Quadratic(np.eye(2), [1.0, 0.0]), Box([0.0, 0.0], [1.0, 1.0]), np.zeros((0, 2)), np.zeros(0), np.eye(2))
    p = SeparableProblem([blk], [0.5, 0.5])
    back = SeparableProblem.from_dict(json.loads(p.dumps()))
    assert np.allclose(back.blocks[0].objective.Q, np.eye(2))


@pytest.mark.parametrize("family", ["network", "quadratic"])
def test_generated_instances_are_valid(family):
    p = generate(GenSpec(family, 4, 9, 3, seed=11))
    assert validate_rank(p).passed
    for blk in p.blocks:
        x = find_interior_point(blk)
        assert blk.box.contains_strictly(x)
        assert np.allclose(blk.A @ x, blk.a, atol=1e-10)

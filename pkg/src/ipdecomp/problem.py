"""Separable problem instances, rank validation and interior points.

A problem is

    min  sum_i f_i(x_i)
    s.t. sum_i B_i x_i = b,   A_i x_i = a_i,   l_i <= x_i <= u_i,

held as an ordered tuple of :class:`Block` plus the coupling right-hand side.
Instances are immutable once built and may be shared across worker threads.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import logging
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import BadSlackBounds, DimensionMismatch, Infeasible, ProblemFileError
from .functions import BoxLog, Linear, derive_sc_constants, objective_from_dict

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10
PHASE1_BARRIER_LIMIT = 1e12


@dataclasses.dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionMismatch("box bounds differ in length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        if np.any(lower >= upper):
            raise ValueError("box needs lower < upper in every coordinate")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains_strictly(self, x) -> bool:
        return bool(np.all(x > self.lower) and np.all(x < self.upper))


def _matrix(data, rows: int | None, cols: int) -> np.ndarray:
    if data is None:
        return np.zeros((0 if rows is None else rows, cols))
    mat = np.asarray(data, dtype=float)
    if mat.size == 0:
        return mat.reshape(0 if rows is None else rows, cols)
    return np.atleast_2d(mat)


@dataclasses.dataclass(frozen=True, eq=False)
class Block:
    """One subsystem: objective f_i, box X_i, local equalities A_i x = a_i, coupling columns B_i."""

    objective: object
    box: Box
    A: np.ndarray
    a: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        n = self.box.dim
        A = _matrix(self.A, None, n)
        a = np.asarray(self.a, dtype=float).reshape(-1)
        B = _matrix(self.B, None, n)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "B", B)
        if A.shape[1] != n or B.shape[1] != n or self.objective.dim != n:
            raise DimensionMismatch(
                f"block columns disagree: box {n}, A {A.shape}, B {B.shape}, objective {self.objective.dim}"
            )
        if a.size != A.shape[0]:
            raise DimensionMismatch(f"a has length {a.size} but A has {A.shape[0]} rows")

    @property
    def n(self) -> int:
        return self.box.dim

    @property
    def m_local(self) -> int:
        return self.A.shape[0]

    @property
    def barrier(self) -> BoxLog:
        return BoxLog(self.box.lower, self.box.upper)

    @property
    def barrier_complexity(self) -> float:
        return 2.0 * self.n

    @functools.cached_property
    def null_space(self) -> np.ndarray:
        """Orthonormal basis of null(A_i); identity when there are no local rows."""
        if self.m_local == 0:
            return np.eye(self.n)
        return scipy.linalg.null_space(self.A, rcond=RANK_RTOL)

    @functools.cached_property
    def coupling_null(self) -> np.ndarray:
        """B_i U_i (just B_i when there are no local rows)."""
        return self.B @ self.null_space if self.m_local else self.B

    @functools.cached_property
    def A_pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.A, rcond=RANK_RTOL)

    def project_null(self, d: np.ndarray) -> np.ndarray:
        """Remove the range(A^T) component of ``d``."""
        if self.m_local == 0:
            return d
        return d - self.A_pinv @ (self.A @ d)

    @functools.cached_property
    def interior_point(self) -> np.ndarray:
        return find_interior_point(self)


class SeparableProblem:
    """Ordered blocks plus the coupling right-hand side b."""

    def __init__(self, blocks, b):
        self.blocks = tuple(blocks)
        if not self.blocks:
            raise DimensionMismatch("a problem needs at least one block")
        self.b = np.asarray(b, dtype=float).reshape(-1)
        for i, blk in enumerate(self.blocks):
            if blk.B.shape[0] != self.b.size:
                raise DimensionMismatch(
                    f"block {i} has {blk.B.shape[0]} coupling rows, b has {self.b.size}"
                )

    @property
    def N(self) -> int:
        return len(self.blocks)

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def n(self) -> int:
        return sum(blk.n for blk in self.blocks)

    @property
    def barrier_complexity(self) -> float:
        return float(sum(blk.barrier_complexity for blk in self.blocks))

    @functools.cached_property
    def sc_constants(self):
        return derive_sc_constants(self)

    @property
    def offsets(self) -> list[int]:
        return list(np.cumsum([0] + [blk.n for blk in self.blocks]))

    def split(self, x) -> list[np.ndarray]:
        off = self.offsets
        return [np.asarray(x[off[i] : off[i + 1]], dtype=float) for i in range(self.N)]

    def objective_value(self, xs) -> float:
        if isinstance(xs, np.ndarray) and xs.ndim == 1 and xs.size == self.n:
            xs = self.split(xs)
        return float(sum(blk.objective.value(x) for blk, x in zip(self.blocks, xs)))

    def coupling_residual(self, xs) -> np.ndarray:
        if isinstance(xs, np.ndarray) and xs.ndim == 1 and xs.size == self.n:
            xs = self.split(xs)
        r = -self.b.copy()
        for blk, x in zip(self.blocks, xs):
            r += blk.B @ x
        return r

    def stacked(self):
        """Monolithic data (lower, upper, E, e) with E = [D_A; B] and e = [a; b]."""
        lower = np.concatenate([blk.box.lower for blk in self.blocks])
        upper = np.concatenate([blk.box.upper for blk in self.blocks])
        rows = sum(blk.m_local for blk in self.blocks) + self.m
        E = np.zeros((rows, self.n))
        e = np.zeros(rows)
        r = 0
        off = self.offsets
        for i, blk in enumerate(self.blocks):
            E[r : r + blk.m_local, off[i] : off[i + 1]] = blk.A
            e[r : r + blk.m_local] = blk.a
            r += blk.m_local
        for i, blk in enumerate(self.blocks):
            E[r:, off[i] : off[i + 1]] = blk.B
        e[r:] = self.b
        return lower, upper, E, e

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        def mat(M):
            return {"shape": list(M.shape), "rows": M.tolist()}

        return {
            "blocks": [
                {
                    "objective": blk.objective.to_dict(),
                    "box": {"lower": blk.box.lower.tolist(), "upper": blk.box.upper.tolist()},
                    "A": mat(blk.A),
                    "a": blk.a.tolist(),
                    "B": mat(blk.B),
                }
                for blk in self.blocks
            ],
            "b": self.b.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SeparableProblem":
        _require_fields(data, {"blocks", "b"}, "problem")
        blocks = []
        for k, raw in enumerate(data["blocks"]):
            _require_fields(raw, {"objective", "box", "A", "a", "B"}, f"block {k}")
            _require_fields(raw["box"], {"lower", "upper"}, f"block {k} box")
            try:
                blocks.append(
                    Block(
                        objective=objective_from_dict(raw["objective"]),
                        box=Box(raw["box"]["lower"], raw["box"]["upper"]),
                        A=_load_matrix(raw["A"], f"block {k} A"),
                        a=raw["a"],
                        B=_load_matrix(raw["B"], f"block {k} B"),
                    )
                )
            except (TypeError, ValueError) as exc:
                if isinstance(exc, DimensionMismatch):
                    raise
                raise ProblemFileError(f"block {k}: {exc}") from exc
        return cls(blocks, data["b"])

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SeparableProblem":
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemFileError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)


def _require_fields(obj, fields: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ProblemFileError(f"{where}: expected an object")
    keys = set(obj)
    if keys != fields:
        extra, missing = sorted(keys - fields), sorted(fields - keys)
        raise ProblemFileError(f"{where}: unknown fields {extra}, missing fields {missing}")


def _load_matrix(raw, where: str) -> np.ndarray:
    _require_fields(raw, {"shape", "rows"}, where)
    rows, cols = (int(v) for v in raw["shape"])
    mat = np.asarray(raw["rows"], dtype=float)
    if mat.size == 0:
        mat = mat.reshape(rows, cols)
    if mat.shape != (rows, cols):
        raise ProblemFileError(f"{where}: rows do not match shape {raw['shape']}")
    return mat


# ---------------------------------------------------------------------------
# Rank validation
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class ValidationReport:
    passed: bool
    local_full_rank: list[bool]
    coupling_full_rank: bool
    coupling_rank: int
    messages: list[str]


def numerical_rank(M: np.ndarray, scale: float = 0.0) -> int:
    """Singular values below RANK_RTOL * max(sigma_max, scale) count as zero.

    ``scale`` guards products like B U whose largest singular value is
    itself roundoff when the true product is zero.
    """
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    ref = max(s[0], scale)
    if ref == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * ref))


def validate_rank(problem: SeparableProblem) -> ValidationReport:
    """Check that every A_i and B U (U = blockwise null-space basis of D_A) have full row rank.

    By the partitioned-rank argument this is equivalent to [D_A; B] having
    full row rank, without ever forming the stacked matrix.
    """
    messages = []
    local_ok = []
    for i, blk in enumerate(problem.blocks):
        if blk.B.shape[0] != problem.m or blk.A.shape[1] != blk.n:
            raise DimensionMismatch(f"block {i} is malformed")
        if blk.m_local == 0:
            local_ok.append(True)
            continue
        ok = blk.m_local < blk.n and numerical_rank(blk.A) == blk.m_local
        local_ok.append(ok)
        if not ok:
            messages.append(f"block {i}: A has rank {numerical_rank(blk.A)} < {blk.m_local} rows")
    if problem.m == 0:
        coupling_rank, coupling_ok = 0, True
    else:
        BU = np.hstack([blk.B @ blk.null_space for blk in problem.blocks])
        scale = max(np.linalg.norm(blk.B, 2) for blk in problem.blocks)
        coupling_rank = numerical_rank(BU, scale)
        coupling_ok = coupling_rank == problem.m
        if not coupling_ok:
            messages.append(f"B U has rank {coupling_rank} < {problem.m} coupling rows")
    return ValidationReport(all(local_ok) and coupling_ok, local_ok, coupling_ok, coupling_rank, messages)


# ---------------------------------------------------------------------------
# Slack transformation
# ---------------------------------------------------------------------------


def slack_upper_bound(problem: SeparableProblem) -> np.ndarray:
    """Per-row slack bound ||b||_1 + sum_i ||B_i||_1 ||x_i||_inf large enough for any feasible point."""
    total = np.abs(problem.b).sum()
    for blk in problem.blocks:
        reach = max(np.abs(blk.box.lower).max(), np.abs(blk.box.upper).max())
        total += np.abs(blk.B).sum() * reach
    return np.full(problem.m, float(total))


def add_slack_block(problem: SeparableProblem, slack_bounds: Box) -> SeparableProblem:
    """Turn sum_i B_i x_i <= b into an equality with one extra slack block."""
    if slack_bounds.dim != problem.m:
        raise DimensionMismatch(f"slack box has {slack_bounds.dim} entries, need {problem.m}")
    if np.any(slack_bounds.lower != 0.0) or np.any(slack_bounds.upper <= 0.0):
        raise BadSlackBounds("slack box must be [0, u] with u > 0")
    m = problem.m
    slack = Block(
        objective=Linear(np.zeros(m)),
        box=slack_bounds,
        A=np.zeros((0, m)),
        a=np.zeros(0),
        B=np.eye(m),
    )
    return SeparableProblem(problem.blocks + (slack,), problem.b)


# ---------------------------------------------------------------------------
# Phase I: strictly interior points
# ---------------------------------------------------------------------------


def _max_margin_point(lower, upper, A, a):
    """Solve max s s.t. A x = a, l + s w <= x <= u - s w, s <= 1/2 (w = u - l)."""
    n = lower.size
    w = upper - lower
    c = np.zeros(n + 1)
    c[-1] = -1.0
    eye = np.eye(n)
    A_ub = np.vstack([np.hstack([-eye, w[:, None]]), np.hstack([eye, w[:, None]])])
    b_ub = np.concatenate([-lower, upper])
    A_eq = np.hstack([A, np.zeros((A.shape[0], 1))])
    bounds = [(None, None)] * n + [(None, 0.5)]
    res = scipy.optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=a, bounds=bounds, method="highs")
    if res.status != 0:
        return None, -np.inf
    return res.x[:n], float(res.x[-1])


def analytic_center(lower, upper, A, a, *, max_iter: int = 200, tol: float = 1e-12) -> np.ndarray:
    """Minimizer of the box barrier over {A x = a}.

    Starts from the box center projected onto the affine set when that is
    strictly interior, otherwise from a max-margin LP point, then runs
    equality-constrained Newton with the damped step 1/(1 + decrement).
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, lower.size)
    a = np.asarray(a, dtype=float).reshape(-1)
    center = 0.5 * (lower + upper)
    if A.shape[0] == 0:
        return center
    pinv = np.linalg.pinv(A, rcond=RANK_RTOL)
    x = center - pinv @ (A @ center - a)
    if np.linalg.norm(A @ x - a) > 1e-9 * (1.0 + np.linalg.norm(a)):
        raise Infeasible("local equalities A x = a are inconsistent")
    width = upper - lower
    if not (np.all(x - lower > 1e-9 * width) and np.all(upper - x > 1e-9 * width)):
        x_lp, margin = _max_margin_point(lower, upper, A, a)
        if x_lp is None or margin <= 1e-9:
            raise Infeasible("no strictly interior point satisfies the local equalities")
        x = x_lp
    barrier = BoxLog(lower, upper)
    U = scipy.linalg.null_space(A, rcond=RANK_RTOL)
    for _ in range(max_iter):
        value = barrier.value(x)
        if value > PHASE1_BARRIER_LIMIT:
            raise Infeasible("phase-I barrier blew up")
        g = barrier.gradient(x)
        if U.shape[1] == 0:
            return x
        Hr = U.T @ (barrier.hessian_diag(x)[:, None] * U)
        gr = U.T @ g
        step = -U @ scipy.linalg.solve(Hr, gr, assume_a="pos")
        dec = float(np.sqrt(max(-g @ step, 0.0)))
        if dec <= tol:
            break
        sigma = 1.0 / (1.0 + dec) if dec > 2.0 - np.sqrt(3.0) else 1.0
        x = x + sigma * step
    else:
        logger.warning("phase-I Newton reached %d iterations", max_iter)
    return x


def find_interior_point(block: Block) -> np.ndarray:
    """Strictly interior point of the block box that satisfies A_i x = a_i."""
    return analytic_center(block.box.lower, block.box.upper, block.A, block.a)

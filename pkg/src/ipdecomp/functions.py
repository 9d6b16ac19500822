"""Objective and barrier functions with exact derivatives up to third order.

Every function exposes ``value``, ``gradient``, ``hessian`` and
``third(x, h)`` (the third directional derivative along ``h``), plus the
bounds of its open domain so that sampling checks know where to draw points.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .errors import DomainViolation, UnsupportedObjective

# Compatibility constant of the total delay function with the box barrier.
TOTAL_DELAY_BETA = 3.0


def _as_vector(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1)


class Linear:
    """f(x) = c^T x."""

    kind = "linear"

    def __init__(self, c):
        self.c = _as_vector(c)

    @property
    def dim(self) -> int:
        return self.c.size

    def domain_bounds(self):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    def value(self, x):
        return float(self.c @ x)

    def gradient(self, x):
        return self.c.copy()

    def hessian(self, x):
        return np.zeros((self.dim, self.dim))

    def third(self, x, h):
        return 0.0

    def to_dict(self):
        return {"kind": self.kind, "c": self.c.tolist()}


class Quadratic:
    """f(x) = 1/2 x^T Q x + c^T x with Q symmetric positive semidefinite."""

    kind = "quadratic"

    def __init__(self, Q, c=None):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got {Q.shape}")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max(initial=0.0))):
            raise ValueError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        scale = np.linalg.norm(Q, 2) if Q.size else 0.0
        if Q.size and np.linalg.eigvalsh(Q).min() < -1e-10 * max(scale, 1e-300):
            raise ValueError("Q must be positive semidefinite")
        self.Q = Q
        self.c = np.zeros(Q.shape[0]) if c is None else _as_vector(c)
        if self.c.size != Q.shape[0]:
            raise ValueError("c and Q have inconsistent sizes")

    @property
    def dim(self) -> int:
        return self.c.size

    def domain_bounds(self):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    def value(self, x):
        return float(0.5 * x @ self.Q @ x + self.c @ x)

    def gradient(self, x):
        return self.Q @ x + self.c

    def hessian(self, x):
        return self.Q.copy()

    def third(self, x, h):
        return 0.0

    def to_dict(self):
        return {"kind": self.kind, "Q": self.Q.tolist(), "c": self.c.tolist()}


class TotalDelay:
    """Total link delay sum_j y_j / (d_j - y_j) on 0 <= y < d."""

    kind = "total_delay"

    def __init__(self, capacity):
        self.capacity = _as_vector(capacity)
        if np.any(self.capacity <= 0):
            raise ValueError("capacities must be positive")

    @property
    def dim(self) -> int:
        return self.capacity.size

    def domain_bounds(self):
        return np.zeros(self.dim), self.capacity.copy()

    def _gap(self, y):
        gap = self.capacity - y
        # the function itself is smooth at y = 0, but the checks only ever
        # sample the open interval shared with the box barrier
        if np.any(gap <= 0) or np.any(y < 0):
            raise DomainViolation("total delay evaluated outside 0 <= y < d")
        return gap

    def value(self, y):
        y = _as_vector(y)
        return float(np.sum(y / self._gap(y)))

    def gradient(self, y):
        y = _as_vector(y)
        return self.capacity / self._gap(y) ** 2

    def hessian_diag(self, y):
        y = _as_vector(y)
        return 2.0 * self.capacity / self._gap(y) ** 3

    def hessian(self, y):
        return np.diag(self.hessian_diag(y))

    def third(self, y, h):
        y = _as_vector(y)
        return float(np.sum(6.0 * self.capacity / self._gap(y) ** 4 * h**3))

    def to_dict(self):
        return {"kind": self.kind, "capacity": self.capacity.tolist()}


class BoxLog:
    """Logarithmic box barrier -sum log((u - x)(x - l)), a 2n-self-concordant barrier."""

    kind = "box_log"

    def __init__(self, lower, upper):
        self.lower = _as_vector(lower)
        self.upper = _as_vector(upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def complexity(self) -> float:
        return 2.0 * self.dim

    def domain_bounds(self):
        return self.lower.copy(), self.upper.copy()

    def _gaps(self, x):
        up = self.upper - x
        lo = x - self.lower
        if np.any(up <= 0) or np.any(lo <= 0):
            raise DomainViolation("box barrier evaluated on or outside the box boundary")
        return up, lo

    def value(self, x):
        x = _as_vector(x)
        up, lo = self._gaps(x)
        return float(-np.sum(np.log(up)) - np.sum(np.log(lo)))

    def gradient(self, x):
        x = _as_vector(x)
        up, lo = self._gaps(x)
        return 1.0 / up - 1.0 / lo

    def hessian_diag(self, x):
        x = _as_vector(x)
        up, lo = self._gaps(x)
        return 1.0 / up**2 + 1.0 / lo**2

    def hessian(self, x):
        return np.diag(self.hessian_diag(x))

    def third(self, x, h):
        x = _as_vector(x)
        up, lo = self._gaps(x)
        return float(2.0 * np.sum(h**3 / up**3 - h**3 / lo**3))

    def local_norm_sq(self, x, h):
        """sum h_i^2/(u_i - x_i)^2 + h_i^2/(x_i - l_i)^2, the barrier metric."""
        return float(h @ (self.hessian_diag(x) * h))


class ScaledSum:
    """Positive combination sum_k w_k f_k of functions on a common space."""

    kind = "scaled_sum"

    def __init__(self, terms: Sequence[tuple[float, object]]):
        self.terms = [(float(w), fn) for w, fn in terms]
        if not self.terms or any(w <= 0 for w, _ in self.terms):
            raise ValueError("weights must be positive and at least one term given")

    @property
    def dim(self) -> int:
        return self.terms[0][1].dim

    def domain_bounds(self):
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        for _, fn in self.terms:
            l, u = fn.domain_bounds()
            lo, hi = np.maximum(lo, l), np.minimum(hi, u)
        return lo, hi

    def value(self, x):
        return sum(w * fn.value(x) for w, fn in self.terms)

    def gradient(self, x):
        return sum(w * fn.gradient(x) for w, fn in self.terms)

    def hessian(self, x):
        return sum(w * fn.hessian(x) for w, fn in self.terms)

    def third(self, x, h):
        return sum(w * fn.third(x, h) for w, fn in self.terms)


def evaluate(fn, x):
    """Return (value, gradient, hessian) of ``fn`` at ``x``."""
    x = _as_vector(x)
    return fn.value(x), fn.gradient(x), fn.hessian(x)


def third_directional(fn, x, h) -> float:
    """Third directional derivative nabla^3 fn(x)[h, h, h]."""
    return float(fn.third(_as_vector(x), _as_vector(h)))


def objective_from_dict(data: dict):
    kind = data.get("kind")
    fields = set(data) - {"kind"}
    if kind == "linear" and fields == {"c"}:
        return Linear(data["c"])
    if kind == "quadratic" and fields == {"Q", "c"}:
        return Quadratic(data["Q"], data["c"])
    if kind == "total_delay" and fields == {"capacity"}:
        return TotalDelay(data["capacity"])
    raise UnsupportedObjective(f"unknown objective kind or fields: {sorted(data)}")


# ---------------------------------------------------------------------------
# Numeric verification of self-concordance and compatibility
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class CheckReport:
    passed: bool
    samples: int
    worst_ratio: float
    failures: int
    worst_point: np.ndarray | None = None


def sample_interior(lower, upper, rng, count: int) -> np.ndarray:
    """Draw ``count`` points inside (lower, upper).

    Half the draws are uniform; the other half sit at log-uniform distances
    in [1e-6, 1] times the width from a random face, where self-concordance
    bounds are tightest. Infinite bounds fall back to a wide normal.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.size
    finite = np.isfinite(lower) & np.isfinite(upper)
    pts = rng.normal(scale=3.0, size=(count, n))
    if np.any(finite):
        lo, hi = lower[finite], upper[finite]
        width = hi - lo
        k = int(finite.sum())
        u = rng.uniform(0.0, 1.0, size=(count, k))
        dist = width * 10.0 ** rng.uniform(-6.0, 0.0, size=(count, k)) * 0.5
        near = np.where(rng.random((count, k)) < 0.5, lo + dist, hi - dist)
        mix = rng.random(count) < 0.5
        body = np.where(mix[:, None], lo + u * width, near)
        # clip away from the faces so the point is strictly interior
        body = np.clip(body, lo + 1e-9 * width, hi - 1e-9 * width)
        pts[:, finite] = body
    half = np.isfinite(lower) & ~np.isfinite(upper)
    pts[:, half] = lower[half] + np.abs(pts[:, half]) + 1e-6
    half = ~np.isfinite(lower) & np.isfinite(upper)
    pts[:, half] = upper[half] - np.abs(pts[:, half]) - 1e-6
    return pts


def check_self_concordance(fn, M: float, samples: int = 10_000, seed=0) -> CheckReport:
    """Sample |nabla^3 fn[h,h,h]| <= M (h^T nabla^2 fn h)^{3/2}.

    ``worst_ratio`` is the largest observed |third| / (M * curvature^{3/2});
    with M = 0 it is the largest |third| itself.
    """
    if M < 0:
        raise ValueError("M must be nonnegative")
    rng = np.random.default_rng(seed)
    lower, upper = fn.domain_bounds()
    xs = sample_interior(lower, upper, rng, samples)
    hs = rng.normal(size=xs.shape)
    worst, worst_x, failures = 0.0, None, 0
    for x, h in zip(xs, hs):
        curv = float(h @ fn.hessian(x) @ h)
        third = abs(fn.third(x, h))
        if M == 0.0:
            ratio = third
            ok = third <= 1e-12
        else:
            bound = M * max(curv, 0.0) ** 1.5
            ratio = third / bound if bound > 0 else (0.0 if third == 0 else math.inf)
            ok = ratio <= 1.0 + 1e-8
        if not ok:
            failures += 1
        if ratio > worst:
            worst, worst_x = ratio, x
    return CheckReport(failures == 0, samples, worst, failures, worst_x)


def compatibility_ratio(fn, lower, upper, x, h) -> float:
    """|nabla^3 psi[h,h,h]| / (h^T nabla^2 psi h * sqrt(barrier metric))."""
    barrier_metric = float(np.sum(h**2 / (upper - x) ** 2 + h**2 / (x - lower) ** 2))
    curv = float(h @ fn.hessian(x) @ h)
    denom = curv * math.sqrt(barrier_metric)
    third = abs(fn.third(x, h))
    if denom == 0.0:
        return 0.0 if third == 0.0 else math.inf
    return third / denom


def check_compatibility(fn, box, beta: float, samples: int = 10_000, seed=0) -> CheckReport:
    """Sample the beta-compatibility inequality of ``fn`` with the box barrier."""
    rng = np.random.default_rng(seed)
    lower, upper = np.asarray(box.lower, float), np.asarray(box.upper, float)
    xs = sample_interior(lower, upper, rng, samples)
    hs = rng.normal(size=xs.shape)
    worst, worst_x, failures = 0.0, None, 0
    for x, h in zip(xs, hs):
        ratio = compatibility_ratio(fn, lower, upper, x, h)
        if ratio > beta * (1.0 + 1e-8):
            failures += 1
        if ratio > worst:
            worst, worst_x = ratio, x
    return CheckReport(failures == 0, samples, worst, failures, worst_x)


# ---------------------------------------------------------------------------
# Self-concordance constants of the dual family
# ---------------------------------------------------------------------------


def objective_alpha(objective, box=None) -> float:
    """Scale alpha_i with M_i(t) = alpha_i / sqrt(t) for one block objective."""
    if isinstance(objective, (Linear, Quadratic)):
        return 2.0
    if isinstance(objective, TotalDelay):
        if box is not None and (
            np.any(np.asarray(box.lower) < 0) or np.any(np.asarray(box.upper) > objective.capacity)
        ):
            raise UnsupportedObjective("total delay needs its box inside [0, capacity]")
        return 2.0 * (1.0 + TOTAL_DELAY_BETA)
    raise UnsupportedObjective(f"no self-concordance rule for {type(objective).__name__}")


@dataclasses.dataclass(frozen=True)
class ScConstants:
    """Constants of the dual family: alpha(t) = alpha/sqrt(t), xi(t) = xi/t, eta(t) = eta/t."""

    alpha: float
    xi: float
    eta: float
    beta: float
    n_max: float

    def M(self, t: float) -> float:
        return self.alpha / math.sqrt(t)

    def alpha_t(self, t: float) -> float:
        return self.alpha / math.sqrt(t)


def derive_sc_constants(problem) -> ScConstants:
    alphas = [objective_alpha(blk.objective, blk.box) for blk in problem.blocks]
    alpha = max(alphas)
    beta = TOTAL_DELAY_BETA if alpha > 2.0 else 0.0
    n_max = max(blk.barrier_complexity for blk in problem.blocks)
    root = math.sqrt(n_max)
    return ScConstants(alpha=alpha, xi=alpha * root, eta=0.5 * alpha * root + 0.5, beta=beta, n_max=n_max)

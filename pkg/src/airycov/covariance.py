"""Covariances ``g(u) = Cov(A(u), A(0))`` of the Airy1 and Airy2 processes.

The covariance is written as the Hoeffding integral

    g(u) = int int [F2(u; s1, s2) - F(s1) F(s2)] ds1 ds2

which needs only distribution functions, no densities. The integral is
truncated to ``[-T, T]^2`` and evaluated by a tensor Clenshaw-Curtis rule.
Node pairs whose integrand is provably below ``SKIP_BOUND`` (Frechet bounds
in terms of the one-point values) are skipped.

At ``u = 0`` the joint law is ``F(min(s1, s2))`` and the double integral
reduces exactly to ``int 2 (T - m) F(m) dm - (int F)^2``, which avoids
integrating the kink on the diagonal.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .fredholm import FredholmError
from .kernels import Process
from .processes import TwoPointGrid, one_point_cdf
from .quadrature import clenshaw_curtis

# g2(u) = 1/u^2 + c/u^4 + O(u^-6) as u -> inf; stored, never computed
REFERENCE_C = -3.542

TRUNCATION = 10.0
POINTS = 100
# near-diagonal ridge of width ~sqrt(u): finer grid (and, for Airy1, a wider box)
SMALL_U = 0.05
SMALL_U_POINTS = 160
AIRY1_SMALL_U_TRUNCATION = 14.0

SKIP_BOUND = 1e-15
BOUNDARY_WARN = 1e-9
DET_TOL = 1e-14
WORKERS_ENV = "AIRYCOV_WORKERS"


class TruncationWarning(UserWarning):
    """The integrand is not negligible on the boundary of the truncation box."""


@dataclass
class CovCurve:
    """Covariance sampled on a grid of ``u``.

    ``failed`` lists grid points whose evaluation raised; their ``values``
    entries are NaN. ``stderr`` is ``None`` for deterministic curves.
    """

    tag: str
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    failed: tuple[float, ...] = ()

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values differ in shape")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    def __len__(self) -> int:
        return len(self.grid)

    @property
    def ok(self) -> bool:
        return not self.failed


def truncation(process: Process | str, u: float) -> tuple[float, int]:
    """``(T, n)``: box half-width and Clenshaw-Curtis order used at ``u``."""
    process = Process(process)
    if u <= SMALL_U:
        t = AIRY1_SMALL_U_TRUNCATION if process is Process.AIRY1 else TRUNCATION
        return t, SMALL_U_POINTS
    return TRUNCATION, POINTS


@lru_cache(maxsize=32)
def _one_point_table(
    process: Process, t: float, n: int, tol: float = DET_TOL
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rule = clenshaw_curtis(n, -t, t)
    f = np.array([one_point_cdf(process, s, tol) for s in rule.nodes])
    for a in (rule.nodes, rule.weights, f):
        a.setflags(write=False)
    return rule.nodes, rule.weights, f


def pair_bound(f1, f2):
    """Upper bound on ``|F2 - F1 F2|`` from the Frechet bounds on ``F2``."""
    f1 = np.asarray(f1)
    f2 = np.asarray(f2)
    upper = np.minimum(f1 * (1.0 - f2), f2 * (1.0 - f1))
    lower = np.minimum((1.0 - f1) * (1.0 - f2), f1 * f2)
    return np.maximum(upper, lower)


def _variance_reduced(nodes: np.ndarray, weights: np.ndarray, f: np.ndarray, t: float) -> float:
    return float(weights @ (2.0 * (t - nodes) * f) - (weights @ f) ** 2)


def _hoeffding(process: Process, u: float, t: float, n: int, tol: float) -> tuple[float, float]:
    nodes, weights, f = _one_point_table(process, t, n, tol)
    if u == 0.0:
        # integrand on the boundary is F(min) - F F, known without determinants
        edge = np.concatenate([np.minimum(f, f[0]) - f * f[0], np.minimum(f, f[-1]) - f * f[-1]])
        return _variance_reduced(nodes, weights, f, t), float(np.max(np.abs(edge)))
    grid = TwoPointGrid(process, u)
    bound = pair_bound(f[:, None], f[None, :])
    total = 0.0
    edge = 0.0
    last = len(nodes) - 1
    for i in range(len(nodes)):
        row = 0.0
        for j in range(len(nodes)):
            if bound[i, j] < SKIP_BOUND:
                continue
            value, _ = grid.value_controlled(nodes[i], nodes[j], tol)
            diff = value - f[i] * f[j]
            row += weights[j] * diff
            if i in (0, last) or j in (0, last):
                edge = max(edge, abs(diff))
        total += weights[i] * row
    grid.clear()
    return total, edge


def covariance_point(
    process: Process | str,
    u: float,
    t: float | None = None,
    n: int | None = None,
    tol: float = DET_TOL,
) -> float:
    """``Cov(A(u), A(0))`` by the truncated Hoeffding integral.

    ``t`` and ``n`` override the box half-width and Clenshaw-Curtis order
    chosen by :func:`truncation`; ``tol`` is the determinant tolerance. Warns with :class:`TruncationWarning` when the
    integrand exceeds ``BOUNDARY_WARN`` on the edge of the box.
    """
    process = Process(process)
    if not (math.isfinite(u) and u >= 0):
        raise ValueError(f"u must be finite and >= 0, got {u!r}")
    t_def, n_def = truncation(process, u)
    t = t_def if t is None else float(t)
    n = n_def if n is None else int(n)
    if not 1e-14 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-14, 1e-4], got {tol!r}")
    value, edge = _hoeffding(process, float(u), t, n, tol)
    if edge > BOUNDARY_WARN:
        warnings.warn(
            f"{process.value} u={u}: integrand {edge:.2e} on the boundary of [-{t}, {t}]^2",
            TruncationWarning,
            stacklevel=2,
        )
    return value


def _grid(umax: float, du: float) -> np.ndarray:
    count = int(math.floor(umax / du + 1e-9))
    return du * np.arange(count + 1)


def _worker_count() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _safe_point(process: Process, u: float, tol: float = DET_TOL) -> float:
    try:
        return covariance_point(process, u, tol=tol)
    except (FredholmError, ArithmeticError):
        return math.nan


def covariance_curve(
    process: Process | str,
    umax: float,
    du: float,
    workers: int | None = None,
    tol: float = DET_TOL,
) -> CovCurve:
    """:func:`covariance_point` on ``{0, du, 2 du, ...} <= umax``.

    ``umax = 0`` gives the single variance point. Points that fail are kept
    as NaN and listed in ``CovCurve.failed``.
    """
    process = Process(process)
    if not (math.isfinite(du) and du > 0):
        raise ValueError(f"du must be positive, got {du!r}")
    if not (math.isfinite(umax) and 0 <= umax <= 10):
        raise ValueError(f"umax must lie in [0, 10], got {umax!r}")
    grid = _grid(umax, du)
    workers = _worker_count() if workers is None else workers
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_safe_point, [process] * len(grid), grid, [tol] * len(grid)))
    else:
        values = [_safe_point(process, u, tol) for u in grid]
    values = np.array(values)
    failed = tuple(float(u) for u, v in zip(grid, values) if not math.isfinite(v))
    meta = {
        "truncation": [truncation(process, u)[0] for u in grid],
        "points": [truncation(process, u)[1] for u in grid],
        "det_tol": tol,
        "reference_c": REFERENCE_C,
    }
    return CovCurve(process.value, grid, values, None, meta, failed)


def _extrapolate_to_zero(h: Sequence[float], d: Sequence[float]) -> float:
    # Neville's scheme for the interpolating polynomial in h, evaluated at 0
    h = list(map(float, h))
    p = list(map(float, d))
    for level in range(1, len(h)):
        for i in range(len(h) - level):
            j = i + level
            p[i] = (h[i] * p[i + 1] - h[j] * p[i]) / (h[i] - h[j])
    return p[0]


def derivative_at_zero(
    process: Process | str,
    g: Callable[[float], float] | None = None,
    steps: Sequence[float] = (0.08, 0.04, 0.02),
) -> float:
    """``g'(0)`` from one-sided differences ``(g(h) - g(0)) / h``, Richardson
    extrapolated over ``steps``. ``g`` replaces the covariance (test hook)."""
    if g is None:
        process = Process(process)

        def g(u):
            return covariance_point(process, u)

    if len(steps) < 1 or any(not h > 0 for h in steps):
        raise ValueError("steps must be positive")
    g0 = g(0.0)
    diffs = [(g(h) - g0) / h for h in steps]
    return _extrapolate_to_zero(steps, diffs)


def one_point_moments(
    process: Process | str, t: float = TRUNCATION, n: int = POINTS
) -> tuple[float, float]:
    """Mean and variance of the one-point law, from the distribution function
    on ``[-t, t]``: ``E X = int_0^t (1 - F) - int_-t^0 F`` and
    ``E X^2 = int_0^t 2 s (1 - F) + int_-t^0 (-2 s) F``."""
    process = Process(process)
    neg = clenshaw_curtis(n, -t, 0.0)
    pos = clenshaw_curtis(n, 0.0, t)
    f_neg = np.array([one_point_cdf(process, s, DET_TOL) for s in neg.nodes])
    f_pos = np.array([one_point_cdf(process, s, DET_TOL) for s in pos.nodes])
    mean = pos.weights @ (1.0 - f_pos) - neg.weights @ f_neg
    second = pos.weights @ (2.0 * pos.nodes * (1.0 - f_pos)) + neg.weights @ (-2.0 * neg.nodes * f_neg)
    return float(mean), float(second - mean * mean)


def airy2_asymptotic(u, c: float = REFERENCE_C):
    """Large-``u`` expansion ``1/u^2 + c/u^4`` of the Airy2 covariance."""
    u = np.asarray(u, dtype=float)
    return 1.0 / u**2 + c / u**4

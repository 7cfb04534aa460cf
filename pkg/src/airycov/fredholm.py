"""Nystrom discretisation of ``det(1 - chi_s K chi_s)`` on ``{u_1..u_m} x R``.

Each time slice ``u_i`` gets its own tangent-mapped Gauss-Legendre rule on
``(s_i, inf)``; block ``(i, j)`` of the matrix is
``w_i^(1/2) K(u_i, x_i; u_j, x_j) w_j^(1/2)`` and the determinant of
``I - A`` approximates the Fredholm determinant with an error that decays
exponentially in the rule size ``n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .kernels import KernelSlot, Process
from .quadrature import DEFAULT_SCALE, semi_infinite_rule

MAX_ORDER = 4096
N_START = 20
N_MAX = 640


class FredholmError(ArithmeticError):
    """Determinant evaluation failed numerically."""


class ConvergenceError(FredholmError):
    """Doubling the rule size did not reach the requested tolerance."""

    def __init__(self, message: str, last_values: tuple[float, float]):
        super().__init__(message)
        self.last_values = last_values


# (u, x, u', y) -> matrix; lets tests plug in stub kernels
MatrixKernel = Callable[[float, np.ndarray, float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class JointProblem:
    process: Process | str
    times: Sequence[float]
    thresholds: Sequence[float]
    n: int = 40
    scale: float = DEFAULT_SCALE

    def __post_init__(self):
        object.__setattr__(self, "process", Process(self.process))
        times = tuple(float(u) for u in self.times)
        thresholds = tuple(float(s) for s in self.thresholds)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "thresholds", thresholds)
        if not times or len(times) != len(thresholds):
            raise ValueError("times and thresholds must be non-empty and of equal length")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"times must be strictly increasing, got {times}")
        if not all(math.isfinite(v) for v in times + thresholds):
            raise ValueError("times and thresholds must be finite")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if len(times) * self.n > MAX_ORDER:
            raise ValueError(f"m*n = {len(times) * self.n} exceeds {MAX_ORDER}")

    @property
    def m(self) -> int:
        return len(self.times)

    def with_n(self, n: int) -> "JointProblem":
        return JointProblem(self.process, self.times, self.thresholds, n, self.scale)


@dataclass
class BlockMatrix:
    """m x m grid of n x n blocks ``A_ij``, plus the assembled ``mn x mn`` matrix."""

    blocks: list[list[np.ndarray]]
    nodes: list[np.ndarray] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def matrix(self) -> np.ndarray:
        return np.block(self.blocks)


def _default_kernel(process: Process) -> MatrixKernel:
    def kernel(u, x, u2, y):
        return KernelSlot(process, u, u2).matrix(x, y)

    return kernel


def assemble(problem: JointProblem, kernel: MatrixKernel | None = None) -> BlockMatrix:
    """Build the blocks ``(A_ij)_pq = w_ip^(1/2) K(u_i, x_ip; u_j, x_jq) w_jq^(1/2)``."""
    kernel = kernel or _default_kernel(problem.process)
    rules = [semi_infinite_rule(s, problem.n, problem.scale) for s in problem.thresholds]
    roots = [np.sqrt(r.weights) for r in rules]
    blocks = []
    for i, ui in enumerate(problem.times):
        row = []
        for j, uj in enumerate(problem.times):
            k = kernel(ui, rules[i].nodes, uj, rules[j].nodes)
            row.append(roots[i][:, None] * k * roots[j][None, :])
        blocks.append(row)
    return BlockMatrix(blocks, [r.nodes for r in rules])


def det_i_minus(block: BlockMatrix | np.ndarray) -> float:
    """``det(I - A)`` by LU with partial pivoting, accumulated as sign * exp(log|det|)."""
    a = block.matrix if isinstance(block, BlockMatrix) else np.asarray(block, dtype=float)
    if not np.all(np.isfinite(a)):
        bad = np.argwhere(~np.isfinite(a))
        raise FredholmError(f"non-finite matrix entries, first at {tuple(int(i) for i in bad[0])}")
    m = np.eye(a.shape[0]) - a
    with warnings.catch_warnings():
        # an exactly singular I - A is reported as det 0 below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, _piv = scipy.linalg.lu_factor(m, check_finite=False)
    diag = np.diag(lu)
    if np.any(diag == 0.0):
        return 0.0
    # each row swap flips the sign
    swaps = int(np.count_nonzero(_piv != np.arange(len(_piv))))
    sign = (-1.0) ** swaps * np.prod(np.sign(diag))
    logdet = float(np.sum(np.log(np.abs(diag))))
    if logdet > 700.0:
        raise FredholmError(f"determinant overflow, log|det| = {logdet:.1f}")
    return float(sign * math.exp(logdet))


def evaluate(problem: JointProblem, kernel: MatrixKernel | None = None) -> float:
    return det_i_minus(assemble(problem, kernel))


def evaluate_with_error_control(
    problem: JointProblem,
    tol: float = 1e-14,
    kernel: MatrixKernel | None = None,
    n_start: int = N_START,
    n_max: int = N_MAX,
) -> tuple[float, int]:
    """Double ``n`` from ``n_start`` until two successive values differ by at most
    ``tol``. Returns ``(value, n_used)`` where ``n_used`` is the larger size.

    Raises :class:`ConvergenceError` when ``n`` would exceed ``n_max``.
    """
    if not tol >= 1e-14:
        raise ValueError(f"tol must be >= 1e-14, got {tol!r}")
    n = n_start
    prev_prev = math.nan
    prev = evaluate(problem.with_n(n), kernel)
    while 2 * n <= n_max:
        n *= 2
        cur = evaluate(problem.with_n(n), kernel)
        if abs(cur - prev) <= tol:
            return cur, n
        prev_prev, prev = prev, cur
    raise ConvergenceError(
        f"no convergence to {tol:g} up to n={n}: last values {prev_prev!r}, {prev!r}",
        (prev_prev, prev),
    )

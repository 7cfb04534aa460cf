"""One- and two-point distribution functions of the Airy1 and Airy2 processes.

Both processes are stationary, so every two-point query is placed at times
``{0, u}``. :class:`TwoPointGrid` evaluates ``P(A(0) <= s1, A(u) <= s2)`` over
many threshold pairs for one fixed ``u``. It caches per-threshold node sets
and kernel factors, which the covariance integrals need for speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .airy import ai_exp, ai_split
from .fredholm import ConvergenceError, JointProblem, evaluate_with_error_control
from .kernels import Process, equal_time_airy_kernel
from .quadrature import DEFAULT_SCALE, semi_infinite_rule

# thresholds at or above this behave as +infinity
S_INFINITY = 40.0


@dataclass(frozen=True)
class TwoPointQuery:
    process: Process | str
    u: float
    s1: float
    s2: float
    tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "process", Process(self.process))
        if not (math.isfinite(self.u) and self.u >= 0):
            raise ValueError(f"u must be finite and >= 0, got {self.u!r}")
        if not (math.isfinite(self.s1) and math.isfinite(self.s2)):
            raise ValueError("thresholds must be finite")
        if not 1e-14 <= self.tol <= 1e-4:
            raise ValueError(f"tol must lie in [1e-14, 1e-4], got {self.tol!r}")


def one_point_cdf(process: Process | str, s: float, tol: float = 1e-12) -> float:
    """``P(A(0) <= s)`` as a one-slice Fredholm determinant."""
    if not math.isfinite(s):
        raise ValueError(f"s must be finite, got {s!r}")
    value, _ = evaluate_with_error_control(JointProblem(process, [0.0], [s]), tol)
    return value


def two_point_cdf(q: TwoPointQuery) -> float:
    """``P(A(0) <= s1, A(u) <= s2)``; at ``u = 0`` this is the one-point law at ``min(s1, s2)``."""
    if q.u == 0.0:
        return one_point_cdf(q.process, min(q.s1, q.s2), q.tol)
    value, _ = evaluate_with_error_control(
        JointProblem(q.process, [0.0, q.u], [q.s1, q.s2]), q.tol
    )
    return value


def _slogdet_value(m: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(m)
    if sign == 0.0:
        return 0.0
    return float(sign * math.exp(logdet))


class _Slice:
    """Nodes, root weights, and kernel factors for one threshold ``s`` at size ``n``."""

    __slots__ = ("x", "r", "eye_minus_diag", "p_neg", "p_pos", "q_neg")

    def __init__(self, x: np.ndarray, r: np.ndarray):
        self.x = x
        self.r = r
        self.eye_minus_diag = None
        self.p_neg = None
        self.p_pos = None
        self.q_neg = None


class TwoPointGrid:
    """Evaluator of the two-point law at fixed ``(process, u)``.

    ``value(s1, s2, n)`` returns the Nystrom determinant of size ``2n``. The
    Airy2 off-diagonal blocks are products of cached ``n x L`` Airy factor
    matrices; the Airy1 blocks share a single ``n x n`` Airy evaluation.
    """

    def __init__(self, process: Process | str, u: float, scale: float = DEFAULT_SCALE):
        self.process = Process(process)
        self.u = float(u)
        if not self.u > 0:
            raise ValueError("TwoPointGrid needs u > 0")
        self.scale = scale
        self._slices: dict[tuple[float, int], _Slice] = {}
        lam_rule = semi_infinite_rule(0.0, kernels.LAMBDA_N)
        self._lam, self._lam_w = lam_rule.nodes, lam_rule.weights
        self._mu, self._mu_w = kernels._panel_rule(
            kernels.MU_DECAY / self.u, kernels.MU_PANELS_PER_UNIT
        )

    def _slice(self, s: float, n: int) -> _Slice:
        key = (float(s), int(n))
        sl = self._slices.get(key)
        if sl is not None:
            return sl
        rule = semi_infinite_rule(s, n, self.scale)
        sl = _Slice(rule.nodes, np.sqrt(rule.weights))
        x, r = sl.x, sl.r
        if self.process is Process.AIRY2:
            k = equal_time_airy_kernel(x)
            sl.eye_minus_diag = np.eye(n) - r[:, None] * k * r[None, :]
            lam = self._lam[None, :]
            half_w = np.sqrt(self._lam_w)[None, :]
            sl.p_neg = ai_exp(x[:, None] + lam, -0.5 * self.u * lam) * half_w
            sl.p_pos = ai_exp(x[:, None] + lam, 0.5 * self.u * lam) * half_w
        else:
            k = ai_exp(x[:, None] + x[None, :])
            sl.eye_minus_diag = np.eye(n) - r[:, None] * k * r[None, :]
        self._slices[key] = sl
        return sl

    def _airy2_upper(self, a: _Slice, b: _Slice) -> np.ndarray:
        # K(0, x; u, y): half line minus closed form, or the direct sum
        u = self.u
        logg = kernels.log_full_line_integral(u, a.x[:, None], b.x[None, :])
        direct = logg > kernels.SUBTRACTION_LOGMAX
        # entries routed to the direct sum may overflow here; they are replaced below
        with np.errstate(over="ignore", invalid="ignore"):
            k = a.p_pos @ b.p_pos.T - np.exp(np.minimum(logg, kernels.SUBTRACTION_LOGMAX))
        if direct.any():
            rows = direct.any(axis=1)
            cols = direct.any(axis=0)
            qa = self._q(a)[rows]
            qb = self._q(b)[cols]
            sub = -(qa @ qb.T)
            blk = np.ix_(rows, cols)
            k[blk] = np.where(direct[blk], sub, k[blk])
        return k

    def _q(self, sl: _Slice) -> np.ndarray:
        if sl.q_neg is None:
            mu = self._mu[None, :]
            sl.q_neg = ai_exp(sl.x[:, None] - mu, -0.5 * self.u * mu) * np.sqrt(self._mu_w)[None, :]
        return sl.q_neg

    def matrix(self, s1: float, s2: float, n: int) -> np.ndarray:
        """The ``2n x 2n`` matrix ``I - A``."""
        a = self._slice(s1, n)
        b = self._slice(s2, n)
        if self.process is Process.AIRY2:
            k12 = self._airy2_upper(a, b)
            k21 = b.p_neg @ a.p_neg.T
        else:
            u = self.u
            xy = a.x[:, None] + b.x[None, :]
            mant, expo = ai_split(xy + u * u)
            shift = u * xy + (2.0 / 3.0) * u**3
            d = b.x[None, :] - a.x[:, None]
            k12 = mant * np.exp(expo + shift)
            k12 -= np.exp(-(d * d) / (4.0 * u) - 0.5 * math.log(4.0 * math.pi * u))
            k21 = (mant * np.exp(expo - shift)).T
        m = np.empty((2 * n, 2 * n))
        m[:n, :n] = a.eye_minus_diag
        m[n:, n:] = b.eye_minus_diag
        m[:n, n:] = -(a.r[:, None] * k12 * b.r[None, :])
        m[n:, :n] = -(b.r[:, None] * k21 * a.r[None, :])
        return m

    def value(self, s1: float, s2: float, n: int) -> float:
        return _slogdet_value(self.matrix(s1, s2, n))

    def value_controlled(
        self, s1: float, s2: float, tol: float = 1e-12, n_start: int = 20, n_max: int = 640
    ) -> tuple[float, int]:
        """Value with the digit-doubling error estimate.

        Successive sizes ``n`` and ``2n`` differing by ``delta`` mean the
        ``2n`` value is accurate to roughly ``delta**2``; the value is accepted
        once that estimate is below ``tol``.
        """
        n = n_start
        prev = self.value(s1, s2, n)
        while 2 * n <= n_max:
            n *= 2
            cur = self.value(s1, s2, n)
            delta = abs(cur - prev)
            if delta <= 1e-4 and delta * delta <= tol or delta <= tol:
                return cur, n
            prev = cur
        raise ConvergenceError(
            f"two-point value at (s1, s2)=({s1}, {s2}), u={self.u} did not converge",
            (prev, cur),
        )

    def clear(self) -> None:
        self._slices.clear()

"""Extended Airy2 kernel and Airy1 kernel.

Both kernels are exposed pointwise (``airy2_kernel``, ``airy1_kernel``) and as
dense matrices over node vectors (``airy2_matrix``, ``airy1_matrix``), which is
what the Nystrom assembly uses.

The Airy2 kernel is an integral over lambda of
``exp((u' - u) lambda) Ai(s + lambda) Ai(s' + lambda)``. For ``u' <= u`` it runs
over (0, inf) and is discretised by the tangent-mapped Gauss-Legendre rule, so
the matrix is a product ``P_x diag(w) P_y^T``. For ``u' > u`` it is minus the
integral over (-inf, 0), which is oscillatory. With ``t = u' - u`` the integral
over the whole line has the closed form

    G(t; s, s') = (4 pi t)^(-1/2) exp(-(s - s')^2 / (4t) - t (s + s') / 2 + t^3 / 12)

so the kernel equals the half-line integral minus ``G``. That subtraction
loses about ``log10 G`` digits. Entries with ``G > exp(SUBTRACTION_LOGMAX)``
are instead integrated directly over (-inf, 0), where ``exp(t lambda)`` then
decays fast enough for a truncated panel Gauss-Legendre sum.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .airy import ai_and_prime, ai_exp
from .quadrature import gauss_legendre, semi_infinite_rule

SUBTRACTION_LOGMAX = math.log(1e3)
LAMBDA_N = 128
# panels per unit length of the direct (-inf, 0) sum; 12 nodes per panel
MU_PANELS_PER_UNIT = 2
MU_PANEL_NODES = 12
# exp(-MU_DECAY) is far below double resolution of O(1) kernel values
MU_DECAY = 40.0
# points closer than this (scaled by 1/sqrt|midpoint| far out) use the
# midpoint Taylor series instead of the divided difference
NEAR_DIAGONAL = 0.1
NEAR_DIAGONAL_TERMS = 24


class Process(str, enum.Enum):
    AIRY1 = "airy1"
    AIRY2 = "airy2"


def _check_finite(*args: float) -> None:
    for a in args:
        if not math.isfinite(a):
            raise ValueError(f"kernel arguments must be finite, got {a!r}")


def log_full_line_integral(t, s, s2):
    s = np.asarray(s, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    expo = -((s - s2) ** 2) / (4.0 * t) - 0.5 * t * (s + s2) + t**3 / 12.0
    return expo - 0.5 * math.log(4.0 * math.pi * t)


def full_line_integral(t, s, s2):
    """Closed form of the lambda integral over the whole real line, ``t > 0``."""
    return np.exp(log_full_line_integral(t, s, s2))


def _half_line(t: float, x: np.ndarray, y: np.ndarray, n_lambda: int) -> np.ndarray:
    rule = semi_infinite_rule(0.0, n_lambda)
    lam = rule.nodes
    # split exp(t lambda) evenly between the two factors
    px = ai_exp(x[:, None] + lam[None, :], 0.5 * t * lam[None, :])
    py = px if y is x else ai_exp(y[:, None] + lam[None, :], 0.5 * t * lam[None, :])
    return (px * rule.weights) @ py.T


def _panel_rule(length: float, panels_per_unit: int) -> tuple[np.ndarray, np.ndarray]:
    npan = max(1, math.ceil(length * panels_per_unit))
    ref = gauss_legendre(MU_PANEL_NODES, 0.0, length / npan)
    offsets = np.arange(npan) * (length / npan)
    nodes = (offsets[:, None] + ref.nodes[None, :]).ravel()
    weights = np.tile(ref.weights, npan)
    return nodes, weights


def _negative_line(
    t: float, x: np.ndarray, y: np.ndarray, panels_per_unit: int
) -> np.ndarray:
    # integral over (-inf, 0) as integral over mu in (0, MU_DECAY / t)
    mu, w = _panel_rule(MU_DECAY / t, panels_per_unit)
    px = ai_exp(x[:, None] - mu[None, :], -0.5 * t * mu[None, :])
    py = px if y is x else ai_exp(y[:, None] - mu[None, :], -0.5 * t * mu[None, :])
    return (px * w) @ py.T


def equal_time_airy_kernel(x, y=None) -> np.ndarray:
    """Standard Airy kernel ``(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y)`` as a matrix.

    Coincident points use the diagonal limit ``Ai'(x)^2 - x Ai(x)^2``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = x if y is None else np.atleast_1d(np.asarray(y, dtype=float))
    ax, apx = ai_and_prime(x)
    ay, apy = ai_and_prime(y)
    diff = x[:, None] - y[None, :]
    num = ax[:, None] * apy[None, :] - apx[:, None] * ay[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        k = num / diff
    mid = 0.5 * (x[:, None] + y[None, :])
    close = np.abs(diff) <= NEAR_DIAGONAL * np.minimum(1.0, 1.0 / np.sqrt(np.abs(mid) + 1e-300))
    if close.any():
        k[close] = _near_diagonal(mid[close], diff[close])
    return k


def _near_diagonal(m: np.ndarray, d: np.ndarray) -> np.ndarray:
    # Taylor expansion of Ai about the midpoint m, with Ai'' = x Ai giving
    # c_{k+2} = (m c_k + c_{k-1}) / ((k + 2)(k + 1)). Splitting the series into
    # even and odd parts E + O in h = d / 2, the numerator is 2 (O O' - E E')
    # and the kernel is (O / h) O' - E (E' / h), all plain power series.
    a, ap = ai_and_prime(m)
    c = np.zeros((NEAR_DIAGONAL_TERMS, m.size))
    c[0], c[1] = a, ap
    c[2] = m * a / 2.0
    for j in range(1, NEAR_DIAGONAL_TERMS - 2):
        c[j + 2] = (m * c[j] + c[j - 1]) / ((j + 2) * (j + 1))
    h = 0.5 * d
    k = np.arange(NEAR_DIAGONAL_TERMS)[:, None]
    odd = k % 2 == 1
    hp = h[None, :] ** np.maximum(k - 1, 0)  # h^(k-1)
    odd_over_h = np.sum(np.where(odd, c * hp, 0.0), axis=0)
    d_odd = np.sum(np.where(odd, k * c * hp, 0.0), axis=0)
    even = np.sum(np.where(odd, 0.0, c * h[None, :] ** k), axis=0)
    hm2 = h[None, :] ** np.maximum(k - 2, 0)
    d_even_over_h = np.sum(np.where(odd | (k == 0), 0.0, k * c * hm2), axis=0)
    return odd_over_h * d_odd - even * d_even_over_h


def airy2_matrix(
    u: float,
    x,
    u2: float,
    y,
    n_lambda: int = LAMBDA_N,
    mu_panels: int = MU_PANELS_PER_UNIT,
) -> np.ndarray:
    """Matrix ``K_A2(u, x_p; u2, y_q)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    t = float(u2) - float(u)
    if t <= 0.0:
        return _half_line(t, x, y, n_lambda)
    logg = log_full_line_integral(t, x[:, None], y[None, :])
    direct = logg > SUBTRACTION_LOGMAX
    k = np.empty(logg.shape)
    if not direct.all():
        with np.errstate(over="ignore", invalid="ignore"):
            k = _half_line(t, x, y, n_lambda) - np.exp(np.minimum(logg, SUBTRACTION_LOGMAX))
    if direct.any():
        rows = direct.any(axis=1)
        cols = direct.any(axis=0)
        sub = -_negative_line(t, x[rows], y[cols], mu_panels)
        k[np.ix_(rows, cols)] = np.where(direct[np.ix_(rows, cols)], sub, k[np.ix_(rows, cols)])
    return k


def airy1_matrix(u: float, x, u2: float, y) -> np.ndarray:
    """Matrix ``K_A1(u, x_p; u2, y_q)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    t = float(u2) - float(u)
    xy = x[:, None] + y[None, :]
    k = ai_exp(xy + t * t, t * xy + (2.0 / 3.0) * t**3)
    if t > 0.0:
        d = y[None, :] - x[:, None]
        k = k - np.exp(-(d * d) / (4.0 * t) - 0.5 * math.log(4.0 * math.pi * t))
    return k


def airy2_kernel(
    u: float,
    s: float,
    u2: float,
    s2: float,
    tol: float = 1e-13,
    n_start: int = 40,
    n_max: int = 320,
) -> float:
    """Pointwise extended Airy2 kernel ``K_A2(u, s; u2, s2)``.

    The internal rule size is doubled from ``n_start`` until two successive
    values agree to ``tol`` (or ``n_max`` is reached).
    """
    _check_finite(u, s, u2, s2)
    n = n_start
    p = 1
    prev = airy2_matrix(u, s, u2, s2, n_lambda=n, mu_panels=p)[0, 0]
    while n < n_max:
        n *= 2
        p *= 2
        cur = airy2_matrix(u, s, u2, s2, n_lambda=n, mu_panels=p)[0, 0]
        if abs(cur - prev) <= tol:
            return float(cur)
        prev = cur
    return float(prev)


def airy1_kernel(u: float, s: float, u2: float, s2: float) -> float:
    """Pointwise Airy1 kernel ``K_A1(u, s; u2, s2)``.

    >>> airy1_kernel(0.0, 0.5, 0.0, -0.2) == airy1_kernel(0.0, -0.2, 0.0, 0.5)
    True
    """
    _check_finite(u, s, u2, s2)
    return float(airy1_matrix(u, s, u2, s2)[0, 0])


@dataclass(frozen=True)
class KernelSlot:
    """A kernel with its two time arguments fixed: ``(s, s2) -> K(u, s; u2, s2)``."""

    process: Process
    u: float
    u_prime: float

    def matrix(self, x, y) -> np.ndarray:
        if self.process is Process.AIRY2:
            if self.u == self.u_prime:
                return equal_time_airy_kernel(x, y)
            return airy2_matrix(self.u, x, self.u_prime, y)
        return airy1_matrix(self.u, x, self.u_prime, y)

    def __call__(self, s: float, s2: float) -> float:
        if self.process is Process.AIRY2:
            return airy2_kernel(self.u, s, self.u_prime, s2)
        return airy1_kernel(self.u, s, self.u_prime, s2)

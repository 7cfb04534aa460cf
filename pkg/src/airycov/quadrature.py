"""Quadrature rules: Gauss-Legendre, Clenshaw-Curtis, and a tangent map to (s, inf).

All rules are returned as :class:`QuadratureRule` instances holding numpy arrays
of nodes and weights, so ``rule.integrate(f)`` works for any vectorised ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_SCALE = 10.0


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of an integration rule on ``domain = (a, b)``.

    ``b`` may be ``inf`` for transformed semi-infinite rules.
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: tuple[float, float]

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@dataclass(frozen=True)
class SemiInfiniteTransform:
    """The map ``xi -> s + scale * tan(pi * xi / 2)`` from (0, 1) onto (s, inf)."""

    s: float
    scale: float = DEFAULT_SCALE

    def __call__(self, xi):
        return self.s + self.scale * np.tan(0.5 * np.pi * np.asarray(xi))

    def derivative(self, xi):
        c = np.cos(0.5 * np.pi * np.asarray(xi))
        return 0.5 * np.pi * self.scale / (c * c)


def _check_interval(n: int, a: float, b: float, nmin: int) -> None:
    if int(n) != n or n < nmin:
        raise ValueError(f"n must be an integer >= {nmin}, got {n!r}")
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise ValueError(f"need finite a < b, got a={a!r}, b={b!r}")


def _legendre_pair(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # (P_{n-1}(x), P_n(x)) by the three-term recurrence
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    return p0, p1


@lru_cache(maxsize=64)
def _legendre_reference(n: int) -> tuple[np.ndarray, np.ndarray]:
    # Newton on P_n(cos t) in the angle t from the Tricomi-type guesses.
    # Working in t keeps 1 - x^2 = sin(t)^2 accurate near the endpoints.
    k = np.arange(1, n + 1)
    t = np.pi * (k - 0.25) / (n + 0.5)
    if n == 1:
        t = np.array([0.5 * np.pi])
    for _ in range(100):
        x, st = np.cos(t), np.sin(t)
        pm, p = _legendre_pair(n, x)
        # d/dt P_n(cos t) = -sin(t) P_n'(x) = n (P_n x - P_{n-1}) / sin(t)
        dt = p * st / (n * (x * p - pm))
        t = t - dt
        if np.max(np.abs(dt)) <= 1e-15:
            break
    x, st = np.cos(t), np.sin(t)
    pm, p = _legendre_pair(n, x)
    # w = 2 / ((1 - x^2) P_n'(x)^2) with (1 - x^2) P_n' = n (P_{n-1} - x P_n)
    w = 2.0 * st * st / (n * (pm - x * p)) ** 2
    x, w = x[::-1].copy(), w[::-1].copy()
    # exact symmetry about the origin
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [a, b], exact up to degree 2n-1."""
    _check_interval(n, a, b, 1)
    x, w = _legendre_reference(int(n))
    half = 0.5 * (b - a)
    return QuadratureRule(0.5 * (a + b) + half * x, half * w, (a, b))


@lru_cache(maxsize=64)
def _clenshaw_curtis_reference(n: int) -> tuple[np.ndarray, np.ndarray]:
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    inner = theta[1:-1]
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
        v -= np.cos(n * inner) / (n * n - 1)
    else:
        w[0] = w[n] = 1.0 / (n * n)
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / n
    # cos(theta) runs from 1 down to -1; flip to increasing order
    x = -np.cos(theta)
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def clenshaw_curtis(n: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    """Clenshaw-Curtis rule with n + 1 Chebyshev extreme points on [a, b].

    Exact for polynomials of degree <= n. Endpoints are included.
    """
    _check_interval(n, a, b, 2)
    x, w = _clenshaw_curtis_reference(int(n))
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b) + half * x
    nodes[0], nodes[-1] = a, b
    return QuadratureRule(nodes, half * w, (a, b))


@lru_cache(maxsize=4096)
def _semi_infinite_cached(s: float, n: int, scale: float) -> QuadratureRule:
    xi, w = _legendre_reference(n)
    xi = 0.5 * (xi + 1.0)
    w = 0.5 * w
    phi = SemiInfiniteTransform(s, scale)
    nodes = phi(xi)
    weights = w * phi.derivative(xi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, (s, math.inf))


def semi_infinite_rule(s: float, n: int, scale: float = DEFAULT_SCALE) -> QuadratureRule:
    """Rule for integrals over (s, inf): Gauss-Legendre on (0, 1) pushed
    through ``xi -> s + scale * tan(pi * xi / 2)``.

    >>> rule = semi_infinite_rule(0.0, 40)
    >>> round(rule.integrate(lambda x: np.exp(-x)), 10)
    1.0
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not math.isfinite(s):
        raise ValueError(f"s must be finite, got {s!r}")
    if not (math.isfinite(scale) and scale > 0):
        raise ValueError(f"scale must be positive, got {scale!r}")
    return _semi_infinite_cached(float(s), int(n), float(scale))

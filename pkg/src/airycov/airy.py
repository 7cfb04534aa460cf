"""Airy function Ai and its derivative on the real line.

Evaluation is vectorised and table driven:

* ``x <= ASYMPTOTIC_X``: Taylor expansion about the nearest point of a grid
  of centres with spacing ``CENTRE_STEP``. Coefficients follow from
  ``Ai'' = x Ai`` once ``Ai`` and ``Ai'`` are known at the centre; those
  anchor values are taken from ``scipy.special.airy``.
* ``x > ASYMPTOTIC_X``: the exponentially small asymptotic series, combined
  in log space so that ``Ai(x) * exp(c)`` never forms ``0 * inf``.

Past ``x ~ 104`` the value underflows to 0.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special

AIRY_XMIN = -200.0
ASYMPTOTIC_X = 12.0
CENTRE_STEP = 0.25
TAYLOR_TERMS = 30
ASYMPTOTIC_TERMS = 20

_INV_2SQRTPI = 0.5 / math.sqrt(math.pi)
_TWO_THIRDS = 2.0 / 3.0
_TWO_THIRDS_LO = float(Fraction(2, 3) - Fraction(_TWO_THIRDS))
_SPLIT = 134217729.0  # 2**27 + 1


class AiryRangeError(ValueError):
    """Argument outside the supported range."""


@dataclass(frozen=True)
class AiryValue:
    x: float
    ai: float
    ai_prime: float


def _taylor_table(step: float, terms: int):
    centres = np.arange(AIRY_XMIN, ASYMPTOTIC_X + step, step)
    a0, a1, _, _ = special.airy(centres)
    coef = np.zeros((len(centres), terms))
    coef[:, 0] = a0
    coef[:, 1] = a1
    coef[:, 2] = centres * a0 / 2.0
    for k in range(1, terms - 2):
        coef[:, k + 2] = (centres * coef[:, k] + coef[:, k - 1]) / ((k + 2) * (k + 1))
    # derivative series: d/dh sum a_k h^k
    dcoef = coef[:, 1:] * np.arange(1, terms)
    return centres, coef, dcoef


def _asymptotic_coefficients(terms: int):
    u = np.empty(terms)
    u[0] = 1.0
    for k in range(1, terms):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / (216.0 * k * (2 * k - 1))
    k = np.arange(terms)
    v = -(6 * k + 1) / (6 * k - 1) * u
    sign = (-1.0) ** k
    return sign * u, sign * v


_CENTRES, _COEF, _DCOEF = _taylor_table(CENTRE_STEP, TAYLOR_TERMS)
_ASY_U, _ASY_V = _asymptotic_coefficients(ASYMPTOTIC_TERMS)


def _validate(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError("Airy argument must be finite")
    if x.size and x.min() < AIRY_XMIN:
        raise AiryRangeError(
            f"Airy argument {x.min():.6g} below supported range [{AIRY_XMIN}, inf)"
        )


def _horner(table: np.ndarray, idx: np.ndarray, h: np.ndarray) -> np.ndarray:
    rows = table[idx]
    acc = rows[:, -1].copy()
    for k in range(table.shape[1] - 2, -1, -1):
        acc *= h
        acc += rows[:, k]
    return acc


def _series(coeffs: np.ndarray, inv_zeta: np.ndarray) -> np.ndarray:
    acc = np.full(inv_zeta.shape, coeffs[-1])
    for c in coeffs[-2::-1]:
        acc *= inv_zeta
        acc += c
    return acc


def _two_prod(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Dekker: a * b = p + e exactly
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _zeta(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # (2/3) x^(3/2) as an unevaluated sum hi + lo; at x ~ 100 the exponent is
    # ~ 670 and a single rounding in it would already cost 1e-13 relative
    s = np.sqrt(x)
    p, e = _two_prod(s, s)
    s_lo = ((x - p) - e) / (2.0 * s)
    y, y_lo = _two_prod(x, s)
    y_lo = y_lo + x * s_lo
    hi, lo = _two_prod(np.full_like(y, _TWO_THIRDS), y)
    lo = lo + _TWO_THIRDS * y_lo + _TWO_THIRDS_LO * y
    return hi, lo


def _far(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Ai(x) = m * exp(-hi) with the prefactor and the low part folded into m
    hi, lo = _zeta(x)
    pre = _INV_2SQRTPI * np.exp(-lo) / np.sqrt(np.sqrt(x))
    return hi, pre, 1.0 / hi


def _near(x: np.ndarray):
    idx = np.rint((x - AIRY_XMIN) / CENTRE_STEP).astype(np.intp)
    return idx, x - _CENTRES[idx]


def ai_split(z):
    """Return ``(m, e)`` with ``Ai(z) = m * exp(e)`` elementwise.

    ``e`` is zero except in the asymptotic range, where it carries the
    exponential decay so callers can fold in their own exponents.
    """
    z = np.asarray(z, dtype=float)
    _validate(z)
    m = np.empty(z.shape)
    e = np.zeros(z.shape)
    far = z > ASYMPTOTIC_X
    near = ~far
    if near.any():
        idx, h = _near(z[near])
        m[near] = _horner(_COEF, idx, h)
    if far.any():
        hi, pre, inv = _far(z[far])
        e[far] = -hi
        m[far] = pre * _series(_ASY_U, inv)
    return m, e


def ai_exp(z, c=0.0):
    """``Ai(z) * exp(c)`` elementwise, safe against overflow of ``exp(c)``
    where ``Ai(z)`` is exponentially small."""
    z = np.asarray(z, dtype=float)
    c = np.asarray(c, dtype=float)
    _validate(z)
    z, c = np.broadcast_arrays(z, c)
    out = np.empty(z.shape)
    far = z > ASYMPTOTIC_X
    near = ~far
    if near.any():
        idx, h = _near(z[near])
        out[near] = _horner(_COEF, idx, h) * np.exp(c[near])
    if far.any():
        hi, pre, inv = _far(z[far])
        out[far] = np.exp(c[far] - hi) * (pre * _series(_ASY_U, inv))
    return out


def ai(x):
    """Ai(x), vectorised over numpy arrays."""
    return ai_exp(x)


def ai_and_prime(x):
    """Return ``(Ai(x), Ai'(x))`` as arrays."""
    x = np.asarray(x, dtype=float)
    _validate(x)
    shape = x.shape
    x = x.ravel()
    a = np.empty(x.shape)
    ap = np.empty(x.shape)
    far = x > ASYMPTOTIC_X
    near = ~far
    if near.any():
        idx, h = _near(x[near])
        a[near] = _horner(_COEF, idx, h)
        ap[near] = _horner(_DCOEF, idx, h)
    if far.any():
        xf = x[far]
        hi, pre, inv = _far(xf)
        base = np.exp(-hi)
        a[far] = base * (pre * _series(_ASY_U, inv))
        ap[far] = -base * (pre * np.sqrt(xf) * _series(_ASY_V, inv))
    return a.reshape(shape), ap.reshape(shape)


def airy_ai(x: float) -> AiryValue:
    """Scalar evaluation of Ai and Ai' bundled in an :class:`AiryValue`.

    >>> round(airy_ai(0.0).ai, 12)
    0.355028053888
    """
    if not math.isfinite(x):
        raise ValueError(f"Airy argument must be finite, got {x!r}")
    a, ap = ai_and_prime(float(x))
    return AiryValue(float(x), float(a), float(ap))

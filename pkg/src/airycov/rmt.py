"""Stationary GOE/GUE matrix Ornstein-Uhlenbeck chains and the covariance of
their rescaled largest eigenvalue.

The matrix process ``dM = -gamma M dt + dB`` is sampled exactly on a time
grid of spacing ``dt``:

    M_k = exp(-gamma dt) M_{k-1} + sqrt(1 - exp(-2 gamma dt)) C_k

with ``C_k`` drawn from the stationary law ``~ exp(-gamma Tr M^2)``. The
largest eigenvalue of each ``M_k`` is found by Householder tridiagonalisation
(LAPACK ``sytrd``/``hetrd``) followed by Sturm-count bisection, vectorised
over blocks of steps.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import lapack

WORKERS_ENV = "AIRYCOV_WORKERS"
BLOCK_STEPS = 512
N_MAX = 1024


class Ensemble(str, enum.Enum):
    GOE = "goe"
    GUE = "gue"


@dataclass(frozen=True)
class EnsembleConfig:
    """Parameters of one Monte Carlo experiment.

    ``dt`` defaults to ``N**(-1/3) / 2``. Realization ``r`` draws from its own
    PCG64 stream seeded by ``SeedSequence(seed, spawn_key=(r,))``.
    """

    ensemble: Ensemble | str
    N: int
    K: int
    seed: int = 0
    gamma: float = 0.5
    dt: float | None = None
    realizations: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ensemble", Ensemble(self.ensemble))
        if self.dt is None:
            object.__setattr__(self, "dt", 0.5 * self.N ** (-1.0 / 3.0))
        if int(self.N) != self.N or not 2 <= self.N <= N_MAX:
            raise ValueError(f"N must be an integer in [2, {N_MAX}], got {self.N!r}")
        if int(self.K) != self.K or self.K < 100:
            raise ValueError(f"K must be an integer >= 100, got {self.K!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if not (math.isfinite(self.dt) and self.dt >= 0):
            raise ValueError(f"dt must be >= 0, got {self.dt!r}")
        if self.dt * self.gamma >= 5:
            raise ValueError("dt * gamma must be < 5")
        if int(self.realizations) != self.realizations or self.realizations < 1:
            raise ValueError("realizations must be a positive integer")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def decay(self) -> float:
        return math.exp(-self.gamma * self.dt)

    @property
    def du(self) -> float:
        """Spacing of the rescaled time grid."""
        du = self.gamma * self.N ** (1.0 / 3.0) * self.dt
        return du if self.ensemble is Ensemble.GUE else 0.5 * du

    def rng(self, realization: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(realization,))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass
class EigenSeries:
    ensemble: Ensemble
    u_grid: np.ndarray
    values: np.ndarray
    seed: int
    realization: int = 0

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class AutoCovEstimate:
    lags: np.ndarray
    cov: np.ndarray
    stderr: np.ndarray | None
    realizations: int = 1
    per_realization: np.ndarray = field(default=None, repr=False)

    @property
    def has_stderr(self) -> bool:
        return self.stderr is not None


def _upper_block(
    cfg: EnsembleConfig, rng: np.random.Generator, size: int, out: np.ndarray | None = None
) -> np.ndarray:
    # Upper triangles only (LAPACK reads nothing else); the strict lower part
    # stays 0. Diagonal entries have variance 1/(2 gamma); off the diagonal the
    # real entry (GOE), or each of its real and imaginary parts (GUE), has
    # 1/(4 gamma). Normals are drawn row by row of the upper triangle.
    n = cfg.N
    gue = cfg.ensemble is Ensemble.GUE
    if out is None or out.shape[0] < size:
        out = np.zeros((size, n, n), dtype=complex if gue else float)
    out = out[:size]
    off_sd = 0.5 / math.sqrt(cfg.gamma)
    n_re = n * (n + 1) // 2
    n_im = n * (n - 1) // 2 if gue else 0
    # one draw per step holding real then imaginary parts, so the stream
    # layout does not depend on how steps are grouped into blocks
    z = rng.standard_normal((size, n_re + n_im))
    z *= off_sd
    starts = np.concatenate(([0], np.cumsum(np.arange(n, 1, -1))))
    z[:, starts] *= math.sqrt(2.0)
    re = out.real if gue else out
    for i, p in enumerate(starts):
        re[:, i, i:] = z[:, p : p + n - i]
    if gue:
        im = out.imag
        q = n_re
        for i in range(n - 1):
            im[:, i, i + 1 :] = z[:, q : q + n - 1 - i]
            q += n - 1 - i
    return out


def _symmetrise(upper: np.ndarray) -> np.ndarray:
    strict = np.triu(upper, 1)
    return np.triu(upper) + np.conj(strict.T)


def sample_stationary(cfg: EnsembleConfig, rng: np.random.Generator) -> np.ndarray:
    """One draw from the stationary law ``~ exp(-gamma Tr M^2)``.

    GOE entries: ``Var(M_ii) = 1/(2 gamma)``, ``Var(M_ij) = 1/(4 gamma)``.
    GUE entries: ``Var(M_ii) = 1/(2 gamma)``, real and imaginary parts of
    ``M_ij`` each ``1/(4 gamma)``.
    """
    return _symmetrise(_upper_block(cfg, rng, 1)[0])


def ou_step(m_prev: np.ndarray, cfg: EnsembleConfig, rng: np.random.Generator) -> np.ndarray:
    """Exact transition of the stationary OU process over one step ``dt``."""
    a = cfg.decay
    return a * m_prev + math.sqrt(-math.expm1(-2.0 * cfg.gamma * cfg.dt)) * sample_stationary(
        cfg, rng
    )


def _tridiagonal(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if np.iscomplexobj(m):
        _, d, e, _, info = lapack.zhetrd(m, lower=0)
    else:
        _, d, e, _, info = lapack.dsytrd(m, lower=0)
    if info != 0:
        raise np.linalg.LinAlgError(f"tridiagonal reduction failed, info={info}")
    return d, e


def _count_below(d: np.ndarray, e2: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Sturm count: number of negative pivots of T - x I, one row per problem
    tiny = np.finfo(float).tiny
    q = d[:, 0] - x
    count = (q < 0).astype(np.int64)
    for i in range(1, d.shape[1]):
        q = np.where(q == 0.0, -tiny, q)
        q = d[:, i] - x - e2[:, i - 1] / q
        count += q < 0
    return count


def top_eigenvalues_tridiagonal(d: np.ndarray, e: np.ndarray, rtol: float = 1e-14) -> np.ndarray:
    """Largest eigenvalue of each symmetric tridiagonal ``(d[i], e[i])`` by bisection."""
    d = np.atleast_2d(np.asarray(d, dtype=float))
    e = np.atleast_2d(np.asarray(e, dtype=float)).reshape(d.shape[0], -1)
    n = d.shape[1]
    ae = np.abs(e)
    rad = np.zeros_like(d)
    if n > 1:
        rad[:, :-1] += ae
        rad[:, 1:] += ae
    # the top eigenvalue is at least max(d) and at most the Gershgorin bound
    lo = d.max(axis=1)
    hi = (d + rad).max(axis=1)
    e2 = e * e
    norm = np.maximum(np.abs(lo), np.abs(hi)) + rad.max(axis=1)
    while True:
        width = hi - lo
        active = width > rtol * norm
        if not active.any():
            break
        mid = lo + 0.5 * width
        full = _count_below(d, e2, mid) == n
        hi = np.where(active & full, mid, hi)
        lo = np.where(active & ~full, mid, lo)
        if np.all((hi - lo)[active] == width[active]):
            break
    return 0.5 * (lo + hi)


def _check_hermitian(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    size = np.max(np.abs(m)) if m.size else 0.0
    asym = np.max(np.abs(m - np.conj(m.T))) if m.size else 0.0
    if asym > 1e-12 * max(size, np.finfo(float).tiny):
        raise ValueError(f"matrix is not symmetric/Hermitian (asymmetry {asym:.3g})")


def largest_eigenvalue(m) -> float:
    """Largest eigenvalue of a real symmetric or complex Hermitian matrix."""
    m = np.asarray(m)
    if not (np.iscomplexobj(m) or np.issubdtype(m.dtype, np.number)):
        raise ValueError("numeric matrix required")
    m = m.astype(complex if np.iscomplexobj(m) else float)
    _check_hermitian(m)
    if m.shape[0] == 1:
        return float(m[0, 0].real)
    d, e = _tridiagonal(m)
    return float(top_eigenvalues_tridiagonal(d[None, :], e[None, :])[0])


def _rescale(cfg: EnsembleConfig, lam: np.ndarray) -> np.ndarray:
    n, g = cfg.N, cfg.gamma
    if cfg.ensemble is Ensemble.GUE:
        return math.sqrt(2.0 * g) * n ** (1.0 / 6.0) * (lam - math.sqrt(2.0 * n / g))
    return math.sqrt(g) * n ** (1.0 / 6.0) * (lam - math.sqrt(n / g))


def largest_eigenvalue_path(cfg: EnsembleConfig, realization: int = 0) -> np.ndarray:
    """Raw largest eigenvalues ``lambda_max(M_k)``, ``k = 0..K``."""
    rng = cfg.rng(realization)
    a = cfg.decay
    b = math.sqrt(-math.expm1(-2.0 * cfg.gamma * cfg.dt))
    total = cfg.K + 1
    out = np.empty(total)
    m = None
    buf = None
    done = 0
    while done < total:
        size = min(BLOCK_STEPS, total - done)
        c = buf = _upper_block(cfg, rng, size, buf)
        d = np.empty((size, cfg.N))
        e = np.empty((size, cfg.N - 1))
        for j in range(size):
            # chain starts exactly stationary: M_0 = C_0
            m = c[j].copy() if m is None else a * m + b * c[j]
            d[j], e[j] = _tridiagonal(m)
        out[done : done + size] = top_eigenvalues_tridiagonal(d, e)
        done += size
    return out


def run_chain(cfg: EnsembleConfig, realization: int = 0) -> EigenSeries:
    """Rescaled largest-eigenvalue series of one realization."""
    if not 0 <= realization < cfg.realizations:
        raise ValueError(f"realization {realization} outside [0, {cfg.realizations})")
    lam = largest_eigenvalue_path(cfg, realization)
    u = cfg.du * np.arange(cfg.K + 1)
    return EigenSeries(cfg.ensemble, u, _rescale(cfg, lam), cfg.seed, realization)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


def run_realizations(cfg: EnsembleConfig, workers: int | None = None) -> list[EigenSeries]:
    """All realizations, ordered by index; identical for any worker count."""
    workers = worker_count() if workers is None else workers
    idx = range(cfg.realizations)
    if workers <= 1 or cfg.realizations == 1:
        return [run_chain(cfg, r) for r in idx]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_chain, [cfg] * cfg.realizations, idx))


def _acov(x: np.ndarray, max_lag: int) -> np.ndarray:
    xc = x - x.mean()
    n = len(xc)
    return np.array([np.dot(xc[: n - k], xc[k:]) / n for k in range(max_lag + 1)])


def autocovariance(series: Sequence[EigenSeries | np.ndarray], max_lag: int) -> AutoCovEstimate:
    """Biased (1/K) autocovariance averaged over realizations.

    Plain arrays are accepted with unit lag spacing. With a single series the
    standard error is undefined and ``stderr`` is ``None``.
    """
    if len(series) == 0:
        raise ValueError("need at least one series")
    arrays = [np.asarray(getattr(s, "values", s), dtype=float) for s in series]
    length = len(arrays[0])
    if any(len(a) != length for a in arrays):
        raise ValueError("all series must have the same length")
    if not 0 <= max_lag < length:
        raise ValueError(f"max_lag must lie in [0, {length - 1}]")
    first = series[0]
    if isinstance(first, EigenSeries):
        if any(s.ensemble is not first.ensemble for s in series):
            raise ValueError("series mix ensembles")
        lags = first.u_grid[: max_lag + 1].copy()
    else:
        lags = np.arange(max_lag + 1, dtype=float)
    per = np.array([_acov(a, max_lag) for a in arrays])
    r = len(arrays)
    stderr = per.std(axis=0, ddof=1) / math.sqrt(r) if r >= 2 else None
    return AutoCovEstimate(lags, per.mean(axis=0), stderr, r, per)

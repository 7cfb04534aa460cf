import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from airycov import covariance, rmt  # noqa: E402

DESK_SEED = 20080101
DESK_N = 64
DESK_K = 100_000
DESK_R = 10
DESK_MAXLAG = 16

CRITERIA: dict[int, str] = {}


def record_criterion(number: int, description: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {description}: {detail}"
    CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])


@functools.lru_cache(maxsize=None)
def cov(process: str, u: float) -> float:
    return covariance.covariance_point(process, u)


@pytest.fixture(scope="session")
def cov_point():
    """Covariance values shared by every test in the session."""
    return cov


@pytest.fixture(scope="session")
def desk_run():
    """Desk-scale Monte Carlo: N=64, K=1e5 steps, 10 realizations per ensemble."""
    out = {}
    for ens in rmt.Ensemble:
        cfg = rmt.EnsembleConfig(ens, DESK_N, DESK_K, seed=DESK_SEED, realizations=DESK_R)
        series = rmt.run_realizations(cfg)
        out[ens.value] = (cfg, series, rmt.autocovariance(series, DESK_MAXLAG))
    return out

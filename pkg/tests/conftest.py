import numpy as np
import pytest

from leanreg.core import Sample

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def random_sample(rng: np.random.Generator, n: int, d: int, scale: float = 1.0) -> Sample:
    x = rng.standard_normal((n, d)) * scale
    y = x @ rng.standard_normal(d) + rng.standard_normal(n) * (1 + np.abs(x[:, 0]))
    return Sample(x, y)


def brute_refit(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(x, y, rcond=None)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def independent_bias_probe():
    """Raw and corrected bias at n = 2000, d in {150, 300}, rho = 0, 1000 reps."""
    from leanreg.diagnostics import bias_scaling_probe
    from leanreg.rng import RngStream

    return bias_scaling_probe(2000, [150, 300], 1000, RngStream(20240), rho=0.0)

import functools

import pytest

from elslab import nonlinearity as N
from elslab import potential as P
from elslab.shooting import ShootingConfig, find_els


@functools.lru_cache(maxsize=None)
def els(p: float, alpha: float, u1: float, D: int = 3, r_max: float = 100.0,
        blowup_threshold: float = 1e12):
    """Separatrix for f = u^p on the model density, cached across tests."""
    cfg = ShootingConfig(r_max=r_max, blowup_threshold=blowup_threshold)
    return find_els(N.power(p), P.model(alpha), u1, cfg, D)


def els_kwargs(alpha: float) -> dict:
    # steep densities grow the separatrix fast enough to cross the default threshold
    return {"blowup_threshold": 1e40} if alpha >= 8 else {}


@pytest.fixture(scope="session")
def exact_p2():
    return els(2, 4.0, 6.0)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])

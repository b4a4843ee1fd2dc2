import numpy as np
import pytest

from fdmimo.channel import LargeScaleProfile, SiArray
from fdmimo.config import SystemConfig


def small_config(**changes) -> SystemConfig:
    base = dict(n_cells=2, m_tx=8, m_rx=8, k_dl=2, k_ul=2, p_ref_dbm=40.0, cell_radius_m=500.0)
    base.update(changes)
    return SystemConfig(**base)


def flat_profile(n=1, k_dl=1, k_ul=1, m_rx=1, m_tx=1, gain=1.0, cross=None, si=None,
                 bs=0.0, ue=0.0) -> LargeScaleProfile:
    """Profile with serving gain ``gain``, cross-cell gain ``cross`` and SI matrix ``si``."""
    cross = gain if cross is None else cross
    d_dl = np.full((n, n, k_dl), cross)
    d_ul = np.full((n, n, k_ul), cross)
    for i in range(n):
        d_dl[i, i] = gain
        d_ul[i, i] = gain
    d_bs = np.full((n, n), bs)
    np.fill_diagonal(d_bs, 0.0)
    si = np.ones((m_rx, m_tx)) if si is None else np.asarray(si, dtype=float)
    return LargeScaleProfile(d_dl, d_ul, d_bs, np.full((n, n, k_ul, k_dl), ue),
                             SiArray.from_matrix(si))


@pytest.fixture
def cfg():
    return small_config()


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])

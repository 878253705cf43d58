import functools

import numpy as np
import pytest

from metsob.domains import DomainSpec, generate
from metsob.space import PointCloudSpace


@functools.lru_cache(maxsize=None)
def domain(kind: str, res: int, **kw):
    return generate(DomainSpec(kind, res, **kw))


def random_cloud(n, seed, frac_bd=0.3, dim=2):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, dim))
    bd = np.zeros(n, dtype=bool)
    bd[rng.permutation(n)[: max(1, int(frac_bd * n))]] = True
    return PointCloudSpace(X, bd, rng.uniform(0.5, 2.0, size=n))


@pytest.fixture(scope="session")
def square32():
    return domain("square", 32)


@pytest.fixture(scope="session")
def square64():
    return domain("square", 64)


@pytest.fixture(scope="session")
def cusp128():
    return domain("cusp", 128)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])

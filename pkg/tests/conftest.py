import numpy as np
import pytest

from gridmarket.agents import Consumer, Provider


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_consumer(cid=0, wallet=1000.0, valuation=(1.0, 1.0), period=50, jobs=0, **kw):
    from gridmarket.domain import Job

    c = Consumer(cid, wallet, np.array(valuation, dtype=float), period, wallet, **kw)
    for j in range(jobs):
        c.queue.append(Job(1000 * cid + j, 4))
    return c


def make_provider(pid=0, capacity=(10, 10), seed=(1.0, 2.0), window=20):
    return Provider(pid, np.array(capacity), np.array(seed, dtype=float), window=window)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

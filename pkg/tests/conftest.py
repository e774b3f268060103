import numpy as np
import pytest

from augsel.synthpool import BenchmarkSpec, PoolSpec, make_benchmark

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_split():
    spec = BenchmarkSpec(
        train_size=2000, test_per_class=100, base_per_class=20, pool=PoolSpec(per_class_per_truncation=20), seed=3
    )
    return make_benchmark(spec)


@pytest.fixture
def record_criterion():
    def record(name: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" -- {detail}" if detail else ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

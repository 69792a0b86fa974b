import numpy as np
import pytest
from hypothesis import strategies as st

from treequench import _backend
from treequench.simplex import make_distribution

BACKENDS = [_backend.pure] + ([_backend.compiled] if _backend.compiled is not None else [])

_acceptance_lines = []

# heavy Monte Carlo runs are only practical with the compiled sampler
needs_compiled = pytest.mark.skipif(_backend.kernels is _backend.pure,
                                    reason="needs the compiled backend")


@pytest.fixture
def record_criterion():
    def record(number, ok, detail):
        _acceptance_lines.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        print(_acceptance_lines[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(params=BACKENDS, ids=lambda m: m.BACKEND)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_points(rng, k, n):
    """``n`` points of the open k-simplex, uniform (Dirichlet(1,...,1))."""
    return rng.dirichlet(np.ones(k + 1), size=n)


@st.composite
def distributions(draw, k=None, min_k=1, max_k=5):
    if k is None:
        k = draw(st.integers(min_k, max_k))
    raw = draw(st.lists(st.floats(1e-3, 1.0), min_size=k + 1, max_size=k + 1))
    total = sum(raw)
    return make_distribution(k, [x / total for x in raw])

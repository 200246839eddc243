import numpy as np
import pytest

from radkernel import _core
from radkernel._core import _pykernels
from radkernel.harmonic import solve_harmonic
from radkernel.potential import blended, pure, zero

try:
    from radkernel._core import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = ["python"] + (["cython"] if _ckernels is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    impl = _pykernels if request.param == "python" else _ckernels
    monkeypatch.setattr(_core, "_impl", impl)
    return request.param


@pytest.fixture(scope="session")
def profiles():
    """Harmonic profiles shared across modules (each solve takes a fraction of a second)."""
    cache = {}

    def get(name):
        if name not in cache:
            specs = {
                "zero3": zero(3), "zero2": zero(2), "pure-0.2": pure(-0.2, 3),
                "pure*": pure(-0.25, 3), "pure1": pure(1.0, 3), "pure2": pure(2.0, 3),
                "blend": blended(-0.1, 0.5, dimension=3),
            }
            cache[name] = solve_harmonic(specs[name])
        return cache[name]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def criterion(request):
    """``record(n, title, ok, detail)`` prints a pass/fail line and asserts ``ok``."""

    def record(n, title, ok, detail=""):
        line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        request.config.acceptance_lines.append((n, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)

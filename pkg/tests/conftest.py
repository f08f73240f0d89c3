import numpy as np
import pytest
from hypothesis import strategies as st

from gmmkern.vectorspace import Dataset, SparseVector, transform


def random_signed(rng, dim=100, density=0.2, scale=1.0):
    """Signed sparse vector with roughly ``density * dim`` nonzeros."""
    dense = rng.normal(scale=scale, size=dim) * (rng.random(dim) < density)
    return SparseVector.from_dense(dense)


def random_nonzero(rng, dim=100, density=0.2):
    while True:
        u = random_signed(rng, dim, density)
        if u.nnz:
            return u


def random_dataset(rng, n=30, dim=8, density=0.6, classes=2):
    rows = [random_nonzero(rng, dim, density) for _ in range(n)]
    labels = np.arange(n) % classes
    return Dataset(rows, labels, dim)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False).filter(
    lambda x: x == 0 or abs(x) > 1e-6
)


@st.composite
def signed_vectors(draw, min_dim=1, max_dim=12, nonzero=False):
    dim = draw(st.integers(min_dim, max_dim))
    values = draw(st.lists(finite, min_size=dim, max_size=dim))
    if nonzero and not any(values):
        values[draw(st.integers(0, dim - 1))] = 1.0
    return SparseVector.from_dense(values)


@st.composite
def transformed_pairs(draw, max_dim=12):
    dim = draw(st.integers(1, max_dim))
    a = draw(st.lists(finite, min_size=dim, max_size=dim))
    b = draw(st.lists(finite, min_size=dim, max_size=dim))
    if not any(a):
        a[0] = 1.0
    return transform(SparseVector.from_dense(a)), transform(SparseVector.from_dense(b))


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[str, tuple[str, str]] = {}


def record_acceptance(name: str, passed: bool | None, detail: str) -> None:
    """``passed=None`` records a criterion that could not run here."""
    ACCEPTANCE[name] = ("SKIP" if passed is None else "PASS" if passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda n: int(n.split()[1].rstrip(":"))):
        status, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{status} {name} {detail}")

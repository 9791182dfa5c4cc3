import numpy as np
import pytest

from svga.graph import build_graph


def random_graph(rng, n, p=0.3):
    iu = np.triu_indices(n, 1)
    keep = rng.random(len(iu[0])) < p
    return build_graph(np.column_stack([iu[0][keep], iu[1][keep]]), n)


def dense_normalized_adjacency(g):
    a = g.csr.toarray() + np.eye(g.n)
    d = a.sum(axis=1)
    return a / np.sqrt(np.outer(d, d))


def dense_laplacian(g):
    a = g.csr.toarray()
    d = a.sum(axis=1)
    inv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1)), 0.0)
    return np.eye(g.n) - inv[:, None] * a * inv[None, :]


def numeric_grad(f, x, h=1e-5):
    """Central finite differences of scalar ``f`` with respect to array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def path3():
    return build_graph([(0, 1), (1, 2)], 3)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

"""Central finite differences for the probe loss."""
import numpy as np

from parsetag.tagger import LinearProbe, loss_and_gradients

H = 1e-5


def _loss(X, y, probe):
    return loss_and_gradients(X, y, probe)[0]


def _numeric(f, arr):
    """Central differences of f() w.r.t. every entry of ``arr`` (in place)."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = arr[idx]
        arr[idx] = old + H
        up = f()
        arr[idx] = old - H
        down = f()
        arr[idx] = old
        grad[idx] = (up - down) / (2 * H)
    return grad


def rel_error(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8))


def random_instance(rng, max_dim=20, max_classes=15):
    d = int(rng.integers(1, max_dim + 1))
    K = int(rng.integers(1, max_classes + 1))
    V = int(rng.integers(1, 8))
    n = int(rng.integers(1, 10))
    table = rng.normal(size=(V, d))
    rows = rng.integers(0, V, size=n)  # repeated rows are likely
    y = rng.integers(0, K, size=n)
    probe = LinearProbe(rng.normal(size=(K, d)), rng.normal(size=K))
    return table, rows, y, probe


def check_instance(table, rows, y, probe):
    """Worst relative error over W, b and the embedding rows."""
    _, g = loss_and_gradients(table[rows], y, probe, rows=rows)
    num_W = _numeric(lambda: _loss(table[rows], y, probe), probe.W)
    num_b = _numeric(lambda: _loss(table[rows], y, probe), probe.b)
    num_E = _numeric(lambda: _loss(table[rows], y, probe), table)
    dense_E = np.zeros_like(table)
    dense_E[g.rows] = g.E
    return max(rel_error(g.W, num_W), rel_error(g.b, num_b), rel_error(dense_E, num_E))

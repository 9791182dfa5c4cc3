import pickle

import numpy as np
import scipy.sparse as sp

from svga.planetoid import available, load_planetoid


def _write(root, name, parts, test_index):
    for key, val in parts.items():
        with open(root / f"ind.{name}.{key}", "wb") as fh:
            pickle.dump(val, fh)
    (root / f"ind.{name}.test.index").write_text("".join(f"{i}\n" for i in test_index))


def test_reference_reordering(tmp_path):
    # nodes 0-3 in allx, test nodes 4-6 listed out of order
    eye = np.eye(7)
    test_index = [6, 4, 5]
    sorted_rows = [4, 5, 6]
    parts = {
        "x": sp.csr_matrix(eye[:2]),
        "allx": sp.csr_matrix(eye[:4]),
        "tx": sp.csr_matrix(eye[sorted_rows]),
        "y": np.eye(3)[[0, 1]],
        "ally": np.eye(3)[[0, 1, 2, 0]],
        "ty": np.eye(3)[[1, 2, 0]],
        "graph": {0: [1], 1: [0, 2], 2: [1], 3: [6], 4: [5], 5: [4], 6: [3]},
    }
    assert not available(tmp_path, "toy")
    _write(tmp_path, "toy", parts, test_index)
    assert available(tmp_path, "toy")
    ds = load_planetoid(tmp_path, "toy")
    assert ds.graph.n == 7 and ds.graph.num_edges == 4
    assert ds.features.kind == "binary"
    # row i of the stacked matrix moves to node test_index[i] (reference convention)
    x = ds.features.values
    np.testing.assert_array_equal(x[6], eye[4])
    np.testing.assert_array_equal(x[4], eye[5])
    assert ds.labels.tolist()[:4] == [0, 1, 2, 0]


def test_citeseer_gaps_become_unlabelled(tmp_path):
    test_index = [5, 3]  # node 4 is missing from the test files
    parts = {
        "x": sp.csr_matrix(np.eye(2, 4)),
        "allx": sp.csr_matrix(np.eye(3, 4)),
        "tx": sp.csr_matrix(np.array([[0, 0, 0, 1.0], [0, 1.0, 0, 0]])),
        "y": np.eye(2)[[0, 1]],
        "ally": np.eye(2)[[0, 1, 0]],
        "ty": np.eye(2)[[1, 0]],
        "graph": {0: [1], 1: [0], 2: [5], 5: [2]},
    }
    _write(tmp_path, "citeseer", parts, test_index)
    ds = load_planetoid(tmp_path, "citeseer")
    assert ds.graph.n == 6
    assert ds.labels[4] == -1 and not ds.features.values[4].any()
    assert ds.graph.degrees[4] == 0

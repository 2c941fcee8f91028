import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdecon.linalg import (
    DimensionError,
    Factorization,
    embed_operator,
    herm_eig,
    matrix_func,
    partial_trace,
    permute_subsystems,
    support_projector,
    tensor_product,
)
from conftest import ginibre, random_hermitian

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def _kron_loops(x, y):
    m, n = x.shape[0], y.shape[0]
    out = np.zeros((m * n, m * n), dtype=complex)
    for i in range(m):
        for j in range(m):
            for k in range(n):
                for l in range(n):
                    out[i * n + k, j * n + l] = x[i, j] * y[k, l]
    return out


def _trace_loops(x, dims, keep):
    """Reduced matrix by explicit index summation."""
    n = len(dims)
    drop = [i for i in range(n) if i not in keep]
    t = x.reshape(dims * 2)
    letters = "abcdefgh"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i in drop else letters[i].upper() for i in range(n)]
    out = "".join(letters[i] for i in keep) + "".join(letters[i].upper() for i in keep)
    r = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = int(np.prod([dims[i] for i in keep]))
    return r.reshape(d, d)


def test_factorization_rejects_bad_input():
    with pytest.raises(DimensionError):
        Factorization(("A", "A"), (2, 2))
    with pytest.raises(DimensionError):
        Factorization(("A",), (0,))
    with pytest.raises(DimensionError):
        Factorization(("A", "B"), (2,))
    assert Factorization((), ()).dim == 1


def test_subset_and_restrict_orders():
    f = Factorization(("A", "B", "E"), (2, 3, 4))
    assert f.subset(("E", "A")).labels == ("E", "A")
    assert f.restrict(("E", "A")).labels == ("A", "E")
    assert f.complement("B") == ("A", "E")
    assert f.dim_of(("B", "E")) == 12


def test_tensor_product_small_cases():
    assert np.allclose(tensor_product(np.eye(2), np.eye(2)), np.eye(4))
    out = tensor_product(np.diag([1, 0]), np.diag([0, 1]))
    assert np.array_equal(out, np.diag([0, 1, 0, 0]))


def test_tensor_product_matches_loops():
    rng = np.random.default_rng(0)
    x, y = ginibre(rng, 2), ginibre(rng, 2)
    assert np.allclose(tensor_product(x, y), _kron_loops(x, y), atol=1e-14)


def test_partial_trace_examples():
    v = np.array([1, 0, 0, 1]) / np.sqrt(2)
    f = Factorization(("A", "B"), (2, 2))
    assert np.allclose(partial_trace(np.outer(v, v), f, "A"), np.eye(2) / 2)
    rng = np.random.default_rng(1)
    r, s = random_hermitian(rng, 2), random_hermitian(rng, 3)
    f = Factorization(("A", "B"), (2, 3))
    assert np.allclose(partial_trace(np.kron(r, s), f, "A"), r * np.trace(s))


def test_partial_trace_iterated_equals_one_shot():
    rng = np.random.default_rng(2)
    g = ginibre(rng, 8)
    x = g @ g.conj().T
    x /= np.trace(x)
    f = Factorization(("A", "B", "E"), (2, 2, 2))
    once = partial_trace(x, f, "B")
    step = partial_trace(x, f, ("A", "B"))
    twice = partial_trace(step, f.restrict(("A", "B")), "B")
    assert np.max(np.abs(once - twice)) <= 1e-12


@given(st.lists(st.integers(1, 3), min_size=2, max_size=4), st.integers(0, 2**32 - 1), st.data())
def test_partial_trace_matches_index_oracle(dims, seed, data):
    rng = np.random.default_rng(seed)
    n = len(dims)
    keep = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1)))
    labels = tuple("ABCD"[:n])
    f = Factorization(labels, tuple(dims))
    x = ginibre(rng, f.dim)
    got = partial_trace(x, f, [labels[i] for i in keep])
    assert np.allclose(got, _trace_loops(x, list(dims), keep), atol=1e-12)
    assert abs(np.trace(got) - np.trace(x)) <= 1e-12 * max(1, abs(np.trace(x)))


def test_partial_trace_unknown_label():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), Factorization(("A", "B"), (2, 2)), "Z")
    with pytest.raises(DimensionError):
        partial_trace(np.eye(3), Factorization(("A", "B"), (2, 2)), "A")


def test_permute_swap_and_involution():
    rng = np.random.default_rng(3)
    r, s = random_hermitian(rng, 2), random_hermitian(rng, 3)
    f = Factorization(("A", "B"), (2, 3))
    assert np.allclose(permute_subsystems(np.kron(r, s), f, ("B", "A")), np.kron(s, r))
    assert np.array_equal(permute_subsystems(np.kron(r, s), f, ("A", "B")), np.kron(r, s))
    f3 = Factorization(("A", "B", "C"), (2, 3, 2))
    x = ginibre(rng, 12)
    once = permute_subsystems(x, f3, ("C", "B", "A"))
    back = permute_subsystems(once, f3.subset(("C", "B", "A")), ("A", "B", "C"))
    assert np.max(np.abs(back - x)) <= 1e-14
    assert np.allclose(np.sort(np.linalg.eigvals(once)), np.sort(np.linalg.eigvals(x)))
    with pytest.raises(DimensionError):
        permute_subsystems(x, f3, ("A", "B"))


def test_herm_eig_examples():
    w, _ = herm_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(w, [3, 2, 1])
    w, u = herm_eig(PAULI_X)
    assert np.allclose(w, [1, -1])
    plus = np.array([1, 1]) / np.sqrt(2)
    assert abs(abs(np.vdot(u[:, 0], plus)) - 1) < 1e-12
    with pytest.raises(ValueError):
        herm_eig(np.array([[0, 1], [0, 0]], dtype=complex))


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_herm_eig_reconstructs(n, seed):
    x = random_hermitian(np.random.default_rng(seed), n)
    w, u = herm_eig(x)
    assert np.all(np.diff(w) <= 1e-12)
    assert np.max(np.abs(u.conj().T @ u - np.eye(n))) <= 1e-10
    assert np.max(np.abs((u * w) @ u.conj().T - x)) <= 1e-10 * n
    assert abs(w.sum() - np.trace(x).real) <= 1e-10


def test_matrix_func_examples():
    assert np.allclose(matrix_func(np.diag([4.0, 9.0]), "sqrt"), np.diag([2, 3]))
    assert np.allclose(matrix_func(np.eye(3), "log2"), 0)
    assert np.allclose(matrix_func(np.diag([4.0, 0.0]), "inv_sqrt"), np.diag([0.5, 0]))
    with pytest.raises(ValueError):
        matrix_func(np.diag([1.0, -1e-6]), "sqrt")
    with pytest.raises(ValueError):
        matrix_func(np.eye(2), "exp")
    # drift inside the clip tolerance is accepted
    assert np.allclose(matrix_func(np.diag([1.0, -1e-11]), "sqrt"), np.diag([1, 0]))


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_sqrt_squares_back(n, rank, seed):
    g = ginibre(np.random.default_rng(seed), n, rank)
    x = g @ g.conj().T
    r = matrix_func(x, "sqrt")
    assert np.max(np.abs(r @ r - x)) <= 1e-9 * max(1, np.abs(x).max())


def test_support_projector_rank():
    rng = np.random.default_rng(4)
    g = ginibre(rng, 5, 2)
    p = support_projector(g @ g.conj().T)
    assert np.isclose(np.trace(p).real, 2)
    assert np.allclose(p @ p, p)


def test_embed_operator_places_factor():
    f = Factorization(("A", "B", "C"), (2, 3, 2))
    op = PAULI_X
    got = embed_operator(op, "C", f)
    assert np.allclose(got, np.kron(np.eye(6), op))
    got = embed_operator(op, "A", f)
    assert np.allclose(got, np.kron(op, np.eye(6)))

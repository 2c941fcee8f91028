import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdecon.channels import (
    QuantumChannel,
    UnitaryEnsemble,
    append_channel,
    apply_channel,
    apply_unitary,
    bell_basis,
    channel_from_dict,
    channel_to_dict,
    controlled_ensemble_extension,
    heisenberg_weyl_ensemble,
    heisenberg_weyl_ops,
    identity_channel,
    load_channel,
    petz_recovery,
    random_channel,
    random_ensemble,
    random_unitary,
    randomizing_channel,
    replacement_channel,
    save_channel,
    twirl_subsystem,
)
from qdecon.linalg import DimensionError, Factorization, partial_trace
from qdecon.recovery import recovery_fidelity
from qdecon.states import (
    LabeledState,
    ghz,
    maximally_entangled,
    maximally_mixed,
    random_markov_state,
    random_state,
    tensor,
)

seeds = st.integers(0, 2**32 - 1)
QUBIT = Factorization(("S",), (2,))


def _choi_apply(j, x, d_in, d_out):
    """``N(X) = Tr_in[J (I ⊗ X^T)]`` for the unnormalized output⊗input Choi matrix."""
    y = j @ np.kron(np.eye(d_out), x.T)
    return partial_trace(y, Factorization(("o", "i"), (d_out, d_in)), "o")


def test_identity_and_replacement():
    rho = random_state((2, 3), seed=1)
    f = rho.factorization
    assert np.allclose(apply_channel(identity_channel(f), rho).matrix, rho.matrix)
    sigma = random_state((2,), seed=2, labels="A")
    ch = replacement_channel(f.subset("B"), sigma.relabel({"A": "C"}))
    out = apply_channel(ch, rho, "B")
    assert out.labels == ("A", "C")
    assert np.allclose(out.reduce("C").matrix, sigma.matrix)
    assert ch.is_valid()


def test_kraus_matches_choi_form():
    rho = random_state((2, 2), seed=3)
    ch = random_channel(Factorization(("A",), (2,)), Factorization(("A",), (2,)), 3, seed=4)
    out = apply_channel(ch, rho, "A")
    j = ch.choi()
    direct = _choi_apply(j, rho.reduce("A").matrix, 2, 2)
    assert np.max(np.abs(out.reduce("A").matrix - direct)) <= 1e-10
    assert np.allclose(partial_trace(j, Factorization(("o", "i"), (2, 2)), "i"), np.eye(2))


@given(seeds, st.integers(1, 3), st.integers(1, 4))
def test_random_channels_are_cptp(seed, d_out, n_kraus):
    fin = Factorization(("X",), (2,))
    fout = Factorization(("Y",), (d_out,))
    if d_out * n_kraus < 2:
        with pytest.raises(DimensionError):
            random_channel(fin, fout, n_kraus, seed=seed)
        return
    ch = random_channel(fin, fout, n_kraus, seed=seed)
    assert ch.is_valid()
    back = QuantumChannel.from_choi(ch.choi(), fin, fout)
    assert np.allclose(back.choi(), ch.choi(), atol=1e-12)


def test_compose_and_call():
    a = random_channel(QUBIT, QUBIT, 2, seed=1)
    b = random_channel(QUBIT, QUBIT, 2, seed=2)
    x = random_state((2,), seed=3).matrix
    assert np.allclose(a.compose(b)(x), a(b(x)))


def test_randomizing_channel_examples():
    ident = randomizing_channel(UnitaryEnsemble((np.eye(2),)), QUBIT)
    x = random_state((2,), seed=1, labels="S")
    assert np.allclose(apply_channel(ident, x).matrix, x.matrix)
    paulis = heisenberg_weyl_ensemble(2)
    dep = randomizing_channel(paulis, QUBIT)
    assert np.allclose(apply_channel(dep, x).matrix, np.eye(2) / 2, atol=1e-12)


@given(seeds, st.integers(1, 5))
def test_randomizing_channel_unital_and_affine(seed, m):
    ens = random_ensemble(3, m, seed=seed)
    ch = randomizing_channel(ens)
    assert np.allclose(ch(np.eye(3)), np.eye(3), atol=1e-10)
    r1, r2 = random_state((3,), seed=seed).matrix, random_state((3,), seed=seed + 1).matrix
    p = 0.3
    assert np.max(np.abs(ch(p * r1 + (1 - p) * r2) - p * ch(r1) - (1 - p) * ch(r2))) <= 1e-12


def test_heisenberg_weyl_examples():
    x, z = heisenberg_weyl_ops(2)[2], heisenberg_weyl_ops(2)[1]
    assert np.allclose(x, [[0, 1], [1, 0]])
    assert np.allclose(z, np.diag([1, -1]))
    e0 = np.diag([1.0, 0, 0]).astype(complex)
    tw = randomizing_channel(heisenberg_weyl_ensemble(3))(e0)
    assert np.allclose(tw, np.eye(3) / 3, atol=1e-10)
    with pytest.raises(ValueError):
        heisenberg_weyl_ops(0)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_heisenberg_weyl_trace_orthogonality(d):
    ops = heisenberg_weyl_ops(d)
    gram = np.array([[np.trace(a.conj().T @ b) for b in ops] for a in ops])
    assert np.max(np.abs(gram - d * np.eye(d * d))) <= 1e-10


@pytest.mark.parametrize("d", [2, 3, 4])
def test_twirl_choi_equals_trace_and_replace(d):
    f = Factorization(("S",), (d,))
    tw = randomizing_channel(heisenberg_weyl_ensemble(d), f).choi()
    rep = replacement_channel(f, maximally_mixed(d, "S")).choi()
    assert np.max(np.abs(tw - rep)) <= 1e-9


def test_twirl_subsystem_examples():
    phi = maximally_entangled(2)
    out = twirl_subsystem(phi, "A")
    assert np.allclose(out.matrix, np.eye(4) / 4, atol=1e-10)
    rho = tensor(random_state((2,), seed=1, labels="A"), random_state((2, 2), seed=2, labels=("B", "E")))
    out = twirl_subsystem(rho, "A")
    expect = tensor(maximally_mixed(2, "A"), rho.reduce(("B", "E")))
    assert np.max(np.abs(out.matrix - expect.matrix)) <= 1e-10
    again = twirl_subsystem(out, "A")
    assert np.max(np.abs(again.matrix - out.matrix)) <= 1e-12


@given(seeds, st.sampled_from([(2, 3), (3, 2), (2, 2, 2)]))
def test_twirl_is_trace_and_replace(seed, dims):
    rho = random_state(dims, seed=seed)
    on = rho.labels[-1]
    out = twirl_subsystem(rho, on)
    rest = rho.factorization.complement(on)
    expect = tensor(rho.reduce(rest), maximally_mixed(rho.dim_of(on), on))
    assert np.max(np.abs(out.matrix - expect.matrix)) <= 1e-10


def test_apply_unitary_and_labels():
    rho = random_state((2, 2, 2), seed=5)
    u = random_unitary(4, seed=6)
    out = apply_unitary(u, rho, ("E", "A"))
    assert out.labels == rho.labels
    manual = rho.permute(("E", "A", "B")).matrix
    manual = np.kron(u, np.eye(2)) @ manual @ np.kron(u, np.eye(2)).conj().T
    expect = LabeledState(manual, rho.factorization.subset(("E", "A", "B"))).permute(rho.labels)
    assert np.allclose(out.matrix, expect.matrix)
    with pytest.raises(DimensionError):
        apply_unitary(np.eye(2), rho, ("A", "B"))


def test_append_channel():
    sig = random_state((3,), seed=1, labels="T")
    ch = append_channel(QUBIT, sig)
    x = random_state((2,), seed=2, labels="S")
    out = apply_channel(ch, x)
    assert np.allclose(out.matrix, np.kron(sig.matrix, x.matrix))


def test_petz_recovery_examples():
    ra = random_state((2,), seed=1, labels="A")
    re = random_state((3,), seed=2, labels="E")
    p = petz_recovery(tensor(ra, re), "E", "A")
    assert p.is_valid()
    x = random_state((3,), seed=3, labels="E")
    assert np.allclose(apply_channel(p, x, "E").matrix, np.kron(ra.matrix, x.matrix), atol=1e-10)
    m = random_markov_state(2, 2, [(1, 2), (2, 1)], seed=4)
    assert recovery_fidelity(m, petz_recovery(m.reduce(("A", "E")), "E", "A")) >= 1 - 1e-8
    g = ghz(3)
    pg = petz_recovery(g.reduce(("A", "E")), "E", "A")
    assert pg.is_valid()
    assert 0 <= recovery_fidelity(g, pg) <= 1 + 1e-10


@given(seeds, st.integers(1, 3))
def test_petz_fixed_point(seed, rank):
    rho_ae = random_state((2, 2), rank=rank, seed=seed, labels=("A", "E"))
    p = petz_recovery(rho_ae, "E", "A")
    assert p.tp_residual() <= 1e-9
    out = apply_channel(p, rho_ae.reduce("E"), "E")
    assert np.max(np.abs(out.matrix - rho_ae.matrix)) <= 1e-9


def test_bell_basis_orthonormal():
    b = np.array(bell_basis(3))
    assert np.allclose(b.conj() @ b.T, np.eye(9), atol=1e-12)


def _extension_residual(ens, rho, on):
    c, tau = controlled_ensemble_extension(ens)
    f = rho.factorization.subset(on)
    lhs = apply_unitary(c, tensor(rho, tau), on + ("A1'", "A2'")).reduce(
        rho.labels + ("A1'",))
    rhs = tensor(apply_channel(randomizing_channel(ens, f), rho, on), tau.reduce("A1'"))
    return np.max(np.abs(lhs.matrix - rhs.permute(lhs.labels).matrix))


def test_extension_contract():
    rho = random_state((2, 2), seed=1)
    one = UnitaryEnsemble((random_unitary(2, seed=2),))
    c, tau = controlled_ensemble_extension(one)
    assert c.shape == (2, 2) and tau.dim == 1
    assert _extension_residual(one, rho, ("A",)) <= 1e-9
    assert _extension_residual(heisenberg_weyl_ensemble(2), rho, ("A",)) <= 1e-9
    assert _extension_residual(random_ensemble(4, 4, seed=3), rho, ("A", "B")) <= 1e-9
    with pytest.raises(ValueError):
        controlled_ensemble_extension(random_ensemble(2, 3, seed=4))


def test_ensemble_validation():
    with pytest.raises(ValueError):
        UnitaryEnsemble((np.diag([1.0, 2.0]),))
    with pytest.raises(ValueError):
        UnitaryEnsemble(())
    with pytest.raises(DimensionError):
        UnitaryEnsemble((np.eye(2), np.eye(3)))


def test_channel_json_round_trip(tmp_path):
    ch = random_channel(QUBIT, Factorization(("T",), (3,)), 2, seed=9)
    path = tmp_path / "c.json"
    save_channel(ch, path)
    back = load_channel(path)
    assert back.input == ch.input and back.output == ch.output
    assert all(np.array_equal(a, b) for a, b in zip(back.kraus, ch.kraus))
    assert channel_from_dict(channel_to_dict(ch)).d_out == 3

"""Quantum channels, unitary ensembles and the randomizing constructions.

Choi convention: ``J = sum_ij N(|i><j|) ⊗ |i><j|`` ordered output ⊗ input,
unnormalized, so trace preservation reads ``Tr_out J = I_in`` and
``N(X) = Tr_in[J (I_out ⊗ X^T)]``. A Kraus operator ``K`` contributes
``vec(K) vec(K)^dagger`` with row-major ``vec``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from math import isqrt

import numpy as np

from .linalg import (
    SUPPORT_CUTOFF,
    DimensionError,
    Factorization,
    as_labels,
    embed_operator,
    matrix_func,
    partial_trace,
    permute_subsystems,
    psd_eigh,
)
from .states import (
    LabeledState,
    make_rng,
    matrix_from_json,
    matrix_to_json,
    maximally_mixed,
    validate_density,
)

TP_TOL = 1e-9
UNITARY_TOL = 1e-10


def _generic(d: int, label: str = "S") -> Factorization:
    return Factorization((label,), (d,))


@dataclass(frozen=True)
class QuantumChannel:
    """CPTP map stored by its Kraus operators (each ``d_out x d_in``)."""

    input: Factorization
    output: Factorization
    kraus: tuple

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        for k in ks:
            if k.shape != (self.output.dim, self.input.dim):
                raise DimensionError(
                    f"Kraus operator of shape {k.shape}, expected "
                    f"{(self.output.dim, self.input.dim)}")
            k.setflags(write=False)
        if not ks:
            raise ValueError("a channel needs at least one Kraus operator")
        object.__setattr__(self, "kraus", ks)

    @property
    def d_in(self) -> int:
        return self.input.dim

    @property
    def d_out(self) -> int:
        return self.output.dim

    def choi(self) -> np.ndarray:
        vecs = np.stack([k.ravel() for k in self.kraus], axis=1)
        return vecs @ vecs.conj().T

    @classmethod
    def from_choi(cls, choi, input: Factorization, output: Factorization,
                  cutoff: float = 0.0) -> "QuantumChannel":
        w, u = psd_eigh(np.asarray(choi), clip_tol=1e-9)
        keep = w > cutoff
        if not np.any(keep):
            raise ValueError("Choi matrix is zero")
        ks = [np.sqrt(wk) * u[:, k].reshape(output.dim, input.dim)
              for k, wk in zip(np.flatnonzero(keep), w[keep])]
        return cls(input, output, tuple(ks))

    def tp_residual(self) -> float:
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(self.d_in))))

    def cp_residual(self) -> float:
        """Most negative Choi eigenvalue, clipped at zero (Kraus maps are CP)."""
        return float(max(0.0, -np.linalg.eigvalsh(self.choi())[0]))

    def is_valid(self, tol: float = TP_TOL) -> bool:
        return self.tp_residual() <= tol and self.cp_residual() <= tol

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Apply to a bare matrix on the input space."""
        return sum(k @ x @ k.conj().T for k in self.kraus)

    def compose(self, other: "QuantumChannel") -> "QuantumChannel":
        """``self ∘ other``."""
        if other.d_out != self.d_in:
            raise DimensionError("cannot compose channels of mismatched dimension")
        ks = tuple(a @ b for a in self.kraus for b in other.kraus)
        return QuantumChannel(other.input, self.output, ks)


def _output_layout(labels, on, out_labels):
    """Factor order after replacing the ``on`` block by ``out_labels``.

    The output block takes the position of the first acted-on factor; the
    untouched factors keep their relative order.
    """
    result, placed = [], False
    for l in labels:
        if l in on:
            if not placed:
                result.extend(out_labels)
                placed = True
        else:
            result.append(l)
    if not placed:
        result = list(out_labels) + result
    return tuple(result)


def apply_channel(ch: QuantumChannel, rho: LabeledState, on=None) -> LabeledState:
    """Apply ``ch ⊗ id`` with ``ch`` acting on the factors ``on``.

    ``on`` defaults to the channel's input labels. A channel whose output
    factorization equals its input one keeps the state's factor order; any
    other channel replaces the acted-on factors by its output labels, placed
    where the first acted-on factor was.
    """
    on = ch.input.labels if on is None else as_labels(on)
    f = rho.factorization
    if rho.dim_of(on) != ch.d_in:
        raise DimensionError(
            f"channel input dimension {ch.d_in} does not match {on} "
            f"(dimension {rho.dim_of(on)})")
    rest = f.complement(on)
    d_rest = f.dim_of(rest)
    x = permute_subsystems(rho.matrix, f, on + rest).reshape(ch.d_in, d_rest, ch.d_in, d_rest)
    ks = np.stack(ch.kraus)
    y = np.einsum("kai,ibjc,kdj->abdc", ks, x, ks.conj(), optimize=True)
    if ch.output == ch.input:
        out_f = f.subset(on)
    else:
        out_f = ch.output
        clash = set(out_f.labels) & set(rest)
        if clash:
            raise DimensionError(f"output labels {sorted(clash)} collide with untouched factors")
    mid = out_f + f.subset(rest)
    y = y.reshape(mid.dim, mid.dim)
    if ch.output == ch.input:
        final = f.labels
    else:
        final = _output_layout(f.labels, set(on), out_f.labels)
    y = permute_subsystems(y, mid, final)
    return validate_density(y, mid.subset(final))


def apply_unitary(u: np.ndarray, rho: LabeledState, on=None) -> LabeledState:
    on = rho.labels if on is None else as_labels(on)
    f = rho.factorization.subset(on)
    return apply_channel(QuantumChannel(f, f, (u,)), rho, on)


def identity_channel(f: Factorization) -> QuantumChannel:
    return QuantumChannel(f, f, (np.eye(f.dim),))


def replacement_channel(input: Factorization, sigma: LabeledState) -> QuantumChannel:
    """``X -> Tr(X) sigma``."""
    w, u = psd_eigh(sigma.matrix)
    ks = []
    for wk, v in zip(w, u.T):
        if wk > SUPPORT_CUTOFF:
            for j in range(input.dim):
                k = np.zeros((sigma.dim, input.dim), dtype=complex)
                k[:, j] = np.sqrt(wk) * v
                ks.append(k)
    return QuantumChannel(input, sigma.factorization, tuple(ks))


def append_channel(input: Factorization, sigma: LabeledState) -> QuantumChannel:
    """``X -> sigma ⊗ X``, the channel that adjoins a fixed state."""
    w, u = psd_eigh(sigma.matrix)
    eye = np.eye(input.dim)
    ks = tuple(np.kron(np.sqrt(wk) * v.reshape(-1, 1), eye)
               for wk, v in zip(w, u.T) if wk > SUPPORT_CUTOFF)
    return QuantumChannel(input, sigma.factorization + input, ks)


# --- unitary ensembles ------------------------------------------------------

@dataclass(frozen=True)
class UnitaryEnsemble:
    """Uniformly weighted unitaries ``{U^i}_{i=1..M}`` of equal dimension."""

    unitaries: tuple

    def __post_init__(self):
        us = tuple(np.asarray(u, dtype=complex) for u in self.unitaries)
        if not us:
            raise ValueError("ensemble must contain at least one unitary")
        d = us[0].shape[0]
        for u in us:
            if u.shape != (d, d):
                raise DimensionError("ensemble members must share one square shape")
            if np.max(np.abs(u.conj().T @ u - np.eye(d))) > UNITARY_TOL:
                raise ValueError("ensemble member is not unitary")
            u.setflags(write=False)
        object.__setattr__(self, "unitaries", us)

    @property
    def size(self) -> int:
        return len(self.unitaries)

    @property
    def dim(self) -> int:
        return self.unitaries[0].shape[0]

    def __len__(self):
        return self.size

    def __iter__(self):
        return iter(self.unitaries)


def randomizing_channel(ens: UnitaryEnsemble, factorization: Factorization | None = None):
    """``X -> (1/M) sum_i U^i X U^i^dagger``."""
    f = factorization or _generic(ens.dim)
    if f.dim != ens.dim:
        raise DimensionError(f"ensemble dimension {ens.dim} does not match {f.dims}")
    scale = 1 / np.sqrt(ens.size)
    return QuantumChannel(f, f, tuple(scale * u for u in ens))


def shift_clock(d: int) -> tuple[np.ndarray, np.ndarray]:
    """``X|k> = |k+1 mod d>`` and ``Z|k> = exp(2 pi i k / d)|k>``."""
    x = np.roll(np.eye(d), 1, axis=0)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return x, z


def heisenberg_weyl_ops(d: int) -> list[np.ndarray]:
    """The ``d^2`` operators ``X^a Z^b`` in row-major ``(a, b)`` order."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    x, z = shift_clock(d)
    xs = [np.linalg.matrix_power(x, a) for a in range(d)]
    zs = [np.linalg.matrix_power(z, b) for b in range(d)]
    return [xa @ zb for xa in xs for zb in zs]


def heisenberg_weyl_ensemble(d: int) -> UnitaryEnsemble:
    return UnitaryEnsemble(tuple(heisenberg_weyl_ops(d)))


def twirl_subsystem(rho: LabeledState, on) -> LabeledState:
    """Average ``rho`` over the Heisenberg-Weyl group acting on ``on``."""
    on = as_labels(on)
    f = rho.factorization.subset(on)
    ch = randomizing_channel(heisenberg_weyl_ensemble(f.dim), f)
    return apply_channel(ch, rho, on)


def random_unitary(d: int, seed=None) -> np.ndarray:
    """Haar unitary: QR of a Ginibre matrix with the R-diagonal phases removed."""
    rng = make_rng(seed)
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_ensemble(d: int, m: int, seed=None) -> UnitaryEnsemble:
    rng = make_rng(seed)
    return UnitaryEnsemble(tuple(random_unitary(d, rng) for _ in range(m)))


def random_channel(input: Factorization, output: Factorization, n_kraus: int = 2,
                   seed=None) -> QuantumChannel:
    """Random CPTP map from a Haar isometry ``input -> output ⊗ env``."""
    rng = make_rng(seed)
    big = output.dim * n_kraus
    if big < input.dim:
        raise DimensionError("environment too small for an isometry")
    v = random_unitary(big, rng)[:, :input.dim]
    v = v.reshape(output.dim, n_kraus, input.dim)
    return QuantumChannel(input, output, tuple(v[:, k, :] for k in range(n_kraus)))


# --- recovery and the converse construction ---------------------------------

def petz_recovery(rho_ae: LabeledState, from_labels=("E",), recover=("A",)) -> QuantumChannel:
    """Petz map ``E -> AE`` of ``rho_AE``.

    ``X -> rho_AE^{1/2} (I_A ⊗ rho_E^{-1/2} X rho_E^{-1/2}) rho_AE^{1/2}`` on the
    support of ``rho_E``; on its kernel the map traces out and prepares
    ``rho_AE``, which makes it trace preserving everywhere. The output
    factors are ordered ``recover`` then ``from_labels``.
    """
    e, a = as_labels(from_labels), as_labels(recover)
    rho = rho_ae.reduce(a + e).permute(a + e)
    fa, fe = rho.factorization.subset(a), rho.factorization.subset(e)
    rho_e = partial_trace(rho.matrix, rho.factorization, e)
    sq = matrix_func(rho.matrix, "sqrt")
    inv_e = matrix_func(rho_e, "inv_sqrt")
    ks = []
    for j in range(fa.dim):
        ket = np.zeros((fa.dim, 1))
        ket[j] = 1
        # K_j = rho_AE^{1/2} (|j>_A ⊗ rho_E^{-1/2})
        ks.append(sq @ np.kron(ket, inv_e))
    w, u = psd_eigh(rho_e)
    kernel = u[:, w <= SUPPORT_CUTOFF]
    if kernel.shape[1]:
        wa, ua = psd_eigh(rho.matrix)
        for wk, v in zip(wa, ua.T):
            if wk > SUPPORT_CUTOFF:
                for col in kernel.T:
                    ks.append(np.sqrt(wk) * np.outer(v, col.conj()))
    return QuantumChannel(fe, fa + fe, tuple(ks))


def bell_basis(m: int) -> list[np.ndarray]:
    """Orthonormal maximally entangled basis ``(I ⊗ X^a Z^b)|Phi>``, row-major in ``(a, b)``."""
    phi = np.eye(m).ravel() / np.sqrt(m)
    return [np.kron(np.eye(m), w) @ phi for w in heisenberg_weyl_ops(m)]


def controlled_ensemble_extension(ens: UnitaryEnsemble, labels=("A1'", "A2'")):
    """Controlled unitary ``C = sum_i U^i ⊗ |Phi_i><Phi_i|`` and ``tau`` on ``A1' A2'``.

    Needs ``M = m^2``; both control factors have dimension ``m``. Tracing
    ``A2'`` from ``C (rho ⊗ tau) C^dagger`` leaves ``Lambda(rho) ⊗ tau_A1'``.
    """
    m = isqrt(ens.size)
    if m * m != ens.size:
        raise ValueError(f"ensemble size {ens.size} is not a perfect square")
    c = sum(np.kron(u, np.outer(phi, phi.conj())) for u, phi in zip(ens, bell_basis(m)))
    tau = maximally_mixed((m, m), as_labels(labels))
    return c, tau


# --- JSON channel files -----------------------------------------------------

def channel_to_dict(ch: QuantumChannel) -> dict:
    return {"in_dims": list(ch.input.dims), "out_dims": list(ch.output.dims),
            "in_labels": list(ch.input.labels), "out_labels": list(ch.output.labels),
            "kraus": [matrix_to_json(k) for k in ch.kraus]}


def channel_from_dict(data: dict) -> QuantumChannel:
    try:
        in_dims, out_dims = tuple(data["in_dims"]), tuple(data["out_dims"])
        kraus = [matrix_from_json(k) for k in data["kraus"]]
    except KeyError as exc:
        raise ValueError(f"channel object is missing field {exc}") from None
    in_labels = tuple(data.get("in_labels") or [f"in{k}" for k in range(len(in_dims))])
    out_labels = tuple(data.get("out_labels") or [f"out{k}" for k in range(len(out_dims))])
    ch = QuantumChannel(Factorization(in_labels, in_dims),
                        Factorization(out_labels, out_dims), tuple(kraus))
    if ch.tp_residual() > TP_TOL:
        raise ValueError("Kraus operators are not trace preserving")
    return ch


def save_channel(ch: QuantumChannel, path) -> None:
    with open(path, "w") as fh:
        json.dump(channel_to_dict(ch), fh)
        fh.write("\n")


def load_channel(path) -> QuantumChannel:
    with open(path) as fh:
        return channel_from_dict(json.load(fh))


__all__ = [
    "QuantumChannel", "UnitaryEnsemble", "apply_channel", "apply_unitary",
    "append_channel", "bell_basis", "controlled_ensemble_extension",
    "embed_operator", "heisenberg_weyl_ensemble", "heisenberg_weyl_ops",
    "identity_channel", "petz_recovery", "random_channel", "random_ensemble",
    "random_unitary", "randomizing_channel", "replacement_channel",
    "twirl_subsystem",
]

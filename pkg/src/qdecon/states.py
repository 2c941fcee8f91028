"""Labeled density matrices and the state families used by the lab."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .linalg import (
    CLIP_TOL,
    SUPPORT_CUTOFF,
    DimensionError,
    Factorization,
    as_labels,
    partial_trace,
    permute_subsystems,
    psd_eigh,
)

TRACE_TOL = 1e-8
DEFAULT_LABELS = ("A", "B", "E", "R")


class InvalidStateError(ValueError):
    """Raised when a matrix is not a density matrix within tolerance."""


def make_rng(seed=None) -> np.random.Generator:
    """Seedable PCG64 generator; passes existing generators through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def default_labels(n: int) -> tuple[str, ...]:
    if n <= len(DEFAULT_LABELS):
        return DEFAULT_LABELS[:n]
    return tuple(f"S{k}" for k in range(1, n + 1))


def as_factorization(f, labels=None) -> Factorization:
    """Accept a Factorization, or a sequence of dims with optional labels."""
    if isinstance(f, Factorization):
        return f
    dims = tuple(int(d) for d in f)
    return Factorization(as_labels(labels) or default_labels(len(dims)), dims)


@dataclass(frozen=True)
class LabeledState:
    """A density matrix together with its tensor factorization.

    ``repairs`` lists ``(kind, magnitude)`` pairs for the numerical fixes
    applied by :func:`validate_density`.
    """

    matrix: np.ndarray
    factorization: Factorization
    repairs: tuple = field(default=(), compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {m.shape}")
        if m.shape[0] != self.factorization.dim:
            raise DimensionError(
                f"matrix dimension {m.shape[0]} does not match dims {self.factorization.dims}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.factorization.labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self.factorization.dims

    @property
    def dim(self) -> int:
        return self.factorization.dim

    def dim_of(self, labels) -> int:
        return self.factorization.dim_of(labels)

    def reduce(self, keep) -> "LabeledState":
        """Marginal on ``keep``; factors stay in this state's order."""
        keep = as_labels(keep)
        sub = self.factorization.restrict(keep)
        return LabeledState(partial_trace(self.matrix, self.factorization, keep), sub)

    def permute(self, order) -> "LabeledState":
        order = as_labels(order)
        m = permute_subsystems(self.matrix, self.factorization, order)
        return LabeledState(m, self.factorization.subset(order))

    def relabel(self, mapping: dict) -> "LabeledState":
        labels = tuple(mapping.get(l, l) for l in self.labels)
        return LabeledState(self.matrix, Factorization(labels, self.dims))

    def eigenvalues(self) -> np.ndarray:
        """Spectrum, descending."""
        return np.linalg.eigvalsh(self.matrix)[::-1]

    def is_pure(self, tol: float = 1e-9) -> bool:
        return bool(self.eigenvalues()[0] >= 1 - tol)

    def __matmul__(self, other: "LabeledState") -> "LabeledState":
        return tensor(self, other)


def validate_density(x, f, labels=None) -> LabeledState:
    """Check that ``x`` is a density matrix on ``f`` and repair float drift.

    The matrix is symmetrized, eigenvalues in ``[-1e-10, 0)`` are clipped and
    a trace off by at most ``1e-8`` is renormalized. Anything worse raises
    :class:`InvalidStateError`.
    """
    f = as_factorization(f, labels)
    x = np.array(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1] or x.shape[0] != f.dim:
        raise DimensionError(f"matrix of shape {x.shape} does not fit dims {f.dims}")
    repairs = []
    herm_dev = float(np.max(np.abs(x - x.conj().T), initial=0.0))
    if herm_dev > TRACE_TOL:
        raise InvalidStateError(f"matrix is not Hermitian (deviation {herm_dev:.2e})")
    if herm_dev > 0:
        x = (x + x.conj().T) / 2
        repairs.append(("hermitian", herm_dev))
    w, u = np.linalg.eigh(x)
    if w[0] < -CLIP_TOL:
        raise InvalidStateError(f"negative eigenvalue {w[0]:.3e}")
    if w[0] < 0:
        repairs.append(("clip", float(-w[0])))
        w = np.clip(w, 0.0, None)
        x = (u * w) @ u.conj().T
    tr = float(np.real(np.trace(x)))
    if abs(tr - 1) > TRACE_TOL:
        raise InvalidStateError(f"trace {tr!r} differs from 1 by more than {TRACE_TOL:g}")
    if tr != 1.0:
        x = x / tr
        repairs.append(("trace", abs(tr - 1)))
    return LabeledState(x, f, tuple(repairs))


def tensor(*states: LabeledState) -> LabeledState:
    """Tensor product of labeled states, factors concatenated left to right."""
    if not states:
        raise ValueError("need at least one state")
    m = states[0].matrix
    f = states[0].factorization
    for s in states[1:]:
        m = np.kron(m, s.matrix)
        f = f + s.factorization
    return LabeledState(m, f)


def pure_state(vec, f, labels=None) -> LabeledState:
    """Projector onto the normalized vector ``vec``."""
    v = np.asarray(vec, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return validate_density(np.outer(v, v.conj()), f, labels)


def maximally_mixed(d, label="A") -> LabeledState:
    """``I_d / d``; ``d`` and ``label`` may also be matching tuples."""
    dims = (d,) if np.isscalar(d) else tuple(d)
    labels = as_labels(label)
    if any(int(k) < 1 for k in dims):
        raise ValueError(f"dimension must be >= 1, got {d}")
    n = prod(dims)
    return LabeledState(np.eye(n) / n, Factorization(labels, dims))


def maximally_entangled(d: int, labels=("A", "B")) -> LabeledState:
    """Projector onto ``sum_k |kk> / sqrt(d)``."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    v = np.eye(d).ravel() / np.sqrt(d)
    return LabeledState(np.outer(v, v), Factorization(as_labels(labels), (d, d)))


def ghz(parties: int = 3, d: int = 2, labels=None) -> LabeledState:
    """Projector onto ``sum_k |k>^{⊗parties} / sqrt(d)``."""
    if parties < 2:
        raise ValueError("GHZ needs at least two parties")
    labels = as_labels(labels) or default_labels(parties)
    v = np.zeros(d ** parties)
    stride = sum(d ** k for k in range(parties))
    v[np.arange(d) * stride] = 1 / np.sqrt(d)
    return LabeledState(np.outer(v, v), Factorization(labels, (d,) * parties))


def random_state(f, rank: int | None = None, seed=None, labels=None) -> LabeledState:
    """Random density matrix ``G G^dagger / Tr`` with ``G`` complex Ginibre.

    ``rank=1`` gives a Haar-random pure state, ``rank=None`` a full-rank one.
    """
    f = as_factorization(f, labels)
    rng = make_rng(seed)
    n = f.dim
    rank = n if rank is None else int(rank)
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    g = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    if rank == 1:
        return pure_state(g[:, 0], f)
    rho = g @ g.conj().T
    return validate_density(rho / np.trace(rho).real, f)


def purify(rho: LabeledState, new_label: str = "R") -> LabeledState:
    """Pure state on ``rho``'s factors plus a purifier of dimension ``rank(rho)``."""
    if new_label in rho.labels:
        raise DimensionError(f"label {new_label!r} already in use")
    try:
        w, u = psd_eigh(rho.matrix)
    except ValueError as exc:
        raise InvalidStateError(str(exc)) from None
    keep = w > SUPPORT_CUTOFF
    w, u = w[keep], u[:, keep]
    # |psi> = sum_k sqrt(w_k) |u_k> ⊗ |k>
    psi = (u * np.sqrt(w)).ravel()
    f = rho.factorization + Factorization((new_label,), (len(w),))
    return pure_state(psi, f)


def copy_labels(labels, n: int) -> tuple[str, ...]:
    """Labels of ``n`` copies, grouped per original label."""
    labels = as_labels(labels)
    if n == 1:
        return labels
    return tuple(f"{l}_{k}" for l in labels for k in range(1, n + 1))


def n_copies(rho: LabeledState, n: int) -> LabeledState:
    """``rho^{⊗n}`` with factors ``L_1..L_n`` grouped per original label."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if n == 1:
        return rho
    parts = [rho.relabel({l: f"{l}_{k}" for l in rho.labels}) for k in range(1, n + 1)]
    return tensor(*parts).permute(copy_labels(rho.labels, n))


def markov_embedding(block_dims: Sequence[tuple[int, int]]) -> list[tuple[int, int, int]]:
    """Bookkeeping for ``E = ⊕_j eL_j ⊗ eR_j``: ``(offset, dL, dR)`` per block."""
    table, offset = [], 0
    for dl, dr in block_dims:
        if dl < 1 or dr < 1:
            raise DimensionError(f"block dims must be positive, got {(dl, dr)}")
        table.append((offset, int(dl), int(dr)))
        offset += dl * dr
    return table


def markov_state(blocks, block_dims, labels=("A", "B", "E")) -> LabeledState:
    """Quantum Markov state ``⊕_j p_j rho_{A eL_j} ⊗ rho_{eR_j B}``.

    ``blocks`` holds ``(p_j, rho_AeL, rho_eRB)`` with the matrices ordered
    ``A ⊗ eL_j`` and ``eR_j ⊗ B``. The result carries factors ``(A, B, E)``
    with ``E`` of dimension ``sum_j dL_j dR_j``; coherences between blocks
    are zero.
    """
    table = markov_embedding(block_dims)
    if len(blocks) != len(table):
        raise DimensionError(f"{len(blocks)} blocks but {len(table)} block dims")
    weights = np.array([b[0] for b in blocks], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
        raise ValueError(f"weights must be a probability vector, got {weights}")
    da = db = None
    for (p, rl, rr), (_, dl, dr) in zip(blocks, table):
        rl, rr = np.asarray(rl), np.asarray(rr)
        if rl.shape[0] % dl or rr.shape[0] % dr:
            raise DimensionError("block state does not factor over its E dimension")
        da_j, db_j = rl.shape[0] // dl, rr.shape[0] // dr
        if (da, db) not in ((None, None), (da_j, db_j)):
            raise DimensionError("blocks disagree on the dimensions of A or B")
        da, db = da_j, db_j
    de = sum(dl * dr for _, dl, dr in table)
    out = np.zeros((da, db, de, da, db, de), dtype=complex)
    for (p, rl, rr), (off, dl, dr) in zip(blocks, table):
        sigma = np.kron(np.asarray(rl), np.asarray(rr)).reshape(da, dl, dr, db, da, dl, dr, db)
        # (a, l, r, b) -> (a, b, l, r)
        sigma = sigma.transpose(0, 3, 1, 2, 4, 7, 5, 6).reshape(da, db, dl * dr, da, db, dl * dr)
        out[:, :, off:off + dl * dr, :, :, off:off + dl * dr] += p * sigma
    n = da * db * de
    return validate_density(out.reshape(n, n), Factorization(as_labels(labels), (da, db, de)))


def random_markov_state(da: int, db: int, block_dims, seed=None, labels=("A", "B", "E")):
    """Markov state with random weights and random block states."""
    rng = make_rng(seed)
    weights = rng.dirichlet(np.ones(len(block_dims)))
    blocks = []
    for p, (dl, dr) in zip(weights, block_dims):
        rank_l = int(rng.integers(1, da * dl + 1))
        rank_r = int(rng.integers(1, dr * db + 1))
        rl = random_state((da, dl), rank=rank_l, seed=rng, labels=("a", "l")).matrix
        rr = random_state((dr, db), rank=rank_r, seed=rng, labels=("r", "b")).matrix
        blocks.append((p, rl, rr))
    return markov_state(blocks, block_dims, labels)


# --- JSON state files -------------------------------------------------------

def matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("matrix must be a list of rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def state_to_dict(rho: LabeledState) -> dict:
    return {"labels": list(rho.labels), "dims": list(rho.dims),
            "matrix": matrix_to_json(rho.matrix)}


def state_from_dict(data: dict) -> LabeledState:
    try:
        f = Factorization(tuple(data["labels"]), tuple(data["dims"]))
        m = matrix_from_json(data["matrix"])
    except KeyError as exc:
        raise ValueError(f"state object is missing field {exc}") from None
    return validate_density(m, f)


def save_state(rho: LabeledState, path) -> None:
    with open(path, "w") as fh:
        json.dump(state_to_dict(rho), fh)
        fh.write("\n")


def load_state(path) -> LabeledState:
    with open(path) as fh:
        return state_from_dict(json.load(fh))

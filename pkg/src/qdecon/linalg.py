"""Dense linear algebra over multipartite Hilbert spaces.

Operators on a composite space are plain square ``numpy`` arrays. The tensor
structure lives in a separate :class:`Factorization` that names each factor
and records its local dimension. Factors are ordered big-endian: the first
label is the outermost index of the Kronecker product.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence

import numpy as np

# eigenvalues in [-CLIP_TOL, 0) are floating-point drift, anything below is a bug
CLIP_TOL = 1e-10
# eigenvalues at or below this are outside the support (0 log 0 = 0)
SUPPORT_CUTOFF = 1e-12
HERMITIAN_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when labels or dimensions are inconsistent."""


class CapacityError(DimensionError):
    """Raised when a request exceeds the dense-matrix size limits."""


def as_labels(labels: str | Iterable[str] | None) -> tuple[str, ...]:
    """Normalize a single label or an iterable of labels to a tuple."""
    if labels is None:
        return ()
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


@dataclass(frozen=True)
class Factorization:
    """Ordered named tensor factors with their local dimensions.

    An empty factorization is allowed and describes the trivial
    one-dimensional space.
    """

    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dims", dims)
        if len(labels) != len(dims):
            raise DimensionError(f"{len(labels)} labels but {len(dims)} dims")
        if len(set(labels)) != len(labels):
            raise DimensionError(f"duplicate labels in {labels}")
        for label in labels:
            if not isinstance(label, str) or not label:
                raise DimensionError(f"labels must be nonempty strings, got {label!r}")
        for d in dims:
            if d < 1:
                raise DimensionError(f"local dimensions must be positive, got {dims}")

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def __len__(self):
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DimensionError(f"unknown label {label!r}; have {self.labels}") from None

    def indices(self, labels) -> list[int]:
        labels = as_labels(labels)
        if len(set(labels)) != len(labels):
            raise DimensionError(f"repeated labels in {labels}")
        return [self.index(label) for label in labels]

    def dim_of(self, labels) -> int:
        return prod(self.dims[i] for i in self.indices(labels))

    def subset(self, labels) -> "Factorization":
        """Factorization restricted to ``labels``, in the given order."""
        idx = self.indices(labels)
        return Factorization(tuple(self.labels[i] for i in idx),
                             tuple(self.dims[i] for i in idx))

    def restrict(self, keep) -> "Factorization":
        """Factorization restricted to ``keep``, in this factorization's order."""
        keep = set(self.indices(keep))
        return Factorization(tuple(l for i, l in enumerate(self.labels) if i in keep),
                             tuple(d for i, d in enumerate(self.dims) if i in keep))

    def complement(self, labels) -> tuple[str, ...]:
        drop = set(as_labels(labels))
        self.indices(drop)
        return tuple(l for l in self.labels if l not in drop)

    def __add__(self, other: "Factorization") -> "Factorization":
        return Factorization(self.labels + other.labels, self.dims + other.dims)


def _check_square(x: np.ndarray, f: Factorization | None = None) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {x.shape}")
    if f is not None and x.shape[0] != f.dim:
        raise DimensionError(f"matrix dimension {x.shape[0]} does not match dims {f.dims}")
    return x


def tensor_product(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Kronecker product with ``x`` as the outer factor."""
    return np.kron(x, y)


def partial_trace(x: np.ndarray, f: Factorization, keep) -> np.ndarray:
    """Trace out every factor of ``f`` not listed in ``keep``.

    The kept factors appear in the order they have in ``f``.
    """
    x = _check_square(x, f)
    keep_idx = sorted(f.indices(keep))
    n = len(f)
    if len(keep_idx) == n:
        return x.copy()
    drop_idx = [i for i in range(n) if i not in keep_idx]
    dk = prod(f.dims[i] for i in keep_idx)
    dt = prod(f.dims[i] for i in drop_idx)
    t = x.reshape(f.dims * 2)
    order = keep_idx + drop_idx
    t = t.transpose(order + [i + n for i in order]).reshape(dk, dt, dk, dt)
    return np.einsum("ijkj->ik", t)


def permute_subsystems(x: np.ndarray, f: Factorization, perm) -> np.ndarray:
    """Reorder the tensor factors of ``x`` so they follow the label order ``perm``."""
    x = _check_square(x, f)
    perm = as_labels(perm)
    if sorted(perm) != sorted(f.labels):
        raise DimensionError(f"{perm} is not a permutation of {f.labels}")
    idx = f.indices(perm)
    if idx == list(range(len(f))):
        return x.copy()
    n = len(f)
    t = x.reshape(f.dims * 2).transpose(idx + [i + n for i in idx])
    return t.reshape(x.shape).copy()


def is_hermitian(x: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    x = np.asarray(x)
    return bool(np.max(np.abs(x - x.conj().T), initial=0.0) <= tol)


def herm_eig(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(w, u)`` with ``x = u @ diag(w) @ u^dagger``.
    """
    x = _check_square(x)
    if not is_hermitian(x):
        raise ValueError("matrix is not Hermitian within tolerance")
    w, u = np.linalg.eigh((x + x.conj().T) / 2)
    return w[::-1].copy(), u[:, ::-1].copy()


def psd_eigh(x: np.ndarray, clip_tol: float = CLIP_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigendecomposition of a PSD matrix with drift clipped to zero."""
    w, u = np.linalg.eigh((x + x.conj().T) / 2)
    if w.size and w[0] < -clip_tol:
        raise ValueError(f"matrix has eigenvalue {w[0]:.3e} below -{clip_tol:g}")
    return np.clip(w, 0.0, None), u


def _apply_spectral(w: np.ndarray, u: np.ndarray, fw: np.ndarray) -> np.ndarray:
    return (u * fw) @ u.conj().T


def matrix_func(x: np.ndarray, func: str, cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    """Apply ``sqrt``, ``log2`` or ``inv_sqrt`` to a PSD matrix spectrally.

    Eigenvalues at or below ``cutoff`` lie outside the support and map to 0.
    """
    x = _check_square(x)
    w, u = psd_eigh(x)
    on = w > cutoff
    fw = np.zeros_like(w)
    if func == "sqrt":
        fw[on] = np.sqrt(w[on])
    elif func == "log2":
        fw[on] = np.log2(w[on])
    elif func == "inv_sqrt":
        fw[on] = 1.0 / np.sqrt(w[on])
    else:
        raise ValueError(f"unknown matrix function {func!r}")
    return _apply_spectral(w, u, fw)


def support_projector(x: np.ndarray, cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    w, u = psd_eigh(x)
    v = u[:, w > cutoff]
    return v @ v.conj().T


def embed_operator(op: np.ndarray, on: Sequence[str], f: Factorization) -> np.ndarray:
    """Extend an operator on the factors ``on`` by the identity on the rest of ``f``."""
    on = as_labels(on)
    rest = f.complement(on)
    d_rest = f.dim_of(rest)
    if op.shape[0] != f.dim_of(on):
        raise DimensionError(f"operator dimension {op.shape[0]} does not match {on}")
    full = np.kron(op, np.eye(d_rest))
    return permute_subsystems(full, f.subset(on + rest), f.labels)

"""Entropic functionals in bits and residuals of the identities they satisfy.

Every reduced state is recomputed from a fresh partial trace; nothing is
cached.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .linalg import SUPPORT_CUTOFF, DimensionError, as_labels, psd_eigh
from .states import InvalidStateError, LabeledState

PURITY_TOL = 1e-9


def _disjoint(*parts) -> list[tuple[str, ...]]:
    parts = [as_labels(p) for p in parts]
    seen = set()
    for p in parts:
        if seen & set(p):
            raise ValueError(f"parts overlap on {sorted(seen & set(p))}")
        seen |= set(p)
    return parts


def spectrum_entropy(w) -> float:
    """``-sum p log2 p`` over entries above the support cutoff."""
    w = np.asarray(w, dtype=float)
    w = w[w > SUPPORT_CUTOFF]
    return float(-np.sum(w * np.log2(w)))


def von_neumann_entropy(rho: LabeledState, subset=None) -> float:
    """Entropy of the marginal on ``subset`` (all factors when omitted)."""
    subset = rho.labels if subset is None else as_labels(subset)
    if not subset:
        return 0.0
    w, _ = psd_eigh(rho.reduce(subset).matrix)
    return spectrum_entropy(w)


def qmi(rho: LabeledState, part_a, part_b) -> float:
    """``I(A;B) = H(A) + H(B) - H(AB)``."""
    a, b = _disjoint(part_a, part_b)
    h = von_neumann_entropy
    return h(rho, a) + h(rho, b) - h(rho, a + b)


def cqmi(rho: LabeledState, part_a, part_b, part_e=()) -> float:
    """``I(A;B|E) = H(AE) + H(BE) - H(E) - H(ABE)``.

    Algebraically the same as ``I(AE;B) - I(E;B)``; the four-entropy form
    avoids two redundant marginals.
    """
    a, b, e = _disjoint(part_a, part_b, part_e)
    h = von_neumann_entropy
    return h(rho, a + e) + h(rho, b + e) - h(rho, e) - h(rho, a + b + e)


def chain_rule_residual(rho: LabeledState, parts_a, part_b, part_e=()) -> float:
    """``|I(A_1..A_n;B|E) - sum_i I(A_i;B|E A_1..A_{i-1})|``.

    ``parts_a`` is an ordered list whose items are labels or label groups.
    """
    groups = [as_labels(p) for p in parts_a]
    b, e = as_labels(part_b), as_labels(part_e)
    whole = tuple(l for g in groups for l in g)
    lhs = cqmi(rho, whole, b, e)
    total, prefix = 0.0, ()
    for g in groups:
        total += cqmi(rho, g, b, e + prefix)
        prefix += g
    return abs(lhs - total)


def _require_pure(rho: LabeledState):
    if not rho.is_pure(PURITY_TOL):
        raise InvalidStateError("input is not a pure state")


def duality_residual(rho: LabeledState, part_a, part_b, part_e, part_r=None) -> float:
    """``|I(A;B|E) - I(A;B|R)|`` for a pure state on ``ABER``.

    ``R`` defaults to every factor not in ``A``, ``B`` or ``E`` (possibly none).
    """
    _require_pure(rho)
    a, b, e = _disjoint(part_a, part_b, part_e)
    r = rho.factorization.complement(a + b + e) if part_r is None else as_labels(part_r)
    _disjoint(a, b, e, r)
    if set(a + b + e + r) != set(rho.labels):
        raise DimensionError("A, B, E, R must cover every factor of the pure state")
    return abs(cqmi(rho, a, b, e) - cqmi(rho, a, b, r))


def ancilla_rate_formula(rho: LabeledState, part_a, part_e, part_r=None, part_b=None) -> float:
    """``max{I(A;E)/2 - I(A;R)/2, 0}`` for a pure state on ``ABER``.

    When only some parts are given the remaining factors go to ``R``
    (or ``B`` if ``R`` is given explicitly).
    """
    _require_pure(rho)
    a, e = as_labels(part_a), as_labels(part_e)
    if part_r is None:
        b = as_labels(part_b)
        r = rho.factorization.complement(a + e + b)
    else:
        r = as_labels(part_r)
    _disjoint(a, e, r)
    return max(0.5 * qmi(rho, a, e) - 0.5 * qmi(rho, a, r), 0.0)


@dataclass
class EntropyReport:
    """Entropies of every nonempty union of the A, B, E parts plus QMI/CQMI."""

    entropies: dict[str, float]
    qmi: dict[str, float]
    cqmi: float
    residuals: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"entropies": self.entropies, "qmi": self.qmi, "cqmi": self.cqmi,
                "residuals": self.residuals}


def entropy_report(rho: LabeledState, part_a, part_b, part_e=()) -> EntropyReport:
    a, b, e = _disjoint(part_a, part_b, part_e)
    roles = {"A": a, "B": b, "E": e}
    names = [k for k, v in roles.items() if v]
    entropies = {}
    for r in range(1, len(names) + 1):
        for combo in combinations(names, r):
            labels = tuple(l for k in combo for l in roles[k])
            entropies["".join(combo)] = von_neumann_entropy(rho, labels)
    mutual = {"A;B": qmi(rho, a, b)}
    if e:
        mutual["A;E"] = qmi(rho, a, e)
        mutual["B;E"] = qmi(rho, b, e)
        mutual["AE;B"] = qmi(rho, a + e, b)
    value = cqmi(rho, a, b, e)
    residuals = {"ssa": min(value, 0.0)}
    if len(a) > 1:
        residuals["chain_rule"] = chain_rule_residual(rho, a, b, e)
    if rho.is_pure(PURITY_TOL):
        residuals["duality"] = duality_residual(rho, a, b, e)
    return EntropyReport(entropies, mutual, value, residuals)

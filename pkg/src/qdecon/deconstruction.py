"""State-deconstruction and conditional-erasure protocols.

A protocol appends an ancilla ``theta`` on ``A'`` to ``n`` copies of
``rho_ABE`` and applies a uniform mixture of unitaries on ``A^n A' E^n``.
The resulting ``omega`` is scored on three conditions: recoverability of
``A^n A'`` from ``E^n`` (fidelity of recovery), negligible disturbance of
the ``B^n E^n`` marginal, and, for conditional erasure, closeness of
``omega`` to a maximally mixed register tensored with the rest.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import isqrt, log2

import numpy as np

from .channels import (
    UnitaryEnsemble,
    apply_channel,
    apply_unitary,
    controlled_ensemble_extension,
    heisenberg_weyl_ops,
    randomizing_channel,
    twirl_subsystem,
)
from .entropy import cqmi
from .linalg import CapacityError, DimensionError, Factorization, as_labels, embed_operator
from .recovery import (
    MAX_FOR_DIM,
    FoREstimate,
    OptimizerConfig,
    fidelity_of_recovery,
    petz_fidelity,
    uhlmann_fidelity,
)
from .states import (
    LabeledState,
    copy_labels,
    matrix_from_json,
    matrix_to_json,
    maximally_mixed,
    n_copies,
    state_from_dict,
    state_to_dict,
    tensor,
)

MAX_STATE_DIM = 256
UNITARY_TOL = 1e-10


def _roles(roles) -> tuple[tuple[str, ...], ...]:
    a, b, e = (as_labels(r) for r in roles)
    if not a or not b:
        raise ValueError("roles A and B must be nonempty")
    return a, b, e


@dataclass(frozen=True)
class DeconstructionProtocol:
    """Ancilla, unitary ensemble and bookkeeping for one protocol instance.

    ``roles`` holds the labels of ``A``, ``B`` and ``E`` in the single-copy
    state. ``erase`` lists the factors that must end up maximally mixed in
    conditional-erasure mode; ``None`` means all of ``A^n A'``.
    """

    ensemble: UnitaryEnsemble
    copies: int = 1
    ancilla: LabeledState | None = None
    roles: tuple = (("A",), ("B",), ("E",))
    erase: tuple | None = None
    name: str = "custom"

    def __post_init__(self):
        if self.copies < 1:
            raise ValueError(f"copies must be >= 1, got {self.copies}")
        object.__setattr__(self, "roles", _roles(self.roles))
        if self.erase is not None:
            object.__setattr__(self, "erase", as_labels(self.erase))

    @property
    def size(self) -> int:
        return self.ensemble.size

    @property
    def rate(self) -> float:
        """``(1/n) log2 M`` in bits per copy."""
        return log2(self.ensemble.size) / self.copies

    @property
    def ancilla_labels(self) -> tuple[str, ...]:
        return self.ancilla.labels if self.ancilla is not None else ()

    def output_roles(self):
        """``(A^n A', B^n, E^n)`` label groups of ``omega``."""
        a, b, e = self.roles
        n = self.copies
        return copy_labels(a, n) + self.ancilla_labels, copy_labels(b, n), copy_labels(e, n)

    def acting_labels(self) -> tuple[str, ...]:
        a, _, e = self.roles
        n = self.copies
        return copy_labels(a, n) + self.ancilla_labels + copy_labels(e, n)

    def erase_labels(self) -> tuple[str, ...]:
        return self.erase if self.erase is not None else self.output_roles()[0]

    def to_dict(self) -> dict:
        a, b, e = self.roles
        return {
            "ancilla": state_to_dict(self.ancilla) if self.ancilla is not None else None,
            "copies": self.copies,
            "ensemble": [matrix_to_json(u) for u in self.ensemble],
            "erase": list(self.erase) if self.erase is not None else None,
            "roles": {"A": list(a), "B": list(b), "E": list(e)},
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, data: dict, roles=None) -> "DeconstructionProtocol":
        try:
            unitaries = tuple(matrix_from_json(u) for u in data["ensemble"])
        except KeyError:
            raise ValueError("protocol object is missing field 'ensemble'") from None
        ancilla = data.get("ancilla")
        if roles is None:
            r = data.get("roles") or {"A": ["A"], "B": ["B"], "E": ["E"]}
            roles = (r.get("A", []), r.get("B", []), r.get("E", []))
        return cls(
            ensemble=UnitaryEnsemble(unitaries),
            copies=int(data.get("copies", 1)),
            ancilla=state_from_dict(ancilla) if ancilla else None,
            roles=roles,
            erase=data.get("erase"),
            name=data.get("name", "file"),
        )


def save_protocol(p: DeconstructionProtocol, path) -> None:
    with open(path, "w") as fh:
        json.dump(p.to_dict(), fh)
        fh.write("\n")


def load_protocol(path, roles=None) -> DeconstructionProtocol:
    with open(path) as fh:
        return DeconstructionProtocol.from_dict(json.load(fh), roles)


@dataclass
class ProtocolReport:
    """Everything measured on ``omega`` for one protocol run.

    ``epsilon`` is the largest shortfall from fidelity 1 among the
    conditions of the selected mode: recoverability and disturbance for
    ``"eq7"`` (deconstruction), erasure and disturbance for ``"eq8"``
    (conditional erasure).
    """

    omega: LabeledState
    mode: str
    roles: tuple
    size: int
    copies: int
    rate: float
    cqmi_per_copy: float
    disturbance_fidelity: float
    recoverability: FoREstimate | None
    petz_fidelity: float | None
    erasure_fidelity: float | None
    erase: tuple
    epsilon: float
    input_roles: tuple = (("A",), ("B",), ("E",))
    converse: "ConverseDiagnostic | None" = field(default=None)

    @property
    def recoverability_fidelity(self) -> float | None:
        return None if self.recoverability is None else self.recoverability.value

    def passes(self, eps: float) -> bool:
        return self.epsilon <= eps

    def to_dict(self) -> dict:
        a, b, e = self.roles
        return {
            "mode": self.mode,
            "roles": {"A": list(a), "B": list(b), "E": list(e)},
            "M": self.size,
            "copies": self.copies,
            "rate": self.rate,
            "cqmi_per_copy": self.cqmi_per_copy,
            "rate_minus_cqmi": self.rate - self.cqmi_per_copy,
            "disturbance_fidelity": self.disturbance_fidelity,
            "recoverability": None if self.recoverability is None else self.recoverability.to_dict(),
            "recoverability_fidelity": self.recoverability_fidelity,
            "petz_fidelity": self.petz_fidelity,
            "erase": list(self.erase),
            "erasure_fidelity": self.erasure_fidelity,
            "epsilon": self.epsilon,
            "converse": None if self.converse is None else self.converse.to_dict(),
        }


def _input_state(rho: LabeledState, p: DeconstructionProtocol) -> LabeledState:
    a, b, e = p.roles
    single = rho.reduce(a + b + e)
    anc_dim = p.ancilla.dim if p.ancilla is not None else 1
    total = single.dim ** p.copies * anc_dim
    if total > MAX_STATE_DIM:
        raise CapacityError(
            f"{p.copies} copies with ancilla need dimension {total} > {MAX_STATE_DIM}")
    clash = set(p.ancilla_labels) & set(copy_labels(a + b + e, p.copies))
    if clash:
        raise DimensionError(f"ancilla labels {sorted(clash)} clash with the state")
    state = n_copies(single, p.copies)
    if p.ancilla is not None:
        state = tensor(state, p.ancilla)
    return state


def evaluate_protocol(rho: LabeledState, p: DeconstructionProtocol, mode: str = "eq7",
                      eq8_subsystem=None, cfg: OptimizerConfig | None = None,
                      with_converse: bool = True) -> ProtocolReport:
    """Run protocol ``p`` on ``rho`` and score ``omega``.

    In ``"eq7"`` mode the recoverability fidelity comes from the
    fidelity-of-recovery optimizer, which limits ``omega`` to dimension 64.
    In ``"eq8"`` mode the erasure fidelity is scored against a maximally
    mixed state on ``eq8_subsystem`` (default: the protocol's erase labels),
    and recoverability is only computed when it fits.
    """
    if mode not in ("eq7", "eq8"):
        raise ValueError(f"mode must be 'eq7' or 'eq8', got {mode!r}")
    state = _input_state(rho, p)
    acting = p.acting_labels()
    f_act = state.factorization.subset(acting)
    if f_act.dim != p.ensemble.dim:
        raise DimensionError(
            f"ensemble acts on dimension {p.ensemble.dim}, but {acting} has {f_act.dim}")
    omega = apply_channel(randomizing_channel(p.ensemble, f_act), state, acting)

    aa, bn, en = p.output_roles()
    a, b, e = p.roles
    reference = state.reduce(bn + en)
    disturbance = uhlmann_fidelity(omega.reduce(bn + en), reference)

    recoverability = petz = None
    if omega.dim <= MAX_FOR_DIM:
        recoverability = fidelity_of_recovery(omega, (aa, bn, en), cfg)
        petz = petz_fidelity(omega, (aa, bn, en))
    elif mode == "eq7":
        raise CapacityError(
            f"recoverability check needs dimension <= {MAX_FOR_DIM}, omega has {omega.dim}")

    erase = as_labels(eq8_subsystem) if eq8_subsystem is not None else p.erase_labels()
    erasure = None
    if mode == "eq8" or eq8_subsystem is not None:
        erasure = erasure_fidelity(omega, erase, bn + en)

    if mode == "eq7":
        eps = max(1 - recoverability.value, 1 - disturbance)
    else:
        eps = max(1 - erasure, 1 - disturbance)
    report = ProtocolReport(
        omega=omega, mode=mode, roles=(aa, bn, en), size=p.size, copies=p.copies,
        rate=p.rate, cqmi_per_copy=cqmi(rho, a, b, e),
        disturbance_fidelity=disturbance, recoverability=recoverability,
        petz_fidelity=petz, erasure_fidelity=erasure, erase=erase, epsilon=max(eps, 0.0),
        input_roles=p.roles)
    if with_converse:
        report.converse = converse_diagnostic(rho, report)
    return report


def erasure_fidelity(omega: LabeledState, erase, rest) -> float:
    """``F(omega_{X R}, pi_X ⊗ omega_R)`` with ``X = erase`` and ``R = rest``."""
    x, r = as_labels(erase), as_labels(rest)
    target = omega.reduce(x + r)
    pi = maximally_mixed(tuple(omega.factorization.subset(x).dims), x)
    return uhlmann_fidelity(target, tensor(pi, omega.reduce(r)))


def marginal_append_fidelity(report: ProtocolReport) -> float:
    """Fidelity reached by the recovery ``X -> omega_{A^nA'} ⊗ X``."""
    aa, bn, en = report.roles
    omega = report.omega
    return uhlmann_fidelity(omega.reduce(aa + bn + en),
                            tensor(omega.reduce(aa), omega.reduce(bn + en)))


# --- protocol constructors ----------------------------------------------------

def _acting_factorization(rho: LabeledState, roles, copies: int, ancilla=None) -> Factorization:
    """Factorization of ``A^n A' E^n`` with copy labels grouped per original label."""
    a, b, e = _roles(roles)
    f = rho.factorization
    total = f.dim_of(a + b + e) ** copies * (ancilla.dim if ancilla is not None else 1)
    if total > MAX_STATE_DIM:
        raise CapacityError(
            f"{copies} copies with ancilla need dimension {total} > {MAX_STATE_DIM}")

    def copied(labels):
        dims = tuple(d for d in f.subset(labels).dims for _ in range(copies))
        return Factorization(copy_labels(labels, copies), dims)

    anc = ancilla.factorization if ancilla is not None else Factorization((), ())
    return copied(a) + anc + copied(e)


def full_twirl_protocol(rho: LabeledState, n: int = 1, roles=("A", "B", "E")):
    """Heisenberg-Weyl twirl of all of ``A^n``, identity on ``E^n``, no ancilla.

    ``omega = pi_{A^n} ⊗ rho_BE^{⊗n}`` exactly, at rate ``2 log2 d_A``.
    """
    roles = _roles(roles)
    f_act = _acting_factorization(rho, roles, n)
    an = copy_labels(roles[0], n)
    unitaries = tuple(embed_operator(w, an, f_act) for w in heisenberg_weyl_ops(f_act.dim_of(an)))
    return DeconstructionProtocol(UnitaryEnsemble(unitaries), n, None, roles, None, "twirl")


def markov_protocol(rho: LabeledState, n: int = 1, roles=("A", "B", "E")):
    """The do-nothing protocol: ``M = 1``, rate 0."""
    roles = _roles(roles)
    d = _acting_factorization(rho, roles, n).dim
    return DeconstructionProtocol(UnitaryEnsemble((np.eye(d),)), n, None, roles, None, "markov")


def encoder_protocol(rho: LabeledState, v: np.ndarray, theta: LabeledState | None = None,
                     erase=("A",), roles=("A", "B", "E"), copies: int = 1,
                     check_tol: float = 1e-10) -> DeconstructionProtocol:
    """Ensemble ``{W^i V}`` with ``W^i`` the Heisenberg-Weyl group on ``erase``.

    ``V`` acts on ``A^n A' E^n`` (in that factor order) and ``erase`` names
    the factors it hands to the twirl, so ``M = d_erase^2``. The result is
    checked against applying ``V`` and then twirling ``erase`` directly.
    """
    roles = _roles(roles)
    f_act = _acting_factorization(rho, roles, copies, theta)
    v = np.asarray(v, dtype=complex)
    if v.shape != (f_act.dim, f_act.dim):
        raise DimensionError(f"V must be {f_act.dim}x{f_act.dim}, got {v.shape}")
    if np.max(np.abs(v.conj().T @ v - np.eye(f_act.dim))) > UNITARY_TOL:
        raise ValueError("V is not unitary")
    erase = as_labels(erase)
    d_erase = f_act.dim_of(erase)
    unitaries = tuple(embed_operator(w, erase, f_act) @ v for w in heisenberg_weyl_ops(d_erase))
    p = DeconstructionProtocol(UnitaryEnsemble(unitaries), copies, theta, roles, None, "encoder")

    state = _input_state(rho, p)
    acting = p.acting_labels()
    via_ensemble = apply_channel(randomizing_channel(p.ensemble, f_act), state, acting)
    via_twirl = twirl_subsystem(apply_unitary(v, state, acting), erase)
    via_twirl = via_twirl.permute(via_ensemble.labels)
    gap = float(np.max(np.abs(via_ensemble.matrix - via_twirl.matrix)))
    if gap > check_tol:
        raise RuntimeError(f"encoder ensemble disagrees with V-then-twirl by {gap:.3e}")
    return p


# --- converse diagnostic --------------------------------------------------------

@dataclass
class ConverseDiagnostic:
    """Finite-``n`` bookkeeping of the converse bound.

    ``lhs = n I(A;B|E)_rho`` and ``rhs_core = I(A^nA';B^n|E^n)_omega +
    2 log2 |A2'|`` with ``|A2'| = sqrt(M)``. The bound ``lhs <= rhs_core``
    is only claimed (``holds``) for protocols with ``epsilon <= 1e-9``.
    """

    available: bool
    reason: str = ""
    lhs: float | None = None
    rhs_core: float | None = None
    difference: float | None = None
    epsilon: float | None = None
    a1_dim: int | None = None
    a2_dim: int | None = None
    holds: bool | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def converse_diagnostic(rho: LabeledState, report: ProtocolReport, split=None,
                        exact_eps: float = 1e-9, slack: float = 1e-6) -> ConverseDiagnostic:
    m = isqrt(report.size)
    if m * m != report.size:
        return ConverseDiagnostic(False, f"M = {report.size} is not a perfect square")
    if split is not None and tuple(split) != (m, m):
        raise ValueError(f"split {tuple(split)} does not match sqrt(M) = {m}")
    aa, bn, en = report.roles
    a, b, e = report.input_roles
    lhs = report.copies * cqmi(rho, a, b, e)
    rhs = cqmi(report.omega, aa, bn, en) + 2 * log2(m)
    holds = lhs <= rhs + slack if report.epsilon <= exact_eps else None
    return ConverseDiagnostic(True, "", lhs, rhs, lhs - rhs, report.epsilon, m, m, holds)


def extension_residual(rho: LabeledState, p: DeconstructionProtocol,
                       labels=("A1'", "A2'")) -> float:
    """Max entry deviation of ``Tr_A2' C(rho^n ⊗ theta ⊗ tau)C^dagger`` from ``omega ⊗ tau_A1'``."""
    c, tau = controlled_ensemble_extension(p.ensemble, labels)
    state = _input_state(rho, p)
    if state.dim * tau.dim > MAX_STATE_DIM * 4:
        raise CapacityError("extended state too large")
    acting = p.acting_labels()
    f_act = state.factorization.subset(acting)
    omega = apply_channel(randomizing_channel(p.ensemble, f_act), state, acting)
    big = apply_unitary(c, tensor(state, tau), acting + tuple(labels))
    lhs = big.reduce(big.factorization.complement(labels[1:]))
    rhs = tensor(omega, tau.reduce(labels[:1])).permute(lhs.labels)
    return float(np.max(np.abs(lhs.matrix - rhs.matrix)))

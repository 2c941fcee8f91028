"""Uhlmann fidelity and the fidelity-of-recovery optimizer.

The optimizer maximizes ``J -> F(rho_ABE, (R_J ⊗ id_B)(rho_BE))`` over Choi
matrices ``J`` of channels ``E -> AE``. The map ``J -> R_J(rho_BE)`` is linear
and the fidelity is concave in its second argument, so projected gradient
ascent over the CPTP set has no spurious local maxima.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import QuantumChannel, apply_channel, petz_recovery
from .entropy import cqmi
from .linalg import SUPPORT_CUTOFF, CapacityError, DimensionError, as_labels, matrix_func
from .states import InvalidStateError, LabeledState, tensor

MAX_FOR_DIM = 64


def _as_matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, LabeledState) else np.asarray(x)


def _aligned(xi, chi):
    """Bare matrices of ``xi`` and ``chi``, with ``chi``'s factors put in ``xi``'s order."""
    if isinstance(xi, LabeledState) and isinstance(chi, LabeledState):
        if xi.labels != chi.labels:
            if sorted(xi.labels) != sorted(chi.labels):
                raise DimensionError(f"states live on {xi.labels} and {chi.labels}")
            chi = chi.permute(xi.labels)
        if xi.dims != chi.dims:
            raise DimensionError(f"dims {xi.dims} and {chi.dims} differ")
    a, b = _as_matrix(xi), _as_matrix(chi)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch {a.shape} vs {b.shape}")
    return a, b


def _sqrt_clipped(x: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh((x + x.conj().T) / 2)
    w = np.where(w > SUPPORT_CUTOFF, w, 0.0)
    return (u * np.sqrt(w)) @ u.conj().T


def _fidelity_from_roots(sq_xi: np.ndarray, sq_chi: np.ndarray) -> float:
    # Tr sqrt(sqrt(xi) chi sqrt(xi)) is the trace norm of sqrt(xi) sqrt(chi)
    return float(np.linalg.svd(sq_xi @ sq_chi, compute_uv=False).sum() ** 2)


def uhlmann_fidelity(xi, chi) -> float:
    """``F(xi, chi) = [Tr sqrt(sqrt(chi) xi sqrt(chi))]^2``."""
    a, b = _aligned(xi, chi)
    return _fidelity_from_roots(matrix_func(a, "sqrt"), matrix_func(b, "sqrt"))


def fidelity_gradient(xi, chi, reg: float = 1e-12) -> np.ndarray:
    """Hermitian ``G`` with ``dF = Tr[G dchi]`` for ``F = F(xi, chi)``.

    ``G = sqrt(F) xi^{1/2} (xi^{1/2} chi xi^{1/2})^{-1/2} xi^{1/2}``, with
    ``reg * I`` added to ``chi`` so the inverse root stays bounded.
    """
    a, b = _aligned(xi, chi)
    return _gradient(matrix_func(a, "sqrt"), b, reg)[0]


def _gradient(sq_xi: np.ndarray, chi: np.ndarray, reg: float):
    chi = chi + reg * np.eye(chi.shape[0])
    m = sq_xi @ chi @ sq_xi
    w, u = np.linalg.eigh((m + m.conj().T) / 2)
    on = w > SUPPORT_CUTOFF
    root_tr = np.sqrt(w[on]).sum()
    inv = (u[:, on] / np.sqrt(w[on])) @ u[:, on].conj().T
    g = root_tr * sq_xi @ inv @ sq_xi
    return (g + g.conj().T) / 2, root_tr ** 2


@dataclass
class OptimizerConfig:
    """Knobs of the fidelity-of-recovery ascent.

    ``projection`` selects how points are mapped back onto the CPTP set:
    ``"newton"`` solves the dual of the projection exactly, ``"dykstra"``
    alternates PSD and trace-preserving projections.
    """

    tol_obj: float = 1e-10
    max_iter: int = 5000
    seed: int | None = None
    projection: str = "newton"
    dykstra_max_iter: int = 200
    dykstra_tol: float = 1e-11
    newton_max_iter: int = 50
    newton_tol: float = 1e-13
    armijo: float = 1e-4
    initial_step: float = 1.0
    min_step: float = 1e-10
    bb_bounds: tuple = (1e-6, 1e6)
    reg: float = 1e-12


@dataclass
class FoREstimate:
    """Certified lower bound on the fidelity of recovery.

    ``value`` is the fidelity reached by ``channel``; ``petz_value`` is the
    starting point of the ascent.
    """

    value: float
    channel: QuantumChannel
    iterations: int
    converged: bool
    gradient_norm_final: float
    petz_value: float
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"value": self.value, "petz_value": self.petz_value,
                "iterations": self.iterations, "converged": self.converged,
                "gradient_norm_final": self.gradient_norm_final}


def _hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal basis of ``n x n`` Hermitian matrices, shape ``(n*n, n, n)``."""
    out = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1
        out.append(e)
    r = 1 / np.sqrt(2)
    for i in range(n):
        for k in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, k] = e[k, i] = r
            out.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, k], e[k, i] = -1j * r, 1j * r
            out.append(e)
    return np.array(out)


class _RecoveryProblem:
    """Objective, gradient and CPTP projection in Choi coordinates."""

    def __init__(self, rho: LabeledState, a, b, e):
        self.da, self.db, self.de = (rho.dim_of(p) for p in (a, b, e))
        self.d_out = self.da * self.de
        self.d_in = self.de
        xi = rho.reduce(a + b + e).permute(a + e + b).matrix
        self.sq_xi = matrix_func(xi, "sqrt")
        rho_eb = rho.reduce(b + e).permute(e + b).matrix
        self.r4 = rho_eb.reshape(self.de, self.db, self.de, self.db)
        self.basis = _hermitian_basis(self.d_in)
        self.dual = np.zeros((self.d_in, self.d_in), dtype=complex)

    def output(self, j: np.ndarray) -> np.ndarray:
        j4 = j.reshape(self.d_out, self.d_in, self.d_out, self.d_in)
        chi = np.einsum("oipj,ibjc->obpc", j4, self.r4, optimize=True)
        n = self.d_out * self.db
        return chi.reshape(n, n)

    def objective(self, j: np.ndarray):
        chi = self.output(j)
        return _fidelity_from_roots(self.sq_xi, _sqrt_clipped(chi)), chi

    def ascent_direction(self, chi: np.ndarray, reg: float) -> np.ndarray:
        """Gradient of the objective with respect to ``J``."""
        g, _ = _gradient(self.sq_xi, chi, reg)
        g4 = g.reshape(self.d_out, self.db, self.d_out, self.db)
        gamma = np.einsum("pcob,ibjc->pjoi", g4, self.r4, optimize=True)
        n = self.d_out * self.d_in
        gamma = gamma.reshape(n, n)
        return (gamma + gamma.conj().T) / 2

    def partial_out(self, j: np.ndarray) -> np.ndarray:
        j4 = j.reshape(self.d_out, self.d_in, self.d_out, self.d_in)
        return np.einsum("aiaj->ij", j4)

    def tp_defect(self, j: np.ndarray) -> np.ndarray:
        return self.partial_out(j) - np.eye(self.d_in)

    def project_tp(self, j: np.ndarray) -> np.ndarray:
        return j - np.kron(np.eye(self.d_out), self.tp_defect(j) / self.d_out)

    @staticmethod
    def project_psd(j: np.ndarray) -> np.ndarray:
        w, u = np.linalg.eigh((j + j.conj().T) / 2)
        return (u * np.clip(w, 0.0, None)) @ u.conj().T

    def project(self, j: np.ndarray, cfg: OptimizerConfig) -> np.ndarray:
        if cfg.projection == "dykstra":
            return self.project_dykstra(j, cfg)
        if cfg.projection == "newton":
            return self.project_newton(j, cfg)
        raise ValueError(f"unknown projection {cfg.projection!r}")

    def project_dykstra(self, j: np.ndarray, cfg: OptimizerConfig) -> np.ndarray:
        """Dykstra's alternating projections onto PSD ∩ trace-preserving."""
        x = j
        p = np.zeros_like(j)
        q = np.zeros_like(j)
        for _ in range(cfg.dykstra_max_iter):
            y = self.project_psd(x + p)
            p = x + p - y
            x = self.project_tp(y + q)
            q = y + q - x
            if np.max(np.abs(self.tp_defect(y))) <= cfg.dykstra_tol:
                break
        return x

    def _psd_part(self, y: np.ndarray, h: np.ndarray):
        z = y + np.kron(np.eye(self.d_out), h)
        w, u = np.linalg.eigh(z)
        return (u * np.clip(w, 0.0, None)) @ u.conj().T, w, u

    def project_newton(self, j: np.ndarray, cfg: OptimizerConfig) -> np.ndarray:
        """Euclidean projection onto the CPTP Choi matrices.

        The projection of ``Y`` is ``(Y + I_out ⊗ H)_+`` for the Hermitian
        ``H`` solving ``Tr_out (Y + I_out ⊗ H)_+ = I``. That equation is
        solved by damped semismooth Newton, first warm-started from the last
        solution and then from ``H = 0``. A warm start can land where the
        positive part vanishes and the Jacobian is zero, hence the second
        try. Falls back to Dykstra if both stall.
        """
        y = (j + j.conj().T) / 2
        for h0 in (self.dual, np.zeros_like(self.dual)):
            x, h, ok = self._newton_solve(y, h0, cfg)
            if ok:
                self.dual = h
                return x
        self.dual = np.zeros_like(self.dual)
        return self.project_dykstra(j, cfg)

    def _newton_solve(self, y: np.ndarray, h: np.ndarray, cfg: OptimizerConfig):
        basis = self.basis
        x, w, u = self._psd_part(y, h)
        res = self.tp_defect(x)
        norm = np.linalg.norm(res)
        for _ in range(cfg.newton_max_iter):
            if np.max(np.abs(res)) <= cfg.newton_tol:
                return x, h, True
            # derivative of the PSD part: Loewner divided differences
            wp = np.clip(w, 0.0, None)
            dw = w[:, None] - w[None, :]
            same = np.abs(dw) <= 1e-14
            omega = np.where(same, (w[:, None] > 0).astype(float),
                             (wp[:, None] - wp[None, :]) / np.where(same, 1.0, dw))
            u3 = u.reshape(self.d_out, self.d_in, -1)
            m = np.einsum("oia,kij,ojb->kab", u3.conj(), basis, u3, optimize=True)
            t = np.einsum("oia,kab,ojb->kij", u3, omega * m, u3.conj(), optimize=True)
            jac = np.real(np.einsum("lij,kij->lk", basis.conj(), t))
            rv = np.real(np.einsum("lij,ij->l", basis.conj(), res))
            step = np.linalg.lstsq(jac, -rv, rcond=None)[0]
            dh = np.einsum("k,kij->ij", step, basis)
            lam = 1.0
            while True:
                h_try = h + lam * dh
                x_try, w_try, u_try = self._psd_part(y, h_try)
                res_try = self.tp_defect(x_try)
                norm_try = np.linalg.norm(res_try)
                if norm_try <= (1 - 1e-4 * lam) * norm or lam < 1e-8:
                    break
                lam /= 2
            if norm_try >= norm:
                break
            h, x, w, u, res, norm = h_try, x_try, w_try, u_try, res_try, norm_try
        return x, h, bool(np.max(np.abs(res)) <= 1e3 * cfg.newton_tol)

    def polish(self, j: np.ndarray) -> np.ndarray:
        """Exactly CPTP Choi matrix near ``j``: clip to PSD, then rescale the input."""
        j = self.project_psd(j)
        s = matrix_func(self.partial_out(j), "inv_sqrt")
        left = np.kron(np.eye(self.d_out), s)
        return left @ j @ left


def _roles(rho: LabeledState, roles):
    a, b, e = (as_labels(r) for r in roles)
    seen = a + b + e
    if len(set(seen)) != len(seen):
        raise ValueError(f"roles overlap: {roles}")
    for label in seen:
        rho.factorization.index(label)
    return a, b, e


def fidelity_of_recovery(rho: LabeledState, roles=("A", "B", "E"),
                         cfg: OptimizerConfig | None = None,
                         max_dim: int = MAX_FOR_DIM) -> FoREstimate:
    """Estimate ``sup_R F(rho_ABE, R_{E->AE}(rho_BE))`` over recovery channels.

    ``roles`` names the label groups ``(A, B, E)``; factors outside them are
    traced out first. Starting from the Petz map, each iteration projects a
    Barzilai-Borwein gradient step onto the CPTP set and then backtracks
    (halving from 1, Armijo test) along the segment towards that point.
    Every iterate is a channel and the objective never decreases. The
    ascent stops once a step gains less than ``cfg.tol_obj``. Using up all
    ``cfg.max_iter`` iterations, including stopping on the last one, is
    reported through ``converged=False``.
    """
    cfg = cfg or OptimizerConfig()
    a, b, e = _roles(rho, roles)
    total = rho.dim_of(a + b + e)
    if total > max_dim:
        raise CapacityError(f"FoR optimization limited to total dimension {max_dim}, got {total}")
    prob = _RecoveryProblem(rho, a, b, e)

    j = prob.polish(petz_recovery(rho.reduce(a + e), from_labels=e, recover=a).choi())
    f, chi = prob.objective(j)
    petz_value = f
    history = [f]
    converged = False
    iterations = 0
    grad = prob.ascent_direction(chi, cfg.reg)
    alpha = cfg.initial_step
    lo, hi = cfg.bb_bounds
    for it in range(cfg.max_iter):
        if f >= 1 - 1e-15:
            converged = True
            break
        iterations = it + 1
        # polishing keeps every iterate exactly CPTP even when the projection is inexact
        direction = prob.polish(prob.project(j + alpha * grad, cfg)) - j
        slope = np.real(np.vdot(grad, direction))
        lam = 1.0
        accepted = False
        while lam >= cfg.min_step:
            j_try = j + lam * direction
            f_try, chi_try = prob.objective(j_try)
            if f_try >= f + cfg.armijo * lam * slope and f_try >= f:
                accepted = True
                break
            lam /= 2
        if not accepted:
            # no ascent left at working precision
            converged = True
            break
        grad_try = prob.ascent_direction(chi_try, cfg.reg)
        s = j_try - j
        curv = -np.real(np.vdot(s, grad_try - grad))
        alpha = float(np.clip(np.real(np.vdot(s, s)) / curv, lo, hi)) if curv > 0 else hi
        gain = f_try - f
        j, f, chi, grad = j_try, f_try, chi_try, grad_try
        history.append(f)
        if gain < cfg.tol_obj:
            converged = True
            break

    if iterations >= cfg.max_iter:
        # the stopping test was never confirmed with budget to spare
        converged = False
    grad_norm = float(np.linalg.norm(prob.project(j + grad, cfg) - j))
    rec_in = rho.factorization.subset(e)
    rec_out = rho.factorization.subset(a) + rec_in
    channel = QuantumChannel.from_choi(prob.polish(j), rec_in, rec_out)
    value = recovery_fidelity(rho, channel, (a, b, e))
    return FoREstimate(value, channel, iterations, converged, grad_norm, petz_value, history)


def recovery_fidelity(rho: LabeledState, channel: QuantumChannel, roles=("A", "B", "E")) -> float:
    """``F(rho_ABE, (R ⊗ id_B)(rho_BE))`` for a given recovery channel ``E -> AE``."""
    a, b, e = _roles(rho, roles)
    target = rho.reduce(a + b + e)
    recovered = apply_channel(channel, rho.reduce(b + e), on=e)
    return uhlmann_fidelity(target, recovered)


def petz_fidelity(rho: LabeledState, roles=("A", "B", "E")) -> float:
    a, b, e = _roles(rho, roles)
    return recovery_fidelity(rho, petz_recovery(rho.reduce(a + e), e, a), (a, b, e))


def fawzi_renner_residual(rho: LabeledState, roles=("A", "B", "E"),
                          cfg: OptimizerConfig | None = None) -> float:
    """``I(A;B|E) + log2 F(A;B|E)``; never below zero for the true FoR."""
    a, b, e = _roles(rho, roles)
    est = fidelity_of_recovery(rho, (a, b, e), cfg)
    return cqmi(rho, a, b, e) + float(np.log2(est.value))


def for_self_duality_residual(rho: LabeledState, roles=("A", "B", "E", "R"),
                              cfg: OptimizerConfig | None = None) -> float:
    """``|F(A;B|E) - F(A;B|R)|`` for a pure state on ``ABER``."""
    if not rho.is_pure(1e-9):
        raise InvalidStateError("input is not a pure state")
    a, b, e, r = (as_labels(x) for x in roles)
    if sorted(a + b + e + r) != sorted(rho.labels):
        raise DimensionError("roles must partition the factors of the pure state")
    f_e = fidelity_of_recovery(rho, (a, b, e), cfg).value
    f_r = fidelity_of_recovery(rho, (a, b, r), cfg).value
    return abs(f_e - f_r)


def for_multiplicativity_residual(rho: LabeledState, sigma: LabeledState,
                                  roles_rho=("A", "B", "E"), roles_sigma=("A", "B", "E"),
                                  cfg: OptimizerConfig | None = None) -> float:
    """``|F(A A';B B'|E E')_{rho⊗sigma} - F(A;B|E)_rho F(A';B'|E')_sigma|``."""
    ra = [as_labels(x) for x in roles_rho]
    sa = [as_labels(x) for x in roles_sigma]
    clash = set(rho.labels) & set(sigma.labels)
    if clash:
        rename = {l: f"{l}~" for l in sigma.labels}
        sigma = sigma.relabel(rename)
        sa = [tuple(rename[l] for l in part) for part in sa]
    joint = tensor(rho.reduce(sum(ra, ())), sigma.reduce(sum(sa, ())))
    if joint.dim > MAX_FOR_DIM:
        raise CapacityError(f"tensor instance of dimension {joint.dim} exceeds {MAX_FOR_DIM}")
    f_rho = fidelity_of_recovery(rho, ra, cfg).value
    f_sigma = fidelity_of_recovery(sigma, sa, cfg).value
    joint_roles = tuple(x + y for x, y in zip(ra, sa))
    f_joint = fidelity_of_recovery(joint, joint_roles, cfg).value
    return abs(f_joint - f_rho * f_sigma)

"""
The tight case: twirling a maximally entangled pair
===================================================

For Phi_AB (x) pi_E, conditional mutual information is 2 bits per copy.
A Heisenberg-Weyl twirl on A uses d^2 = 4 unitaries, i.e. rate 2, and
leaves A decoupled from B with E untouched. The converse bound
n I(A;B|E) <= I_omega + 2 log2 sqrt(M) holds with equality.
"""

from qdecon import cqmi, maximally_entangled, maximally_mixed, tensor
from qdecon.deconstruction import evaluate_protocol, full_twirl_protocol

phi = maximally_entangled(2, labels=("A", "B"))
rho = tensor(phi, maximally_mixed(2, "E"))
print("I(A;B|E) =", cqmi(rho, "A", "B", "E"))

p = full_twirl_protocol(rho)
report = evaluate_protocol(rho, p)
print("unitaries", report.size, "rate", report.rate)
print("disturbance fidelity", report.disturbance_fidelity)
print("recoverability", report.recoverability_fidelity)
print("epsilon", report.epsilon)

c = report.converse
print("converse: lhs", c.lhs, "rhs", c.rhs_core, "holds", c.holds)

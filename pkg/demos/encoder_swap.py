"""
Protocols from an encoding unitary
==================================

A deconstruction protocol can be written as an encoder V on A (x) E
followed by a full twirl of the subsystem to be erased. With V = I this
is the plain twirl on A: B and E keep their joint state, and A is left
maximally mixed. With V = SWAP the twirl instead erases what E held, and
A's entanglement with B moves into E, so the BE marginal is disturbed.
"""

import numpy as np

from qdecon import maximally_entangled, maximally_mixed, tensor
from qdecon.deconstruction import encoder_protocol, evaluate_protocol

rho = tensor(maximally_entangled(2, ("A", "B")), maximally_mixed(2, "E"))

swap = np.zeros((4, 4))
for i in range(2):
    for j in range(2):
        swap[2 * j + i, 2 * i + j] = 1.0

for name, v in [("identity", np.eye(4)), ("swap", swap)]:
    p = encoder_protocol(rho, v, erase=("A",))
    report = evaluate_protocol(rho, p, mode="eq8")
    print(f"{name:>8}: rate {report.rate}, disturbance {report.disturbance_fidelity:.6f}, "
          f"erasure {report.erasure_fidelity:.6f}, epsilon {report.epsilon:.2e}")

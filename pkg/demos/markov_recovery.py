"""
Markov states: zero conditional information and exact Petz recovery
==================================================================

A quantum Markov chain A - E - B is a direct sum over blocks of E, each
block factoring into a piece correlated with A and a piece correlated with
B. Its conditional mutual information vanishes, and the Petz map rebuilds
the full state from the BE marginal alone.
"""

import numpy as np

from qdecon import cqmi, petz_fidelity, random_markov_state, random_state
from qdecon.deconstruction import evaluate_protocol, markov_protocol

# Two E blocks; the first splits as (1, 2), the second as (2, 1).
rho = random_markov_state(2, 2, [(1, 2), (2, 1)], seed=7)
print("labels", rho.labels, "dims", rho.dims)
print("I(A;B|E) =", cqmi(rho, "A", "B", "E"))
print("Petz fidelity =", petz_fidelity(rho))

# A generic state of the same shape is far from Markov.
sigma = random_state(rho.dims, labels=rho.labels, seed=7)
print("generic: I(A;B|E) =", cqmi(sigma, "A", "B", "E"),
      " Petz fidelity =", petz_fidelity(sigma))

# The trivial (identity) protocol already deconstructs a Markov state at rate 0.
report = evaluate_protocol(rho, markov_protocol(rho))
print("rate", report.rate, "epsilon", report.epsilon)
assert np.isclose(report.epsilon, 0.0, atol=1e-9)

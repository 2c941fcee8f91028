"""Dense numerics for conditional mutual information, recovery and state deconstruction."""

__version__ = "0.1.0"

from .linalg import (
    CapacityError,
    DimensionError,
    Factorization,
    embed_operator,
    matrix_func,
    partial_trace,
    permute_subsystems,
    tensor_product,
)
from .states import (
    InvalidStateError,
    LabeledState,
    ghz,
    load_state,
    markov_state,
    maximally_entangled,
    maximally_mixed,
    n_copies,
    pure_state,
    purify,
    random_markov_state,
    random_state,
    save_state,
    tensor,
    validate_density,
)
from .entropy import (
    chain_rule_residual,
    cqmi,
    duality_residual,
    entropy_report,
    qmi,
    von_neumann_entropy,
)
from .channels import (
    QuantumChannel,
    UnitaryEnsemble,
    apply_channel,
    apply_unitary,
    controlled_ensemble_extension,
    heisenberg_weyl_ensemble,
    petz_recovery,
    random_channel,
    random_ensemble,
    random_unitary,
    randomizing_channel,
    twirl_subsystem,
)
from .recovery import (
    FoREstimate,
    OptimizerConfig,
    fawzi_renner_residual,
    fidelity_gradient,
    fidelity_of_recovery,
    for_multiplicativity_residual,
    for_self_duality_residual,
    petz_fidelity,
    recovery_fidelity,
    uhlmann_fidelity,
)
from .deconstruction import (
    DeconstructionProtocol,
    ProtocolReport,
    converse_diagnostic,
    encoder_protocol,
    evaluate_protocol,
    full_twirl_protocol,
    markov_protocol,
)

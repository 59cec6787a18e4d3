"""Closed-loop subspace pursuit: rate-reduction games over linear encoders/decoders.

Core pieces: closed-form coding-rate objectives with analytic gradients,
synthetic union-of-subspaces data, sequential-game utilities with exact
constraint-set projections, stochastic projected GDMax training, and
verifiers for the equilibrium properties of the trained pairs.
"""

from .errors import (
    AssumptionViolated,
    Diverged,
    InvalidConfig,
    InvalidInput,
    ParseError,
    PartitionMismatch,
    ProjectionDidNotConverge,
    PursuitError,
    RankDeficient,
    ShapeMismatch,
)
from .ratereduction import (
    ClassPartition,
    classwise_upper_bound,
    coding_rate,
    grad_coding_rate,
    grad_rate_reduction_classwise,
    grad_rate_reduction_pair,
    rate_reduction_classwise,
    rate_reduction_pair,
)
from .data import GenerationConfig, LabeledDataset, generate, load_dataset, save_dataset
from .games import (
    MSP,
    SSP,
    GameSpec,
    compatibility_gap,
    decoder_gradient,
    decoder_utility,
    encoder_gradient,
    encoder_utility,
    expressiveness,
    load_linear_map,
    msp_constraint_violation,
    oracle_msp_encoder,
    project_encoder_msp,
    project_encoder_ssp,
    pseudoinverse_decoder,
    save_linear_map,
)
from .training import AdamState, TrainConfig, TrainHistory, adam_step, gdmax_train, inner_decoder_solve
from .metrics import (
    EquilibriumReport,
    VerifyThresholds,
    alignment_residuals,
    class_spectra,
    cosine_heatmap,
    dominance_ratios,
    isometry_ratios,
    report_status,
    verify_msp_equilibrium,
    verify_ssp_equilibrium,
)

__version__ = "0.1.0"

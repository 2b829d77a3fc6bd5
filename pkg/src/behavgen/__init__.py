"""Behavioural-suite training and cross-functional generalisation analysis."""

from .errors import (
    DataError,
    DegenerateInputError,
    IncompleteReportError,
    InvalidInputError,
    NumericError,
)
from .losses import (
    AlignmentMap,
    common_ground_alignment,
    dir_loss,
    inv_loss,
    make_batches,
    mft_loss,
    span_inv_loss,
)
from .metrics import (
    binomial_test,
    degenerate_audit,
    g_score,
    iid_metrics,
    pass_rate,
    randomisation_test,
)
from .model import ToyModel, featurize_pair, featurize_text, init_model, make_featurizer
from .partition import build_partition, plan_scenarios, split_suite
from .suite import (
    DeltaKind,
    LabelSpec,
    NeutralPolicy,
    TestSuite,
    TestType,
    delta,
    epsilon,
    evaluate_dir,
    evaluate_inv,
    evaluate_mft,
    parse_suite,
    serialize_suite,
    validate_suite,
)
from .synth import default_experiment_spec, generate_iid, generate_suite
from .training import TrainConfig, dro_update, fish_step, irm_penalty, optimizer_step, run_training

__version__ = "0.1.0"

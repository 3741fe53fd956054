"""provkit: training-data provenance toolkit.

Reconstructs exactly which data a model saw at every training step from a
(dataset, seed, hyperparameters) triple, and runs the downstream analyses
that ordering enables: near-deduplication, verbatim-memorization scanning
with Poisson point-process fits, term-frequency/performance correlation,
and gendered-pronoun interventions with bias scoring.
"""

__version__ = "0.1.0"

from .bias_eval import CrowsPair, WinoBiasItem, crows_score, winobias_score
from .dataloader import (
    CheckpointSchedule,
    DataOrderPlan,
    TrainingStream,
    batch_at,
    build_sample_index,
    checkpoint_schedule,
    context_count,
    epochs_needed,
    tokens_seen,
)
from .dataset import TokenDataset, open_dataset, write_dataset
from .dedup import DedupReport, MinHashSignature, dedup_texts, lsh_cluster, minhash, shingle
from .errors import ContractError, FormatError
from .intervention import (
    PRONOUN_MAP,
    InterventionPlan,
    apply_intervention,
    build_token_pronoun_map,
    swap_pronouns_text,
)
from .memorization import (
    ConstantOracle,
    FileOracle,
    LookupOracle,
    MemorizationScan,
    NgramOracle,
    PoissonFit,
    fit_poisson,
    qq_points,
    scan,
)
from .term_frequency import TermSpec, binned_accuracy, count_up_to, performance_gap

__all__ = [
    "__version__",
    "CheckpointSchedule", "ContractError", "ConstantOracle", "CrowsPair",
    "DataOrderPlan", "DedupReport", "FileOracle", "FormatError",
    "InterventionPlan", "LookupOracle", "MemorizationScan", "MinHashSignature",
    "NgramOracle", "PRONOUN_MAP", "PoissonFit", "TermSpec", "TokenDataset",
    "TrainingStream", "WinoBiasItem", "apply_intervention", "batch_at",
    "binned_accuracy", "build_sample_index", "build_token_pronoun_map",
    "checkpoint_schedule", "context_count", "count_up_to", "crows_score",
    "dedup_texts", "epochs_needed", "fit_poisson", "lsh_cluster", "minhash",
    "open_dataset", "performance_gap", "qq_points", "scan", "shingle",
    "swap_pronouns_text", "tokens_seen", "winobias_score", "write_dataset",
]

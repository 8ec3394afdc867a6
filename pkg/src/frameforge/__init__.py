"""Supervised semantic frame induction toolkit.

Pipeline: metric-learned embedding spaces (contrastive, triplet, softmax,
ArcFace, AdaCos), one-step or two-step verb clustering, and Purity /
B-cubed / similarity-ranking evaluation.
"""

from .clustering import (
    ClusterAssignment,
    Dendrogram,
    cut_dendrogram,
    group_average_cluster,
    one_step_induce,
    two_step_induce,
    xmeans,
)
from .data import (
    Dataset,
    DatasetError,
    InstanceRecord,
    SplitSpec,
    dataset_stats,
    load_dataset,
    make_splits,
    write_dataset,
)
from .harness import BudgetSpec, GridSpec, run_cv, run_fold, subsample_by_lu
from .losses import (
    ClassifierParams,
    LossConfig,
    adacos_loss,
    arcface_loss,
    contrastive_loss,
    softmax_loss,
    triplet_loss,
)
from .metrics import (
    MetricsReport,
    bcubed_scores,
    overlap_split_mean,
    purity_scores,
    ranking_recall,
    score_assignment,
)
from .training import (
    EncoderParams,
    TrainConfig,
    encode,
    load_checkpoint,
    sample_pairs,
    sample_triplets,
    save_checkpoint,
    train,
)
from .vectors import combine, cosine, l2_normalize, sq_euclidean

__version__ = "0.1.0"

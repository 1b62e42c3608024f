"""Generalized scale-adjusted average distance classification for HDLSS data."""
from .blocking import (
    DEFAULT_GRID,
    Dendrogram,
    PercentileSelection,
    average_linkage,
    correlation_dissimilarity,
    cut_at_percentile,
    select_percentile_loocv,
)
from .classifiers import (
    Decision,
    TrainedModel,
    classify,
    discriminant,
    discriminants,
    fit,
    misclassification_rate,
    predict,
)
from .dataset import DataError, Dataset, load_csv, split_train_test, write_csv
from .dissim import (
    Blocking,
    block_dissimilarity,
    cross_mean_dissimilarity,
    within_class_deviation,
)
from .energy import SeparationReport, empirical_energy, separation
from .gamma import GammaSpec, eval_gamma, is_bounded
from .simgen import SimConfig, gen_example1, gen_example2, gen_example3

__version__ = "0.1.0"

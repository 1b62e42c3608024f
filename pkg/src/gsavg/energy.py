"""Energy-distance diagnostics for a blocking.

Per block, the U-statistic estimate of ``E[2 g(X, Y) - g(X, X') - g(Y, Y')]``
with ``g = gamma(|.|^2 / D_b)``; their mean measures how far apart the two
classes are as seen by the gSAVG dissimilarity. The population value is zero
exactly when every block has the same distribution in both classes (for an
admissible gamma), so small or negative estimates flag weak separation.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dataset import Dataset
from .dissim import Blocking
from .gamma import GammaSpec, apply_gamma, parse_gamma

__all__ = ["SeparationReport", "empirical_energy", "separation"]


@dataclass(frozen=True)
class SeparationReport:
    per_block: tuple[tuple[int, float], ...]
    psi_hat: float
    n1: int
    n2: int
    gamma: str = ""

    def to_json(self) -> dict:
        d = asdict(self)
        # block ids are 1-based on disk
        d["per_block"] = [[b + 1, e] for b, e in self.per_block]
        return d


def empirical_energy(xs, ys, gamma: GammaSpec | str, block_size: int | None = None) -> float:
    """Energy-distance estimate between two samples of one block.

    ``xs`` and ``ys`` hold the block's coordinates, one row per observation.
    ``block_size`` defaults to the number of columns.
    """
    gamma = parse_gamma(gamma)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    # a 1-d input is one coordinate observed on several samples
    xs = xs.reshape(-1, 1) if xs.ndim == 1 else xs
    ys = ys.reshape(-1, 1) if ys.ndim == 1 else ys
    if xs.shape[0] < 2 or ys.shape[0] < 2:
        raise ValueError(f"need at least 2 samples per class, got {xs.shape[0]} and {ys.shape[0]}")
    if xs.shape[1] != ys.shape[1]:
        raise ValueError(f"block dimension mismatch: {xs.shape[1]} vs {ys.shape[1]}")
    scale = float(block_size if block_size is not None else xs.shape[1])
    if scale <= 0:
        raise ValueError(f"block_size must be positive, got {block_size}")

    def g(a, b):
        diff = a[:, None, :] - b[None, :, :]
        return apply_gamma(gamma, (diff * diff).sum(axis=2) / scale)

    cross = g(xs, ys).mean()
    iu_x = np.triu_indices(xs.shape[0], 1)
    iu_y = np.triu_indices(ys.shape[0], 1)
    within_x = g(xs, xs)[iu_x].mean()
    within_y = g(ys, ys)[iu_y].mean()
    return float(2 * cross - within_x - within_y)


def separation(train: Dataset, blocking: Blocking, gamma: GammaSpec | str) -> SeparationReport:
    """Per-block energy estimates and their mean."""
    gamma = parse_gamma(gamma)
    train.require_both_classes(2)
    if blocking.dim != train.dim:
        raise ValueError(f"blocking covers {blocking.dim} coordinates, data has {train.dim}")
    x1, x2 = train.class_rows(1), train.class_rows(2)
    per_block = []
    for k, b in enumerate(blocking.blocks):
        cols = list(b)
        per_block.append((k, empirical_energy(x1[:, cols], x2[:, cols], gamma, len(cols))))
    psi = float(np.mean([e for _, e in per_block]))
    n1, n2 = train.class_counts()
    return SeparationReport(tuple(per_block), psi, n1, n2, gamma.value)

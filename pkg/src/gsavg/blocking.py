"""Estimating blocks from data.

Features are clustered with average-linkage agglomeration on the dissimilarity
``1 - |corr|`` computed over the pooled training sample. Cutting the tree at a
percentile of its merge heights gives a blocking; the percentile is chosen by
leave-one-out misclassification of the gSAVG classifier.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import squareform
from scipy.stats import rankdata

from .dataset import DataError, Dataset
from .dissim import Blocking, pairwise_dissimilarities
from .gamma import GammaSpec, parse_gamma

__all__ = [
    "DEFAULT_GRID",
    "Dendrogram",
    "PercentileSelection",
    "correlation_dissimilarity",
    "average_linkage",
    "cut_at_percentile",
    "cut_height",
    "loocv_errors",
    "select_percentile_loocv",
]

DEFAULT_GRID = tuple(round(0.1 * k, 1) for k in range(11))

# relative slack under which two linkage values count as tied
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Dendrogram:
    """Merge history of an agglomerative clustering of ``dim`` leaves.

    ``merges[k] = (a, b, height, size)`` uses scipy's numbering: leaves are
    ``0..dim-1`` and the cluster formed at step ``k`` gets id ``dim + k``.
    """

    merges: tuple[tuple[int, int, float, int], ...]
    dim: int

    @property
    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges], dtype=np.float64)

    def linkage_matrix(self) -> np.ndarray:
        """``(dim - 1, 4)`` array in ``scipy.cluster.hierarchy`` format."""
        return np.array(self.merges, dtype=np.float64).reshape(-1, 4)

    def labels_after(self, n_merges: int) -> np.ndarray:
        """Cluster label of each leaf once the first ``n_merges`` merges are applied."""
        parent = list(range(self.dim + len(self.merges)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for k, (a, b, _, _) in enumerate(self.merges[:n_merges]):
            parent[find(a)] = self.dim + k
            parent[find(b)] = self.dim + k
        return np.array([find(i) for i in range(self.dim)])

    def to_json(self) -> list[list]:
        # 1-based leaf numbering, internal clusters dim+1.. as in the on-disk blocks
        return [[a + 1, b + 1, h, s] for a, b, h, s in self.merges]


@dataclass(frozen=True)
class PercentileSelection:
    grid: tuple[float, ...]
    errors: tuple[float, ...]
    chosen: float
    chosen_blocking: Blocking
    dendrogram: Dendrogram | None = field(default=None, repr=False)
    blockings: tuple[Blocking, ...] = field(default=(), repr=False)


def _rank_columns(x: np.ndarray) -> np.ndarray:
    return rankdata(x, axis=0)


def correlation_dissimilarity(train: Dataset | np.ndarray, method: str = "pearson") -> np.ndarray:
    """``1 - |rho|`` between every pair of features over the pooled sample.

    ``method="spearman"`` correlates column ranks instead of raw values.
    Pairs involving a constant feature get ``rho = 0`` and a warning.
    """
    x = train.features if isinstance(train, Dataset) else np.asarray(train, dtype=np.float64)
    if x.shape[0] < 3:
        raise DataError(f"correlation needs at least 3 observations, got {x.shape[0]}")
    if method == "spearman":
        x = _rank_columns(x)
    elif method != "pearson":
        raise ValueError(f"unknown correlation method {method!r}")

    xc = x - x.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", xc, xc))
    # relative test: centering leaves rounding residue on constant columns
    scale = np.abs(x).max(axis=0)
    const = norms <= 1e-12 * np.maximum(scale, 1.0) * np.sqrt(x.shape[0])
    if const.any():
        warnings.warn(
            f"{int(const.sum())} constant feature(s) (first: index {int(np.flatnonzero(const)[0])}); "
            "their correlations are set to 0",
            RuntimeWarning,
            stacklevel=2,
        )
    safe = np.where(const, 1.0, norms)
    u = xc / safe
    rho = u.T @ u
    rho[const, :] = 0.0
    rho[:, const] = 0.0
    out = 1.0 - np.clip(np.abs(rho), 0.0, 1.0)
    out = (out + out.T) / 2
    np.fill_diagonal(out, 0.0)
    return out


def average_linkage(dissimilarity) -> Dendrogram:
    """Agglomerative clustering with average (UPGMA) linkage.

    Ties are broken towards the pair whose smallest leaf indices are
    lexicographically smallest; a merged cluster keeps the slot of its
    smaller member, so a slot index is always its cluster's smallest leaf.
    """
    d = np.array(dissimilarity, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"dissimilarity must be square, got shape {d.shape}")
    if np.isnan(d).any() or not np.isfinite(d).all():
        raise ValueError("dissimilarity contains NaN or infinite entries")
    if not np.array_equal(d, d.T):
        raise ValueError("dissimilarity matrix is not symmetric")
    n = d.shape[0]
    if n < 1:
        raise ValueError("empty dissimilarity matrix")

    np.fill_diagonal(d, np.inf)
    size = np.ones(n)
    node = list(range(n))
    merges = []
    last = -np.inf
    for step in range(n - 1):
        flat = d.ravel()
        m = flat.min()
        # first entry in row-major order within the tie band: row i < column j
        k = int(np.argmax(flat <= m + _TIE_RTOL * max(1.0, abs(m))))
        i, j = divmod(k, n)
        h = max(float(d[i, j]), last)
        last = h
        ni, nj = size[i], size[j]
        a, b = sorted((node[i], node[j]))
        merges.append((a, b, h, int(ni + nj)))

        row = (ni * d[i] + nj * d[j]) / (ni + nj)
        d[i, :] = row
        d[:, i] = row
        d[i, i] = np.inf
        d[j, :] = np.inf
        d[:, j] = np.inf
        size[i] = ni + nj
        node[i] = n + step
    return Dendrogram(tuple(merges), n)


def cut_height(dendro: Dendrogram, p: float) -> float:
    """Lower-interpolated ``p``-quantile of the merge heights."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"percentile must lie in [0, 1], got {p}")
    h = dendro.heights
    if h.size == 0:
        return 0.0
    return float(np.quantile(h, p, method="lower"))


def cut_at_percentile(dendro: Dendrogram, p: float) -> Blocking:
    """Blocks present once every merge at or below the ``p``-th height percentile is done.

    ``p = 0`` always gives singletons, even when some merges happen at height 0.
    """
    hp = cut_height(dendro, p)
    if p == 0.0:
        return Blocking.singletons(dendro.dim)
    # heights are non-decreasing, so the merges to apply form a prefix
    n_merges = int(np.searchsorted(dendro.heights, hp, side="right"))
    return Blocking.from_labels(dendro.labels_after(n_merges))


def _loo_errors_from_matrix(h: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-point leave-one-out misclassification from a full dissimilarity matrix.

    Dropping a point from its class changes that class's cross mean and
    within-class deviation; both follow from row and total sums of ``h``.
    """
    wrong = np.zeros(labels.size, dtype=bool)
    stats = {}
    for c in (1, 2):
        idx = np.flatnonzero(labels == c)
        sub = h[np.ix_(idx, idx)]
        stats[c] = (idx, sub.sum(axis=1), sub.sum())
    for c, other in ((1, 2), (2, 1)):
        idx, rowsum, total = stats[c]
        oidx, _, ototal = stats[other]
        n_c, n_o = idx.size, oidx.size
        own_cross = rowsum / (n_c - 1)
        # remaining ordered pairs after dropping the point: total - 2 * its row
        own_dev = (total - 2 * rowsum) / ((n_c - 1) * (n_c - 2))
        other_cross = h[np.ix_(idx, oidx)].mean(axis=1)
        other_dev = ototal / (n_o * (n_o - 1))
        own_term = own_cross - own_dev / 2
        other_term = other_cross - other_dev / 2
        score = other_term - own_term if c == 1 else own_term - other_term
        pred = np.where(score > 0, 1, 2)
        wrong[idx] = pred != c
    return wrong


def loocv_errors(train: Dataset, blocking: Blocking, gamma: GammaSpec | str) -> float:
    """Leave-one-out misclassification rate of gSAVG with a fixed blocking."""
    gamma = parse_gamma(gamma)
    train.require_both_classes(3)
    h = squareform(pairwise_dissimilarities(train.features, blocking, gamma), checks=False)
    return float(_loo_errors_from_matrix(h, train.labels).mean())


def _warn_large_blocks(blocking: Blocking) -> None:
    limit = -(-blocking.dim // 2)
    biggest = max(blocking.block_sizes)
    if blocking.dim > 2 and biggest > limit:
        warnings.warn(
            f"selected blocking has a block of {biggest} coordinates (> ceil(D/2) = {limit}); "
            "the high-dimensional guarantees assume bounded block sizes",
            UserWarning,
            stacklevel=3,
        )


def select_percentile_loocv(
    train: Dataset,
    gamma: GammaSpec | str = GammaSpec.EXP_SATURATE,
    grid=DEFAULT_GRID,
    method: str = "pearson",
) -> PercentileSelection:
    """Choose the dendrogram cut by leave-one-out error.

    The feature tree is built once on all of ``train``; only the classifier
    is refit without each held-out point. Ties go to the smallest ``p``.
    """
    gamma = parse_gamma(gamma)
    grid = tuple(float(p) for p in grid)
    if not grid:
        raise ValueError("empty percentile grid")
    train.require_both_classes(3)
    dendro = average_linkage(correlation_dissimilarity(train, method))

    errors, blockings, cache = [], [], {}
    for p in grid:
        b = cut_at_percentile(dendro, p)
        if b not in cache:
            cache[b] = loocv_errors(train, b, gamma)
        errors.append(cache[b])
        blockings.append(b)
    best = min(range(len(grid)), key=lambda k: (errors[k], grid[k]))
    chosen = blockings[best]
    _warn_large_blocks(chosen)
    return PercentileSelection(grid, tuple(errors), grid[best], chosen, dendro, tuple(blockings))

"""Block dissimilarity and the averages built on it.

For a partition of the coordinates into blocks, the dissimilarity between two
vectors is the mean over blocks of ``gamma(|u_b - v_b|^2 / D_b)``. Within a
block coordinates are summed in ascending index order and the per-block
values are averaged in block order, so results do not depend on chunking.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .gamma import GammaSpec, apply_gamma, parse_gamma

__all__ = [
    "Blocking",
    "block_distances",
    "dissimilarity_matrix",
    "pairwise_dissimilarities",
    "block_dissimilarity",
    "within_class_deviation",
    "cross_mean_dissimilarity",
    "load_blocking",
]

# elements of the (rows, cols, D) scratch tensor per chunk
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class Blocking:
    """Partition of coordinate indices ``0..dim-1`` into disjoint blocks.

    Blocks are stored sorted, each block's indices ascending and blocks
    ordered by their smallest index, so equal partitions compare equal.
    """

    blocks: tuple[tuple[int, ...], ...]
    dim: int

    def __post_init__(self):
        blocks = [tuple(sorted(int(i) for i in b)) for b in self.blocks]
        if not blocks:
            raise ValueError("a blocking needs at least one block")
        if any(len(b) == 0 for b in blocks):
            raise ValueError("empty block")
        blocks.sort(key=lambda b: b[0])
        flat = [i for b in blocks for i in b]
        if sorted(flat) != list(range(self.dim)):
            seen = set()
            dup = sorted({i for i in flat if i in seen or seen.add(i)})
            missing = sorted(set(range(self.dim)) - set(flat))
            extra = sorted(set(flat) - set(range(self.dim)))
            raise ValueError(
                f"blocks must partition 0..{self.dim - 1}: duplicated={dup[:10]} "
                f"missing={missing[:10]} out_of_range={extra[:10]}"
            )
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def singletons(cls, dim: int) -> "Blocking":
        return cls(tuple((i,) for i in range(dim)), dim)

    @classmethod
    def single(cls, dim: int) -> "Blocking":
        return cls((tuple(range(dim)),), dim)

    @classmethod
    def consecutive(cls, dim: int, size: int) -> "Blocking":
        """Runs of ``size`` neighbouring coordinates; the last run may be shorter."""
        return cls(tuple(tuple(range(s, min(s + size, dim))) for s in range(0, dim, size)), dim)

    @classmethod
    def from_labels(cls, labels) -> "Blocking":
        """Build from a per-coordinate cluster label vector."""
        labels = np.asarray(labels)
        groups: dict = {}
        for i, g in enumerate(labels.tolist()):
            groups.setdefault(g, []).append(i)
        return cls(tuple(tuple(v) for v in groups.values()), len(labels))

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    @property
    def is_singleton(self) -> bool:
        return self.n_blocks == self.dim

    @cached_property
    def _order(self) -> np.ndarray:
        return np.fromiter((i for b in self.blocks for i in b), dtype=np.intp, count=self.dim)

    @cached_property
    def _starts(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.block_sizes)[:-1])).astype(np.intp)

    @cached_property
    def _sizes(self) -> np.ndarray:
        return np.asarray(self.block_sizes, dtype=np.float64)

    def labels(self) -> np.ndarray:
        """Block id of each coordinate."""
        out = np.empty(self.dim, dtype=np.intp)
        for k, b in enumerate(self.blocks):
            out[list(b)] = k
        return out

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps([self.dim, self.blocks]).encode()).hexdigest()[:16]

    def to_json(self) -> list[list[int]]:
        """1-based index lists, the on-disk format."""
        return [[i + 1 for i in b] for b in self.blocks]

    @classmethod
    def from_json(cls, blocks, dim: int | None = None) -> "Blocking":
        if dim is None:
            dim = sum(len(b) for b in blocks)
        for b in blocks:
            for i in b:
                if int(i) < 1:
                    raise ValueError(f"block indices are 1-based, got {i}")
        return cls(tuple(tuple(int(i) - 1 for i in b) for b in blocks), dim)


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"{name} must be a vector or a matrix of row vectors")
    if np.isnan(a).any():
        raise ValueError(f"{name} contains NaN")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains infinite values")
    return a


def _check_dim(a: np.ndarray, blocking: Blocking, name: str) -> None:
    if a.shape[1] != blocking.dim:
        raise ValueError(f"{name} has dimension {a.shape[1]}, blocking covers {blocking.dim}")


def block_distances(a: np.ndarray, b: np.ndarray, blocking: Blocking) -> np.ndarray:
    """Scaled squared block distances, shape ``(len(a), len(b), n_blocks)``.

    Entry ``[i, j, k]`` is ``|a_i[block k] - b_j[block k]|^2 / D_k``. Inputs
    are assumed validated; no chunking is done here.
    """
    diff = a[:, None, :] - b[None, :, :]
    sq = diff * diff
    if blocking.is_singleton:
        return sq
    sq = sq[:, :, blocking._order]
    return np.add.reduceat(sq, blocking._starts, axis=2) / blocking._sizes


def _kernel(a: np.ndarray, b: np.ndarray, blocking: Blocking, gamma: GammaSpec) -> np.ndarray:
    t = block_distances(a, b, blocking)
    return apply_gamma(gamma, t).mean(axis=2)


def dissimilarity_matrix(a, b, blocking: Blocking, gamma: GammaSpec | str) -> np.ndarray:
    """All pairwise block dissimilarities between rows of ``a`` and rows of ``b``."""
    gamma = parse_gamma(gamma)
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    _check_dim(a, blocking, "a")
    _check_dim(b, blocking, "b")
    out = np.empty((a.shape[0], b.shape[0]))
    step = max(1, _CHUNK_ELEMENTS // max(1, b.shape[0] * blocking.dim))
    for s in range(0, a.shape[0], step):
        out[s : s + step] = _kernel(a[s : s + step], b, blocking, gamma)
    return out


def pairwise_dissimilarities(x, blocking: Blocking, gamma: GammaSpec | str) -> np.ndarray:
    """Dissimilarities over unordered pairs ``i < j`` in condensed (row-major) order."""
    gamma = parse_gamma(gamma)
    x = _as_matrix(x, "samples")
    _check_dim(x, blocking, "samples")
    n = x.shape[0]
    parts = [_kernel(x[i : i + 1], x[i + 1 :], blocking, gamma)[0] for i in range(n - 1)]
    return np.concatenate(parts) if parts else np.empty(0)


def block_dissimilarity(u, v, blocking: Blocking, gamma: GammaSpec | str) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1:
        raise ValueError("u and v must be vectors")
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    return float(dissimilarity_matrix(u, v, blocking, gamma)[0, 0])


def within_class_deviation(samples, blocking: Blocking, gamma: GammaSpec | str) -> float:
    """Mean dissimilarity over all distinct pairs of one class's samples."""
    samples = _as_matrix(samples, "samples")
    if samples.shape[0] < 2:
        raise ValueError(f"within-class deviation needs at least 2 samples, got {samples.shape[0]}")
    return float(pairwise_dissimilarities(samples, blocking, gamma).mean())


def cross_mean_dissimilarity(z, samples, blocking: Blocking, gamma: GammaSpec | str) -> float:
    """Average dissimilarity from ``z`` to each of ``samples``."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("z must be a vector")
    if len(samples) == 0:
        raise ValueError("no samples")
    samples = _as_matrix(samples, "samples")
    if samples.shape[1] != z.shape[0]:
        raise ValueError(f"dimension mismatch: z has {z.shape[0]}, samples have {samples.shape[1]}")
    return float(dissimilarity_matrix(z, samples, blocking, gamma)[0].mean())


def load_blocking(path, dim: int | None = None) -> Blocking:
    """Read a JSON list of 1-based index lists, or an object with a ``blocks`` key."""
    with open(path, encoding="utf-8") as fh:
        blocks = json.load(fh)
    if isinstance(blocks, dict):
        blocks = blocks["blocks"]
    return Blocking.from_json(blocks, dim)

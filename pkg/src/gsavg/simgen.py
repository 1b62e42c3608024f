"""Simulated two-class problems with equal means and equal total variance.

Example 1: independent Gaussians; class 1 has variance 1 on the first
``floor(D/2)`` coordinates and 0.5 on the rest, class 2 has variance 0.5 on
the first ``D - floor(D/2)`` and 1 on the rest.

Examples 2 and 3: within every run of four coordinates one pair is made
sign-concordant by multiplying each member by the other's sign (pair 3-4 for
class 1, pair 1-2 for class 2). Base draws are standard normal (Example 2)
or standard Cauchy (Example 3), so all marginals coincide across classes.

Randomness comes from numpy's PCG64. ``SeedSequence(seed)`` is spawned into
one child stream per class (index 0 for class 1, 1 for class 2), so data for
one class never depends on how much the other consumed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .dissim import Blocking

__all__ = [
    "SimConfig",
    "gen_example1",
    "gen_example2",
    "gen_example3",
    "generate",
    "class_streams",
    "sign",
]


@dataclass(frozen=True)
class SimConfig:
    example: int
    n_per_class: int
    dim: int
    seed: int

    def __post_init__(self):
        if self.example not in (1, 2, 3):
            raise ValueError(f"example must be 1, 2 or 3, got {self.example}")
        if self.dim < 4:
            raise ValueError(f"dim must be at least 4, got {self.dim}")
        if self.n_per_class < 2:
            raise ValueError(f"n_per_class must be at least 2, got {self.n_per_class}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")


def class_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    ss = np.random.SeedSequence(seed)
    return tuple(np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(2))


def sign(u: np.ndarray) -> np.ndarray:
    """+1 for u >= 0, -1 otherwise."""
    return np.where(u >= 0, 1.0, -1.0)


def _assemble(x1: np.ndarray, x2: np.ndarray) -> Dataset:
    labels = np.repeat([1, 2], [x1.shape[0], x2.shape[0]])
    return Dataset(np.vstack([x1, x2]), labels)


def pair_blocking(dim: int) -> Blocking:
    """Consecutive pairs; an odd last coordinate stands alone."""
    return Blocking.consecutive(dim, 2)


def gen_example1(cfg: SimConfig) -> tuple[Dataset, Blocking]:
    d, half = cfg.dim, cfg.dim // 2
    sd1 = np.concatenate([np.ones(half), np.full(d - half, np.sqrt(0.5))])
    sd2 = np.concatenate([np.full(d - half, np.sqrt(0.5)), np.ones(half)])
    g1, g2 = class_streams(cfg.seed)
    x1 = g1.standard_normal((cfg.n_per_class, d)) * sd1
    x2 = g2.standard_normal((cfg.n_per_class, d)) * sd2
    return _assemble(x1, x2), pair_blocking(d)


def _couple(base: np.ndarray, offset: int) -> np.ndarray:
    """Sign-couple coordinates ``4k + offset`` and ``4k + offset + 1`` of each full run of four."""
    out = base.copy()
    full = (base.shape[1] // 4) * 4
    a = np.arange(offset, full, 4)
    b = a + 1
    out[:, a] = sign(base[:, b]) * base[:, a]
    out[:, b] = sign(base[:, a]) * base[:, b]
    return out


def _cauchy(g: np.random.Generator, shape) -> np.ndarray:
    # inverse CDF; uniform on [0, 1) so u = 0 maps to -tan(pi/2), finite in floating point
    return np.tan(np.pi * (g.random(shape) - 0.5))


def _sign_coupled(cfg: SimConfig, draw) -> tuple[Dataset, Blocking]:
    g1, g2 = class_streams(cfg.seed)
    shape = (cfg.n_per_class, cfg.dim)
    x1 = _couple(draw(g1, shape), 2)
    x2 = _couple(draw(g2, shape), 0)
    return _assemble(x1, x2), pair_blocking(cfg.dim)


def gen_example2(cfg: SimConfig) -> tuple[Dataset, Blocking]:
    return _sign_coupled(cfg, lambda g, shape: g.standard_normal(shape))


def gen_example3(cfg: SimConfig) -> tuple[Dataset, Blocking]:
    return _sign_coupled(cfg, _cauchy)


_GENERATORS = {1: gen_example1, 2: gen_example2, 3: gen_example3}


def generate(cfg: SimConfig) -> tuple[Dataset, Blocking]:
    return _GENERATORS[cfg.example](cfg)

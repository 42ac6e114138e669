"""Gumbel noise, linear decoders, and the induced softmax (CRF) distributions.

Adding iid Gumbel(0, beta) noise to the linear scores and taking the argmax
samples exactly from the softmax of scores/beta (max-stability), so the
perturbed decoder's output distribution has the closed form computed by
``crf_pmf`` over any materialized support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .spaces import StructureFamily, StructuredOutput, input_bits, space


@dataclass(frozen=True)
class PerturbationConfig:
    """Gumbel scale and seed for reproducible noise streams."""

    beta: float
    rng_seed: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Weights with sparsity metadata (support size, minimum nonzero magnitude)."""

    values: np.ndarray

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum())

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.values))

    @property
    def w_min(self) -> float:
        """Minimum nonzero |w_j|; inf for the zero vector."""
        nz = np.abs(self.values[self.values != 0])
        return float(nz.min()) if nz.size else math.inf


def as_weights(w) -> np.ndarray:
    """Accept a WeightVector or a raw array."""
    return np.asarray(w.values if isinstance(w, WeightVector) else w, dtype=np.float64)


class Provenance(Enum):
    FULL_SPACE = "full_space"
    SAMPLED = "sampled"
    SAMPLED_AUGMENTED = "sampled_augmented"


@dataclass(frozen=True)
class CandidateSet:
    """Ordered, duplicate-free collection of structures with its provenance."""

    outputs: tuple[StructuredOutput, ...]
    provenance: Provenance

    def __post_init__(self):
        keys = {y.components for y in self.outputs}
        if len(keys) != len(self.outputs):
            raise ValueError("candidate set contains duplicate structures")

    def __len__(self) -> int:
        return len(self.outputs)

    def __contains__(self, y: StructuredOutput) -> bool:
        return any(out.components == y.components for out in self.outputs)


_FULL_SET_CACHE: dict[StructureFamily, CandidateSet] = {}


def full_candidate_set(family: StructureFamily) -> CandidateSet:
    """The whole output space as a candidate set, in canonical order."""
    cs = _FULL_SET_CACHE.get(family)
    if cs is None:
        cs = CandidateSet(space(family).outputs, Provenance.FULL_SPACE)
        _FULL_SET_CACHE[family] = cs
    return cs


# ---------------------------------------------------------------------------
# Gumbel sampling


def gumbel_from_uniform(u, beta: float) -> np.ndarray:
    """Inverse-CDF transform: u in (0,1) -> -beta * ln(-ln u)."""
    return -beta * np.log(-np.log(np.asarray(u, dtype=np.float64)))


def sample_gumbel(cfg: PerturbationConfig, count: int) -> np.ndarray:
    """``count`` iid Gumbel(0, beta) draws, deterministic for a fixed seed.

    Sampling is by inverse CDF rather than numpy's built-in gumbel so that the
    uniform stream, and hence the draws, are reproducible across platforms
    within one numpy generation (PCG64).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(cfg.rng_seed)
    return gumbel_from_uniform(rng.random(count), cfg.beta)


# ---------------------------------------------------------------------------
# decoding


def map_decode(family: StructureFamily, x, w) -> StructuredOutput:
    """Highest-scoring structure; ties broken by smallest canonical key."""
    sp = space(family)
    if sp.size == 0:
        raise ValueError("empty output space")
    s = sp.scores(x, as_weights(w))
    return sp.outputs[int(np.argmax(s))]


def perturbed_decode(family: StructureFamily, x, w, gamma,
                     support: CandidateSet | None = None) -> StructuredOutput:
    """Argmax of score + gamma over the support (the full space by default).

    ``gamma`` is indexed by the enumeration order of the support: canonical
    order for the full space, stored order for an explicit candidate set.
    Ties break toward the earliest index (they have probability zero under
    continuous noise).
    """
    sp = space(family)
    gamma = np.asarray(gamma, dtype=np.float64)
    if support is None:
        outputs = sp.outputs
        s = sp.scores(x, as_weights(w))
    else:
        outputs = support.outputs
        idx = np.array([sp.index(y) for y in outputs])
        s = sp.incidence[idx] @ (input_bits(family, x) * as_weights(w))
    if gamma.shape != s.shape:
        raise ValueError(f"gamma has shape {gamma.shape}, expected {s.shape}")
    return outputs[int(np.argmax(s + gamma))]


# ---------------------------------------------------------------------------
# CRF distributions


@dataclass(frozen=True, eq=False)
class CrfDistribution:
    """Normalized pmf of the perturbed decoder over a support at scale beta."""

    support: CandidateSet
    probs: np.ndarray
    log_partition: float
    beta: float

    def __post_init__(self):
        if len(self.probs) != len(self.support):
            raise ValueError("probs and support lengths differ")
        if (self.probs < 0).any() or abs(float(self.probs.sum()) - 1.0) > 1e-12:
            raise ValueError("probs must be a distribution (nonnegative, summing to 1)")

    def prob_of(self, y: StructuredOutput) -> float:
        for i, out in enumerate(self.support.outputs):
            if out.components == y.components:
                return float(self.probs[i])
        raise ValueError(f"{y.components} is not in the support")


def crf_pmf(family: StructureFamily, x, w, support: CandidateSet, beta: float) -> CrfDistribution:
    """Softmax of scores/beta over the support, with a log-domain partition.

    Weights are rescaled by beta before scoring, so the distribution at
    (w, beta) coincides bitwise with the one at (w/beta, 1).
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if len(support) == 0:
        raise ValueError("support must be nonempty")
    sp = space(family)
    w_eff = as_weights(w) / beta
    if support.provenance is Provenance.FULL_SPACE and len(support) == sp.size:
        scores = sp.scores(x, w_eff)
    else:
        idx = np.array([sp.index(y) for y in support.outputs])
        scores = sp.incidence[idx] @ (input_bits(family, x) * w_eff)
    shift = scores.max()
    e = np.exp(scores - shift)
    z = e.sum()
    return CrfDistribution(support, e / z, float(shift + np.log(z)), beta)


def pmf_matrix(sp, bit_matrix: np.ndarray, w, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Column-stochastic (size x m) matrix of full-space pmfs for a batch of
    inputs, plus the per-column log-partitions."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    scores = sp.score_matrix(bit_matrix, as_weights(w) / beta)
    shift = scores.max(axis=0)
    e = np.exp(scores - shift)
    z = e.sum(axis=0)
    return e / z, shift + np.log(z)

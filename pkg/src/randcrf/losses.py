"""Dataset container and the exact, randomized, Monte-Carlo, and Hamming losses.

All probabilistic losses are computed from closed-form CRF probabilities;
Monte-Carlo estimation over fresh Gumbel draws is provided as an independent
check of the same quantity.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from .gumbel_crf import CandidateSet, Provenance, as_weights, gumbel_from_uniform, pmf_matrix
from .spaces import StructureFamily, StructuredInput, StructuredOutput, space


class LossKind(Enum):
    EXACT_CRF = "exact_crf"
    RANDOMIZED_AUGMENTED = "randomized_augmented"
    MONTE_CARLO_ZERO_ONE = "monte_carlo_zero_one"
    HAMMING = "hamming"
    HINGE = "hinge"


LOSS_CSV_HEADER = ("run_id", "method", "kind", "value", "stderr")


@dataclass(frozen=True, eq=False)
class LossReport:
    """A loss value with its per-sample decomposition."""

    value: float
    per_sample: np.ndarray
    kind: LossKind
    stderr: float | None = None

    def csv_row(self, run_id: str, method: str) -> tuple:
        return (run_id, method, self.kind.value, self.value,
                "" if self.stderr is None else self.stderr)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Input bit matrix (m x d) paired with observed structures."""

    family: StructureFamily
    inputs: np.ndarray
    outputs: tuple[StructuredOutput, ...]

    def __post_init__(self):
        m, d = self.inputs.shape
        if m < 1:
            raise ValueError("dataset must contain at least one sample")
        if d != self.family.feature_dim:
            raise ValueError(f"inputs have {d} columns, family expects {self.family.feature_dim}")
        if len(self.outputs) != m:
            raise ValueError("inputs and outputs have different lengths")
        for y in self.outputs:
            if y.family != self.family or not self.family.is_valid(y.components):
                raise ValueError(f"invalid structure {y.components} for {self.family}")

    @property
    def m(self) -> int:
        return len(self.outputs)

    def samples(self) -> Iterator[tuple[StructuredInput, StructuredOutput]]:
        for i, y in enumerate(self.outputs):
            yield StructuredInput(self.inputs[i]), y


def _bit_matrix(S: Dataset) -> np.ndarray:
    return np.asarray(S.inputs, dtype=np.float64)


def _true_indices(S: Dataset) -> np.ndarray:
    sp = space(S.family)
    return np.array([sp.index(y) for y in S.outputs])


def _report(per_sample: np.ndarray, kind: LossKind, stderr: float | None = None) -> LossReport:
    return LossReport(float(per_sample.mean()), per_sample, kind, stderr)


def exact_crf_loss(w, S: Dataset, beta: float) -> LossReport:
    """Mean probability that the perturbed decoder misses the observed output,
    with the decoder running over the full space."""
    sp = space(S.family)
    y_idx = _true_indices(S)
    probs, _ = pmf_matrix(sp, _bit_matrix(S), w, beta)
    return _report(1.0 - probs[y_idx, np.arange(S.m)], LossKind.EXACT_CRF)


def _set_indices(S: Dataset, sets: Sequence[CandidateSet]) -> list[np.ndarray]:
    if len(sets) != S.m:
        raise ValueError(f"expected {S.m} candidate sets, got {len(sets)}")
    sp = space(S.family)
    return [np.array([sp.index(y) for y in cs.outputs]) for cs in sets]


def _all_full_space(S: Dataset, sets: Sequence[CandidateSet]) -> bool:
    r = space(S.family).size
    return all(cs.provenance is Provenance.FULL_SPACE and len(cs) == r for cs in sets)


def randomized_loss(w, S: Dataset, Tbar: Sequence[CandidateSet], beta: float) -> LossReport:
    """Mean probability of missing the observed output when the decoder is
    restricted to the per-sample candidate sets; each set must contain it."""
    if _all_full_space(S, Tbar):
        rep = exact_crf_loss(w, S, beta)
        return LossReport(rep.value, rep.per_sample, LossKind.RANDOMIZED_AUGMENTED)
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    sp = space(S.family)
    y_idx = _true_indices(S)
    X = _bit_matrix(S)
    w_eff = as_weights(w) / beta
    per = np.empty(S.m)
    for i, idx in enumerate(_set_indices(S, Tbar)):
        pos = np.nonzero(idx == y_idx[i])[0]
        if pos.size == 0:
            raise ValueError(f"candidate set {i} does not contain the observed output")
        scores = sp.incidence[idx] @ (X[i] * w_eff)
        e = np.exp(scores - scores.max())
        per[i] = 1.0 - e[pos[0]] / e.sum()
    return _report(per, LossKind.RANDOMIZED_AUGMENTED)


def loss_gap(w, S: Dataset, Tbar: Sequence[CandidateSet], beta: float) -> float:
    """Closed-form difference randomized_loss - exact_crf_loss: minus the mean
    of (restricted probability of the observed output) times (full-space mass
    outside the candidate set).  Always <= 0."""
    sp = space(S.family)
    y_idx = _true_indices(S)
    X = _bit_matrix(S)
    full_probs, _ = pmf_matrix(sp, X, w, beta)
    w_eff = as_weights(w) / beta
    gap = 0.0
    for i, idx in enumerate(_set_indices(S, Tbar)):
        pos = np.nonzero(idx == y_idx[i])[0]
        if pos.size == 0:
            raise ValueError(f"candidate set {i} does not contain the observed output")
        scores = sp.incidence[idx] @ (X[i] * w_eff)
        e = np.exp(scores - scores.max())
        q_restricted = e[pos[0]] / e.sum()
        outside = 1.0 - full_probs[idx, i].sum()
        gap -= q_restricted * outside
    return gap / S.m


def monte_carlo_loss(w, S: Dataset, beta: float, draws: int, seed: int) -> LossReport:
    """Empirical zero-one loss of the perturbed decoder over fresh Gumbel draws.

    Reports the binomial standard error of the dataset mean.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    sp = space(S.family)
    y_idx = _true_indices(S)
    scores = sp.score_matrix(_bit_matrix(S), as_weights(w))
    rng = np.random.default_rng(seed)
    chunk = max(1, 8_000_000 // sp.size)
    per = np.empty(S.m)
    for i in range(S.m):
        misses = 0
        done = 0
        while done < draws:
            n = min(chunk, draws - done)
            gamma = gumbel_from_uniform(rng.random((n, sp.size)), beta)
            hits = np.argmax(scores[:, i] + gamma, axis=1)
            misses += int((hits != y_idx[i]).sum())
            done += n
        per[i] = misses / draws
    stderr = float(np.sqrt((per * (1 - per) / draws).sum()) / S.m)
    return _report(per, LossKind.MONTE_CARLO_ZERO_ONE, stderr)


def hamming_loss(w, S: Dataset) -> LossReport:
    """Mean normalized Hamming distance between the MAP decode and the truth."""
    sp = space(S.family)
    y_idx = _true_indices(S)
    pred = np.argmax(sp.score_matrix(_bit_matrix(S), as_weights(w)), axis=0)
    dist = sp.pair_distances(pred, y_idx)
    return _report(dist / S.family.hamming_normalizer, LossKind.HAMMING)

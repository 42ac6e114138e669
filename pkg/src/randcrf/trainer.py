"""Gradient-based learning of the decoder weights.

CRF methods ascend the log-likelihood of the observed structures under the
(restricted) CRF distributions, whose gradient is the standard moment-matching
direction; the log of the mean recovery probability and its q-weighted
moment-matching gradient are also exposed (``log_gain``,
``log_gain_gradient``).  SVM baselines descend a margin-rescaled structured
hinge with normalized Hamming distortion.  Both use the step schedule
step0/sqrt(t) followed by an L1 proximal (soft-threshold) step, and both come
in an exact flavor (decoding over the full space) and a randomized flavor
(decoding over freshly sampled candidate sets).

Restricted-support quantities are computed on flat sample-major candidate
arrays (segment reductions), which keeps the randomized methods' per-iteration
cost proportional to the candidate sets rather than the output space.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .gumbel_crf import CandidateSet, Provenance, WeightVector, as_weights, pmf_matrix
from .losses import Dataset, LossKind, LossReport, _all_full_space, _bit_matrix, _true_indices
from .proposal import (ProposalConfig, _batch_end_keys, _pad_features, _sets_from_keys,
                       alpha_schedule)
from .spaces import space


class Method(Enum):
    CRF_ALL = "crf_all"
    CRF_RAND = "crf_rand"
    SVM_ALL = "svm_all"
    SVM_RAND = "svm_rand"


RANDOMIZED_METHODS = (Method.CRF_RAND, Method.SVM_RAND)


@dataclass(frozen=True)
class TrainConfig:
    """step0 = None picks the Gumbel scale for CRF methods (so one update is
    exactly the moment-matching direction times 1/sqrt(t)) and 1.0 for SVM."""

    method: Method
    l1_lambda: float = 0.01
    iterations: int = 20
    step0: float | None = None
    beta: float | None = None  # None -> beta_schedule(m, r) for CRF methods
    resample_each_iter: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.l1_lambda < 0:
            raise ValueError("l1_lambda must be >= 0")
        if self.step0 is not None and not self.step0 > 0:
            raise ValueError("step0 must be positive")


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    objective: float
    grad_inf_norm: float
    seconds: float
    set_size_mean: float
    set_size_max: int


@dataclass(frozen=True, eq=False)
class TrainTrace:
    """Per-iteration log; for randomized methods also the final candidate sets."""

    rows: tuple[IterationStats, ...]
    final_candidate_sets: tuple[CandidateSet, ...] | None = None

    def __len__(self) -> int:
        return len(self.rows)


TRACE_CSV_HEADER = ("run_id", "method", "iter", "objective", "grad_norm", "seconds")


def trace_csv_rows(trace: TrainTrace, run_id: str, method: Method) -> list[tuple]:
    return [(run_id, method.value, r.iteration, r.objective, r.grad_inf_norm, r.seconds)
            for r in trace.rows]


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """Proximal operator of tau * ||.||_1: sign(v) * max(|v| - tau, 0)."""
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def beta_schedule(m, r: int) -> float:
    """Training-time Gumbel scale 1 / ln((r - 1)(sqrt(m) - 1))."""
    if m < 1 or r < 1:
        raise ValueError("m and r must be >= 1")
    arg = (r - 1) * (math.sqrt(m) - 1.0)
    if arg <= 1.0:
        raise ValueError(f"scale undefined: (r - 1)(sqrt(m) - 1) = {arg} must exceed 1")
    return 1.0 / math.log(arg)


# ---------------------------------------------------------------------------
# flat sample-major candidate segments


class _Segments:
    """Candidate indices of all samples in one flat array, sample-major.

    ``keys`` are sample * size + candidate, unique and sorted, with every
    sample's observed output present (augmented sets).
    """

    def __init__(self, sp, y_idx: np.ndarray, keys: np.ndarray):
        m = y_idx.size
        self.smp, self.cand = np.divmod(keys, sp.size)
        self.offsets = np.searchsorted(self.smp, np.arange(m + 1))
        self.counts = np.diff(self.offsets)
        if (self.counts == 0).any():
            raise ValueError("every sample needs a nonempty candidate set")
        self.y_flat = np.nonzero(self.cand == y_idx[self.smp])[0]
        if self.y_flat.size != m:
            raise ValueError("a candidate set does not contain its observed output")


def _keys_from_sets(sp, S: Dataset, sets: Sequence[CandidateSet]) -> np.ndarray:
    if len(sets) != S.m:
        raise ValueError(f"expected {S.m} candidate sets, got {len(sets)}")
    pieces = []
    for i, cs in enumerate(sets):
        if len(cs) == 0:
            raise ValueError(f"candidate set {i} is empty")
        pieces.append(i * sp.size + np.array(sorted(sp.index(y) for y in cs.outputs)))
    return np.concatenate(pieces)


def _segment_scores(sp, xw_pad: np.ndarray, seg: _Segments) -> np.ndarray:
    nz = sp.feature_indices
    flat = xw_pad.ravel()
    base = seg.smp * xw_pad.shape[1]
    acc = flat.take(base + nz[seg.cand, 0])
    for j in range(1, nz.shape[1]):
        acc = acc + flat.take(base + nz[seg.cand, j])
    return acc


def _gain_terms_segments(sp, X, seg: _Segments, y_idx, w, beta):
    m, d = X.shape
    xw_pad = _pad_features(X * (as_weights(w) / beta))
    s = _segment_scores(sp, xw_pad, seg)
    starts = seg.offsets[:-1]
    shift = np.maximum.reduceat(s, starts)
    e = np.exp(s - shift[seg.smp])
    z = np.add.reduceat(e, starts)
    p = e / z[seg.smp]
    q = p[seg.y_flat]
    nz = sp.feature_indices
    flat_feat = (seg.smp[:, None] * (d + 1) + nz[seg.cand]).ravel()
    expected = np.bincount(flat_feat, weights=np.repeat(p, nz.shape[1]),
                           minlength=m * (d + 1)).reshape(m, d + 1)[:, :d] * X
    observed = sp.incidence[y_idx] * X
    return q, observed - expected


def _gain_terms_full(sp, X, y_idx, w, beta):
    probs, _ = pmf_matrix(sp, X, w, beta)
    q = probs[y_idx, np.arange(len(y_idx))]
    expected = (sp.incidence.T @ probs).T * X
    observed = sp.incidence[y_idx] * X
    return q, observed - expected


def log_gain(w, S: Dataset, Tbar: Sequence[CandidateSet], beta: float) -> float:
    """log of the mean restricted probability of recovering the observed outputs."""
    q, _ = _gain_terms(w, S, Tbar, beta)
    return float(np.log(q.mean()))


def log_gain_gradient(w, S: Dataset, Tbar: Sequence[CandidateSet], beta: float) -> np.ndarray:
    """Gradient of ``log_gain`` in w for fixed candidate sets and fixed beta:
    the q-weighted moment-matching direction scaled by 1/beta."""
    q, diff = _gain_terms(w, S, Tbar, beta)
    return (q @ diff) / (beta * q.sum())


def log_likelihood(w, S: Dataset, Tbar: Sequence[CandidateSet], beta: float) -> float:
    """Mean log restricted probability of the observed outputs (the training
    objective of the CRF methods; it lower-bounds ``log_gain``)."""
    q, _ = _gain_terms(w, S, Tbar, beta)
    return float(np.log(q).mean())


def log_likelihood_gradient(w, S: Dataset, Tbar: Sequence[CandidateSet],
                            beta: float) -> np.ndarray:
    """Gradient of ``log_likelihood``: the standard moment-matching direction
    (mean observed-minus-expected feature difference) scaled by 1/beta."""
    _, diff = _gain_terms(w, S, Tbar, beta)
    return diff.mean(axis=0) / beta


def _gain_terms(w, S, Tbar, beta):
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    sp = space(S.family)
    X = _bit_matrix(S)
    y_idx = _true_indices(S)
    if _all_full_space(S, Tbar):
        return _gain_terms_full(sp, X, y_idx, w, beta)
    seg = _Segments(sp, y_idx, _keys_from_sets(sp, S, Tbar))
    return _gain_terms_segments(sp, X, seg, y_idx, w, beta)


# ---------------------------------------------------------------------------
# structured hinge


def _distance_columns(sp, y_idx):
    diff = sp.masks[:, None, :] ^ sp.masks[y_idx][None, :, :]
    return np.bitwise_count(diff).sum(axis=2) / sp.family.hamming_normalizer


def _hinge_terms_full(sp, X, y_idx, w, dist_cols):
    scores = sp.score_matrix(X, as_weights(w))
    best = np.argmax(scores + dist_cols, axis=0)
    cols = np.arange(len(y_idx))
    margins = (scores + dist_cols)[best, cols] - scores[y_idx, cols]
    grad = ((sp.incidence[best] - sp.incidence[y_idx]) * X).mean(axis=0)
    return margins, grad


def _hinge_terms_segments(sp, X, seg: _Segments, y_idx, w):
    xw_pad = _pad_features(X * as_weights(w))
    s = _segment_scores(sp, xw_pad, seg)
    dist = (np.bitwise_count(sp.masks[seg.cand] ^ sp.masks[y_idx[seg.smp]]).sum(axis=1)
            / sp.family.hamming_normalizer)
    aug = s + dist
    starts = seg.offsets[:-1]
    seg_max = np.maximum.reduceat(aug, starts)
    # ties break toward the smallest canonical key: first position in segment
    eligible = np.where(aug == seg_max[seg.smp], np.arange(aug.size), aug.size)
    best = seg.cand[np.minimum.reduceat(eligible, starts)]
    margins = seg_max - s[seg.y_flat]
    grad = ((sp.incidence[best] - sp.incidence[y_idx]) * X).mean(axis=0)
    return margins, grad


def hinge_loss(w, S: Dataset, candidates: Sequence[CandidateSet]) -> LossReport:
    """Margin-rescaled structured hinge over the given per-sample candidates:
    mean of max_y(score(y) + hamming(y, y_i)) - score(y_i)."""
    sp = space(S.family)
    X = _bit_matrix(S)
    y_idx = _true_indices(S)
    if _all_full_space(S, candidates):
        margins, _ = _hinge_terms_full(sp, X, y_idx, w, _distance_columns(sp, y_idx))
    else:
        seg = _Segments(sp, y_idx, _keys_from_sets(sp, S, candidates))
        margins, _ = _hinge_terms_segments(sp, X, seg, y_idx, w)
    return LossReport(float(margins.mean()), margins, LossKind.HINGE)


# ---------------------------------------------------------------------------
# training loops


def train_crf(S: Dataset, cfg: TrainConfig,
              proposal_cfg: ProposalConfig | None = None) -> tuple[WeightVector, TrainTrace]:
    """Ascend the (restricted) log-likelihood with an L1 proximal step."""
    if cfg.method not in (Method.CRF_ALL, Method.CRF_RAND):
        raise ValueError(f"train_crf got method {cfg.method}")
    return _train(S, cfg, proposal_cfg)


def train_svm(S: Dataset, cfg: TrainConfig,
              proposal_cfg: ProposalConfig | None = None) -> tuple[WeightVector, TrainTrace]:
    """Subgradient descent on the structured hinge with an L1 proximal step."""
    if cfg.method not in (Method.SVM_ALL, Method.SVM_RAND):
        raise ValueError(f"train_svm got method {cfg.method}")
    return _train(S, cfg, proposal_cfg)


def _train(S: Dataset, cfg: TrainConfig, proposal_cfg):
    sp = space(S.family)
    X = _bit_matrix(S)
    y_idx = _true_indices(S)
    m = S.m
    randomized = cfg.method in RANDOMIZED_METHODS
    is_crf = cfg.method in (Method.CRF_ALL, Method.CRF_RAND)
    if randomized and proposal_cfg is None:
        raise ValueError("randomized methods need a proposal configuration")
    beta = None
    if is_crf:
        beta = cfg.beta if cfg.beta is not None else beta_schedule(m, sp.size)
    step0 = cfg.step0 if cfg.step0 is not None else (beta if is_crf else 1.0)
    dist_cols = _distance_columns(sp, y_idx) if cfg.method is Method.SVM_ALL else None
    y_keys = np.arange(m) * sp.size + y_idx

    rng = np.random.default_rng(cfg.seed)
    w = np.zeros(sp.family.feature_dim)
    keys = None
    seg = None
    rows = []
    for t in range(1, cfg.iterations + 1):
        tic = time.perf_counter()
        step = step0 / math.sqrt(t)
        if randomized and (seg is None or cfg.resample_each_iter):
            alpha = alpha_schedule(w, m)
            sampled = _batch_end_keys(sp, _pad_features(X * w), y_idx, alpha,
                                      proposal_cfg.k, proposal_cfg.n_target, rng)
            keys = np.unique(np.concatenate([sampled, y_keys]))
            seg = _Segments(sp, y_idx, keys)
        if is_crf:
            if cfg.method is Method.CRF_ALL:
                q, diff = _gain_terms_full(sp, X, y_idx, w, beta)
            else:
                q, diff = _gain_terms_segments(sp, X, seg, y_idx, w, beta)
            objective = float(1.0 - q.mean())
            g = diff.mean(axis=0) / beta
            w = w + step * g
        else:
            if cfg.method is Method.SVM_ALL:
                margins, g = _hinge_terms_full(sp, X, y_idx, w, dist_cols)
            else:
                margins, g = _hinge_terms_segments(sp, X, seg, y_idx, w)
            objective = float(margins.mean())
            w = w - step * g
        w = soft_threshold(w, step * cfg.l1_lambda)
        if not np.isfinite(objective):
            raise RuntimeError(f"{cfg.method.value} diverged at iteration {t}: objective={objective}")
        if randomized:
            size_mean, size_max = float(seg.counts.mean()), int(seg.counts.max())
        else:
            size_mean, size_max = float(sp.size), sp.size
        rows.append(IterationStats(t, objective, float(np.abs(g).max()),
                                   time.perf_counter() - tic, size_mean, size_max))
    final_sets = None
    if randomized:
        final_sets = tuple(_sets_from_keys(sp, keys, m, Provenance.SAMPLED_AUGMENTED))
    return WeightVector(w), TrainTrace(tuple(rows), final_sets)

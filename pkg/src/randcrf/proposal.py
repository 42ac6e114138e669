"""Candidate-set construction by a greedy local-search proposal sampler.

One proposal draw starts either from the observed structure or, with
probability alpha, from a uniformly random structure, then takes a single
greedy pass over the start's distance-k neighborhood in canonical order,
moving to any neighbor whose score is at least the running candidate's.
The result depends on the weights only through score comparisons, so weight
vectors inducing the same score ordering yield identical proposals.

The batch path scores candidates by summing the input*weight entries at each
output's active feature coordinates; a numba kernel runs the literal greedy
pass when numba is available, with a numpy fallback of identical arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gumbel_crf import CandidateSet, Provenance, as_weights
from .losses import Dataset
from .spaces import EnumeratedSpace, StructureFamily, StructuredOutput, input_bits, space

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class ProposalConfig:
    """Exploration probability, neighborhood radius, and draws per sample."""

    alpha: float
    k: int = 2
    n_target: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_target < 1:
            raise ValueError("n_target must be >= 1")


def alpha_schedule(w, m: int) -> float:
    """Exploration probability ||w||_1 / sqrt(m), clamped to remain in [0, 1]."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return min(1.0, float(np.abs(as_weights(w)).sum()) / np.sqrt(m))


# ---------------------------------------------------------------------------
# greedy pass over precomputed neighbor tables
#
# Scores are accumulated coordinate by coordinate in feature_indices order in
# both implementations, so kernel and fallback produce bit-identical floats.

if _HAVE_NUMBA:

    @njit(cache=True)
    def _greedy_kernel(pair_smp, pair_start, nb_indptr, nb_data, nz, xw_pad):  # pragma: no cover
        width = nz.shape[1]
        ends = np.empty(pair_smp.size, np.int64)
        for p in range(pair_smp.size):
            i = pair_smp[p]
            best = pair_start[p]
            s_best = 0.0
            for j in range(width):
                s_best += xw_pad[i, nz[best, j]]
            for e in range(nb_indptr[best], nb_indptr[best + 1]):
                y = nb_data[e]
                s = 0.0
                for j in range(width):
                    s += xw_pad[i, nz[y, j]]
                if s >= s_best:
                    best = y
                    s_best = s
            ends[p] = best
        return ends


def _score_rows(nz, xw_pad, smp, out):
    width = nz.shape[1]
    flat = xw_pad.ravel()
    base = smp * xw_pad.shape[1]
    acc = flat.take(base + nz[out, 0])
    for j in range(1, width):
        acc = acc + flat.take(base + nz[out, j])
    return acc


def _greedy_numpy(pair_smp, pair_start, nb_indptr, nb_data, nz, xw_pad):
    # closed form of the sequential pass: the running score never decreases,
    # so it ends at the last neighbor attaining the neighborhood max when
    # that max reaches the start's score (ties accepted)
    ends = pair_start.copy()
    s0 = _score_rows(nz, xw_pad, pair_smp, pair_start)
    cnt = nb_indptr[pair_start + 1] - nb_indptr[pair_start]
    sel = np.nonzero(cnt > 0)[0]
    if sel.size == 0:
        return ends
    cs = cnt[sel]
    seg = np.zeros(sel.size + 1, dtype=np.int64)
    np.cumsum(cs, out=seg[1:])
    flat_pos = (np.arange(seg[-1]) - np.repeat(seg[:-1], cs)
                + np.repeat(nb_indptr[pair_start[sel]], cs))
    nb = nb_data[flat_pos]
    rep = np.repeat(np.arange(sel.size), cs)
    s_nb = _score_rows(nz, xw_pad, pair_smp[sel][rep], nb)
    seg_max = np.maximum.reduceat(s_nb, seg[:-1])
    eligible = np.where(s_nb == seg_max[rep], np.arange(nb.size), -1)
    last = np.maximum.reduceat(eligible, seg[:-1])
    improved = seg_max >= s0[sel]
    ends[sel[improved]] = nb[last[improved]]
    return ends


def _greedy_pairs(sp: EnumeratedSpace, xw_pad, pair_smp, pair_start, k: int) -> np.ndarray:
    nb_indptr, nb_data = sp.neighbor_csr(k)
    nz = sp.feature_indices
    if _HAVE_NUMBA:
        return _greedy_kernel(pair_smp, pair_start, nb_indptr, nb_data, nz, xw_pad)
    return _greedy_numpy(pair_smp, pair_start, nb_indptr, nb_data, nz, xw_pad)


def _pad_features(xw: np.ndarray) -> np.ndarray:
    # trailing zero column absorbs the sentinel index of feature_indices
    return np.concatenate([xw, np.zeros((xw.shape[0], 1))], axis=1)


def warm_proposal_tables(family: StructureFamily, k: int) -> None:
    """Build the family's neighbor table and compile the batch kernel.

    One-time per-process setup, exposed so harnesses can keep it out of
    training-time measurements.
    """
    sp = space(family)
    sp.neighbor_csr(k)
    _ = sp.feature_indices
    zero = np.zeros(1, dtype=np.int64)
    _greedy_pairs(sp, np.zeros((1, family.feature_dim + 1)), zero, zero, k)


# ---------------------------------------------------------------------------
# sampling


def propose(family: StructureFamily, x, y_observed: StructuredOutput, w,
            cfg: ProposalConfig, rng: np.random.Generator) -> StructuredOutput:
    """One proposal draw.

    Consumes exactly two uniforms per call (exploration coin, start index);
    ``build_candidate_sets`` relies on this fixed pattern to batch draws.
    """
    sp = space(family)
    u = rng.random(2)
    if u[0] < cfg.alpha:
        start = int(u[1] * sp.size)
    else:
        start = sp.index(y_observed)
    xw_pad = _pad_features((input_bits(family, x) * as_weights(w))[None, :])
    end = _greedy_pairs(sp, xw_pad, np.zeros(1, dtype=np.int64),
                        np.array([start], dtype=np.int64), cfg.k)
    return sp.outputs[int(end[0])]


def _batch_end_keys(sp: EnumeratedSpace, xw_pad, y_idx, alpha: float, k: int,
                    n_target: int, rng: np.random.Generator) -> np.ndarray:
    """Deduplicated sample-major keys sample * size + end for all draws.

    Draw order is sample-major from the single given generator, so the draws
    reproduce sequential ``propose`` calls (samples outermost) exactly.
    """
    m = y_idx.size
    u = rng.random((m, n_target, 2))
    starts = np.where(u[..., 0] < alpha,
                      (u[..., 1] * sp.size).astype(np.int64), y_idx[:, None])
    pair_keys = np.unique(np.arange(m)[:, None] * sp.size + starts)
    pair_smp, pair_start = np.divmod(pair_keys, sp.size)
    ends = _greedy_pairs(sp, xw_pad, pair_smp, pair_start, k)
    return np.unique(pair_smp * sp.size + ends)


def _sets_from_keys(sp: EnumeratedSpace, keys: np.ndarray, m: int,
                    provenance: Provenance) -> list[CandidateSet]:
    smp, cand = np.divmod(keys, sp.size)
    bounds = np.searchsorted(smp, np.arange(m + 1))
    return [CandidateSet(tuple(sp.outputs[int(j)] for j in cand[bounds[i]:bounds[i + 1]]),
                         provenance)
            for i in range(m)]


def build_candidate_sets(family: StructureFamily, S: Dataset, w,
                         cfg: ProposalConfig, rng: np.random.Generator) -> list[CandidateSet]:
    """Per-sample candidate sets from ``cfg.n_target`` proposal draws each,
    deduplicated and in canonical order.

    Equivalent to invoking ``propose`` n_target times per sample on the given
    generator, iterating samples outermost, and deduplicating the results.
    """
    sp = space(family)
    xw_pad = _pad_features(np.asarray(S.inputs, dtype=np.float64) * as_weights(w))
    y_idx = np.array([sp.index(y) for y in S.outputs])
    keys = _batch_end_keys(sp, xw_pad, y_idx, cfg.alpha, cfg.k, cfg.n_target, rng)
    return _sets_from_keys(sp, keys, S.m, Provenance.SAMPLED)


def augment(T: Sequence[CandidateSet], S: Dataset) -> list[CandidateSet]:
    """Force each candidate set to contain its sample's observed structure."""
    if len(T) != S.m:
        raise ValueError(f"expected {S.m} candidate sets, got {len(T)}")
    out = []
    for cs, y in zip(T, S.outputs):
        outputs = cs.outputs if y in cs else tuple(
            sorted(cs.outputs + (y,), key=lambda o: o.components))
        out.append(CandidateSet(outputs, Provenance.SAMPLED_AUGMENTED))
    return out


def proposal_quality_frequency(family: StructureFamily, S: Dataset, w,
                               T: Sequence[CandidateSet], c: float = 0.0) -> float:
    """Diagnostic: fraction of samples whose candidate set behaves well under w.

    A sample passes if either its observed structure is the unique score
    maximizer and the set is exactly the singleton of it, or the set's mean
    score clears the observed structure's score by c * ||w||_1.
    """
    sp = space(family)
    wv = as_weights(w)
    X = np.asarray(S.inputs, dtype=np.float64)
    l1 = float(np.abs(wv).sum())
    y_idx = [sp.index(y) for y in S.outputs]
    ok = 0
    for i, cs in enumerate(T):
        scores = sp.incidence @ (X[i] * wv)
        s_true = scores[y_idx[i]]
        others = np.delete(scores, y_idx[i])
        idx = [sp.index(y) for y in cs.outputs]
        if others.size == 0 or s_true > others.max():
            ok += idx == [y_idx[i]]
        else:
            ok += scores[idx].mean() >= s_true + c * l1
    return ok / S.m

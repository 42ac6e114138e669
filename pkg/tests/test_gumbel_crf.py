import math

import numpy as np
import pytest
from scipy import stats

from randcrf import (CandidateSet, PerturbationConfig, Provenance, SpanningTreeFamily,
                     SubsetFamily, WeightVector, crf_pmf, enumerate_outputs,
                     full_candidate_set, gumbel_from_uniform, map_decode, perturbed_decode,
                     sample_gumbel, space)
from randcrf.gumbel_crf import pmf_matrix

from oracles import exhaustive_map_decode, random_instance

EULER_MASCHERONI = 0.5772156649015329

SET23 = SubsetFamily(2, 3)  # three outputs, one active pair each: scores = w entries


def scores_are_weights_setup():
    """With x all-ones on SubsetFamily(2,3), output {i,j} scores w[pair(i,j)],
    so the three outputs' scores are exactly the three weight entries."""
    return np.ones(SET23.feature_dim)


# ---------------------------------------------------------------------------
# Gumbel sampling


def test_inverse_cdf_at_one_over_e_is_zero():
    for beta in (1.0, 2.5, 0.1):
        assert gumbel_from_uniform(1.0 / math.e, beta) == pytest.approx(0.0, abs=1e-15)


def test_scale_doubles_draws_from_the_same_uniform_stream():
    u = np.random.default_rng(5).random(1000)
    np.testing.assert_allclose(gumbel_from_uniform(u, 2.0), 2.0 * gumbel_from_uniform(u, 1.0),
                               rtol=1e-15)


def test_sample_gumbel_deterministic_and_positive_count():
    cfg = PerturbationConfig(beta=1.5, rng_seed=11)
    a = sample_gumbel(cfg, 100)
    b = sample_gumbel(cfg, 100)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        sample_gumbel(cfg, 0)


def test_empirical_mean_matches_euler_mascheroni():
    draws = sample_gumbel(PerturbationConfig(beta=1.0, rng_seed=7), 10 ** 6)
    assert abs(draws.mean() - EULER_MASCHERONI) < 0.005


def test_beta_must_be_positive():
    with pytest.raises(ValueError):
        PerturbationConfig(beta=0.0)


# ---------------------------------------------------------------------------
# decoding


def test_map_decode_zero_weights_returns_first_canonical():
    fam = SubsetFamily(3, 6)
    assert map_decode(fam, np.ones(fam.feature_dim), np.zeros(fam.feature_dim)) \
        == enumerate_outputs(fam)[0]


def test_map_decode_singleton_space():
    fam = SubsetFamily(3, 3)
    outs = enumerate_outputs(fam)
    assert len(outs) == 1
    assert map_decode(fam, np.ones(fam.feature_dim), np.random.default_rng(0).normal(size=3)) \
        == outs[0]


@pytest.mark.parametrize("family", [SubsetFamily(3, 6), SpanningTreeFamily(4)])
def test_map_decode_matches_exhaustive_scan(family):
    rng = np.random.default_rng(3)
    for _ in range(15):
        X, _, w = random_instance(family, rng, m=1)
        assert map_decode(family, X[0], w) == exhaustive_map_decode(family, X[0], w)


def test_perturbed_decode_zero_noise_is_map_decode():
    fam = SubsetFamily(3, 6)
    rng = np.random.default_rng(4)
    X, _, w = random_instance(fam, rng, m=1)
    r = len(enumerate_outputs(fam))
    assert perturbed_decode(fam, X[0], w, np.zeros(r)) == map_decode(fam, X[0], w)


def test_perturbed_decode_huge_noise_entry_wins():
    fam = SubsetFamily(2, 4)
    outs = enumerate_outputs(fam)
    gamma = np.zeros(len(outs))
    gamma[3] = 1e9
    assert perturbed_decode(fam, np.ones(fam.feature_dim), np.zeros(fam.feature_dim), gamma) \
        == outs[3]


def test_perturbed_decode_checks_gamma_length():
    fam = SubsetFamily(2, 4)
    with pytest.raises(ValueError):
        perturbed_decode(fam, np.ones(fam.feature_dim), np.zeros(fam.feature_dim), np.zeros(3))


def test_perturbed_decode_restricted_support():
    outs = enumerate_outputs(SET23)
    sub = CandidateSet((outs[0], outs[2]), Provenance.SAMPLED)
    gamma = np.array([0.0, 1e9])
    got = perturbed_decode(SET23, scores_are_weights_setup(), np.zeros(3), gamma, support=sub)
    assert got == outs[2]


# ---------------------------------------------------------------------------
# CRF pmf


def test_equal_scores_give_half_half():
    outs = enumerate_outputs(SET23)
    sub = CandidateSet((outs[0], outs[1]), Provenance.SAMPLED)
    for beta in (0.2, 1.0, 7.0):
        dist = crf_pmf(SET23, scores_are_weights_setup(), np.zeros(3), sub, beta)
        np.testing.assert_allclose(dist.probs, [0.5, 0.5])


def test_unit_score_gap_closed_form():
    outs = enumerate_outputs(SET23)
    sub = CandidateSet((outs[0], outs[1]), Provenance.SAMPLED)
    w = np.array([1.0, 0.0, 0.0])  # scores (1, 0) for the two supported outputs
    dist = crf_pmf(SET23, scores_are_weights_setup(), w, sub, 1.0)
    np.testing.assert_allclose(dist.probs, [math.e / (1 + math.e), 1 / (1 + math.e)],
                               atol=1e-12)
    assert dist.prob_of(outs[0]) == pytest.approx(0.73106, abs=1e-5)


def test_large_beta_approaches_uniform():
    fam = SubsetFamily(3, 6)
    rng = np.random.default_rng(6)
    X, _, w = random_instance(fam, rng, m=1)
    dist = crf_pmf(fam, X[0], w, full_candidate_set(fam), 1e6)
    np.testing.assert_allclose(dist.probs, 1.0 / len(dist.probs), atol=1e-5)


def test_temperature_scaling_is_exact():
    fam = SubsetFamily(3, 6)
    rng = np.random.default_rng(7)
    X, _, w = random_instance(fam, rng, m=1)
    for beta in (0.05, 0.7, 13.0):
        a = crf_pmf(fam, X[0], w, full_candidate_set(fam), beta)
        b = crf_pmf(fam, X[0], w / beta, full_candidate_set(fam), 1.0)
        np.testing.assert_array_equal(a.probs, b.probs)


def test_restricted_pmf_on_full_support_matches_unrestricted():
    fam = SubsetFamily(3, 6)
    rng = np.random.default_rng(8)
    X, _, w = random_instance(fam, rng, m=1)
    full = full_candidate_set(fam)
    as_sampled = CandidateSet(full.outputs, Provenance.SAMPLED)
    a = crf_pmf(fam, X[0], w, full, 0.5)
    b = crf_pmf(fam, X[0], w, as_sampled, 0.5)
    np.testing.assert_allclose(a.probs, b.probs, atol=1e-15)


def test_additive_score_shift_cancels():
    # every SubsetFamily(2, u) output has exactly one active pair, so adding a
    # constant to all weights shifts every score by that constant
    fam = SubsetFamily(2, 4)
    rng = np.random.default_rng(9)
    w = rng.normal(size=fam.feature_dim)
    x = np.ones(fam.feature_dim)
    base = crf_pmf(fam, x, w, full_candidate_set(fam), 1.0)
    shifted = crf_pmf(fam, x, w + 123.456, full_candidate_set(fam), 1.0)
    np.testing.assert_allclose(base.probs, shifted.probs, atol=1e-12)


def test_pmf_matrix_agrees_with_per_sample_pmf():
    fam = SubsetFamily(3, 6)
    rng = np.random.default_rng(10)
    X, _, w = random_instance(fam, rng, m=5)
    probs, logz = pmf_matrix(space(fam), X.astype(np.float64), w, 0.7)
    for i in range(5):
        dist = crf_pmf(fam, X[i], w, full_candidate_set(fam), 0.7)
        np.testing.assert_allclose(probs[:, i], dist.probs, atol=1e-15)
        assert logz[i] == pytest.approx(dist.log_partition)


def test_perturbed_argmax_frequencies_match_pmf():
    fam = SubsetFamily(2, 4)  # six outputs
    rng = np.random.default_rng(11)
    x = np.ones(fam.feature_dim)
    w = rng.normal(0.0, 0.8, size=fam.feature_dim)
    beta = 1.0
    sp = space(fam)
    scores = sp.scores(x, w)
    draws = 200_000
    gamma = gumbel_from_uniform(np.random.default_rng(12).random((draws, sp.size)), beta)
    counts = np.bincount(np.argmax(scores + gamma, axis=1), minlength=sp.size)
    expected = crf_pmf(fam, x, w, full_candidate_set(fam), beta).probs * draws
    assert stats.chisquare(counts, expected).pvalue > 0.01


# ---------------------------------------------------------------------------
# containers


def test_weight_vector_metadata():
    w = WeightVector(np.array([0.0, -2.0, 0.5, 0.0]))
    assert w.l1_norm == 2.5
    assert w.support_size == 2
    assert w.w_min == 0.5
    assert WeightVector(np.zeros(3)).w_min == math.inf


def test_candidate_set_rejects_duplicates():
    y = enumerate_outputs(SET23)[0]
    with pytest.raises(ValueError):
        CandidateSet((y, y), Provenance.SAMPLED)


def test_candidate_set_membership():
    outs = enumerate_outputs(SET23)
    cs = CandidateSet((outs[0], outs[2]), Provenance.SAMPLED)
    assert outs[0] in cs and outs[1] not in cs and len(cs) == 2


def test_crf_pmf_requires_nonempty_support():
    with pytest.raises(ValueError):
        crf_pmf(SET23, scores_are_weights_setup(), np.zeros(3),
                CandidateSet((), Provenance.SAMPLED), 1.0)

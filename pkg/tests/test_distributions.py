import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from hideseek.distributions import (
    BanditLossSpec,
    HideSeekV1Spec,
    HideSeekV2Spec,
    MatrixOptSpec,
    SparsePair,
    SparsePcaSpec,
    instance_alphabet,
    pair_rank,
    pair_unrank,
    population_mean,
    sample_bandit_loss,
    sample_bandit_loss_batch,
    sample_opt_matrix,
    sample_opt_matrix_batch,
    sample_sparse_pca,
    sample_sparse_pca_batch,
    sample_v1,
    sample_v1_batch,
    sample_v2,
    sample_v2_batch,
    spec_from_dict,
    spec_to_dict,
    v1_pmf,
)
from hideseek.errors import ConfigError
from hideseek.rng import stream

BIG = 1_000_000


def rng(*keys):
    return stream(1234, *keys)


# -- spec validation -----------------------------------------------------------


@pytest.mark.parametrize(
    "factory",
    [
        lambda: HideSeekV1Spec(0, 0.1),
        lambda: HideSeekV1Spec(3, 0.6),
        lambda: HideSeekV1Spec(3, -0.1),
        lambda: HideSeekV1Spec(3, 0.1, 3),
        lambda: HideSeekV2Spec(3, 0.1, -1),
        lambda: BanditLossSpec(3, 0.3),
        lambda: SparsePcaSpec(1, 0.1),
        lambda: SparsePcaSpec(4, 0.5),
        lambda: SparsePcaSpec(4, 0.1, (2, 1)),
        lambda: MatrixOptSpec(3, 1.5),
        lambda: MatrixOptSpec(3, 0.5, (0, 3)),
    ],
)
def test_invalid_specs_rejected(factory):
    with pytest.raises(ValueError):
        factory()


def test_spec_json_round_trip():
    for spec in [
        HideSeekV1Spec(4, 0.25, 1),
        HideSeekV2Spec(3, 0.1),
        BanditLossSpec(5, 0.2, 4),
        SparsePcaSpec(6, 0.25, (1, 4)),
        MatrixOptSpec(3, -0.5, (2, 0)),
    ]:
        assert spec_from_dict(spec_to_dict(spec)) == spec


def test_spec_from_dict_errors():
    with pytest.raises(ConfigError):
        spec_from_dict({"variant": "nope", "d": 3})
    with pytest.raises(ConfigError):
        spec_from_dict({"variant": "v1", "d": 3, "rho": 0.9})


def test_sparse_pca_tau():
    assert SparsePcaSpec(9, 0.25).tau == pytest.approx(1 / 16)
    assert SparsePcaSpec(9, 0.25).n_pairs == 36


# -- V1 ------------------------------------------------------------------------


def test_v1_fully_biased_single_coordinate_is_always_plus():
    x = sample_v1_batch(HideSeekV1Spec(1, 0.5, 0), rng(1), 1000)
    assert np.all(x == 1)


def test_v1_reference_is_uniform():
    x = sample_v1_batch(HideSeekV1Spec(3, 0.4, None), rng(2), BIG)
    assert np.all(np.abs(x.mean(axis=0)) < 0.004)


def test_v1_biased_coordinate_mean():
    x = sample_v1_batch(HideSeekV1Spec(4, 0.25, 1), rng(3), BIG)
    means = x.mean(axis=0, dtype=float)
    assert means[1] == pytest.approx(0.5, abs=0.002)
    assert np.all(np.abs(np.delete(means, 1)) < 0.002)


def test_v1_single_draw_payload():
    inst = sample_v1(HideSeekV1Spec(5, 0.1, 2), rng(4))
    assert inst.values.shape == (5,)
    assert set(np.unique(inst.values)) <= {-1, 1}


def test_v1_pmf_matches_histogram():
    spec = HideSeekV1Spec(4, 0.2, 3)
    xs, probs = instance_alphabet(spec)
    assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)
    x = sample_v1_batch(spec, rng(5), BIG)
    codes = ((x > 0).astype(int) * (1 << np.arange(3, -1, -1))).sum(axis=1)
    observed = np.bincount(codes, minlength=16)
    # alphabet order is itertools.product((-1, 1)), i.e. the same binary code
    expected = probs * BIG
    assert chisquare(observed, expected).pvalue > 1e-3


def test_v1_pmf_values():
    spec = HideSeekV1Spec(2, 0.25, 0)
    assert v1_pmf(spec, (1, 1)) == pytest.approx(0.75 * 0.5)
    assert v1_pmf(spec, (-1, 1)) == pytest.approx(0.25 * 0.5)


# -- V2 ------------------------------------------------------------------------


def test_v2_reference_alphabet_uniform():
    xs, probs = instance_alphabet(HideSeekV2Spec(2, 0.0))
    assert len(xs) == 4
    assert np.allclose(probs, 0.25)


def test_v2_biased_probabilities():
    xs, probs = instance_alphabet(HideSeekV2Spec(3, 0.25, 1))
    lookup = {tuple(x): p for x, p in zip(xs.tolist(), probs)}
    assert lookup[(0, 1, 0)] == pytest.approx(0.25)
    assert lookup[(0, -1, 0)] == pytest.approx(1 / 6 - 1 / 12)
    assert lookup[(1, 0, 0)] == pytest.approx(1 / 6)


def test_v2_marginal_mean():
    spec = HideSeekV2Spec(3, 0.25, 1)
    idx, sign = sample_v2_batch(spec, rng(6), BIG)
    values = np.where(idx == 1, sign, 0).astype(float)
    sigma = values.std() / math.sqrt(BIG)
    assert abs(values.mean() - 2 * 0.25 / 3) < 3 * sigma


def test_v2_single_draw_structure():
    for k in range(50):
        inst = sample_v2(HideSeekV2Spec(4, 0.2, 0), rng(7, k))
        assert isinstance(inst, SparsePair)
        assert len(inst.entries) == 1
        assert abs(inst.entries[0][1]) == 1


# -- bandit losses -------------------------------------------------------------


def test_bandit_zero_bias_fair_bits():
    x = sample_bandit_loss_batch(BanditLossSpec(2, 0.0), rng(8), BIG)
    assert set(np.unique(x)) <= {0, 1}
    assert np.all(np.abs(x.mean(axis=0) - 0.5) < 0.003)


def test_bandit_biased_means_and_gap():
    x = sample_bandit_loss_batch(BanditLossSpec(3, 0.25, 0), rng(9), BIG).astype(float)
    means = x.mean(axis=0)
    assert means[0] == pytest.approx(0.25, abs=0.003)
    assert np.allclose(means[1:], 0.5, atol=0.003)
    gap = x[:, 1] - x[:, 0]
    assert abs(gap.mean() - 0.25) < 4 * gap.std() / math.sqrt(BIG)


def test_bandit_single_draw():
    inst = sample_bandit_loss(BanditLossSpec(4, 0.1, 2), rng(10))
    assert inst.values.shape == (4,)


# -- sparse PCA ----------------------------------------------------------------


def test_sparse_pca_structure_and_moments():
    spec = SparsePcaSpec(6, 0.25, (1, 4))
    i, j, s1, s2 = sample_sparse_pca_batch(spec, rng(11), BIG)
    assert np.all(i < j)
    assert set(np.unique(s1)) <= {-1, 1} and set(np.unique(s2)) <= {-1, 1}
    scale2 = spec.d / 2
    # x_k^2 is d/2 when k is touched (probability 2/d) and 0 otherwise
    touched = np.bincount(i, minlength=spec.d) + np.bincount(j, minlength=spec.d)
    second = touched * scale2 / BIG
    p = 2 / spec.d
    se = scale2 * math.sqrt(p * (1 - p) / BIG)
    assert np.all(np.abs(second - 1.0) < 3 * se)
    prod = np.where((i == 1) & (j == 4), s1 * s2 * scale2, 0).astype(float)
    assert abs(prod.mean() - spec.tau) < 3 * prod.std() / math.sqrt(BIG)


def test_sparse_pca_single_draw_magnitudes():
    spec = SparsePcaSpec(5, 0.2, (0, 2))
    for k in range(50):
        inst = sample_sparse_pca(spec, rng(12, k))
        assert len(inst.entries) == 2
        assert inst.entries[0][0] != inst.entries[1][0]
        for _, v in inst.entries:
            assert abs(v) == pytest.approx(math.sqrt(2.5))


def test_sparse_pair_rejects_duplicate_indices():
    with pytest.raises(ValueError):
        SparsePair(((1, 1.0), (1, -1.0)))


def test_sparse_pair_to_dense():
    dense = SparsePair(((0, 2.0), (3, -2.0))).to_dense(4)
    assert dense.tolist() == [2.0, 0.0, 0.0, -2.0]


@given(st.integers(2, 40), st.data())
def test_pair_rank_bijection(d, data):
    i = data.draw(st.integers(0, d - 2))
    j = data.draw(st.integers(i + 1, d - 1))
    r = int(pair_rank(i, j, d))
    assert 0 <= r < d * (d - 1) // 2
    assert pair_unrank(r, d) == (i, j)


def test_pair_rank_lexicographic():
    d = 6
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    assert [int(pair_rank(i, j, d)) for i, j in pairs] == list(range(len(pairs)))


# -- matrices ------------------------------------------------------------------


def test_matrix_unbiased_entries():
    z = sample_opt_matrix_batch(MatrixOptSpec(2, 0.0), rng(13), 200_000)
    assert z.shape == (200_000, 2, 2)
    assert np.all(np.abs(z.mean(axis=0)) < 0.01)


def test_matrix_degenerate_bias():
    z = sample_opt_matrix_batch(MatrixOptSpec(3, 1.0, (0, 1)), rng(14), 1000)
    assert np.all(z[:, 0, 1] == 1)


def test_matrix_bias_mean():
    z = sample_opt_matrix_batch(MatrixOptSpec(4, 0.2, (2, 3)), rng(15), BIG)
    assert z[:, 2, 3].mean(dtype=float) == pytest.approx(0.2, abs=0.004)


def test_matrix_single_draw():
    inst = sample_opt_matrix(MatrixOptSpec(3, -1.0, (0, 1)), rng(16))
    assert inst.values[0, 1] == -1


# -- population means ----------------------------------------------------------


def test_population_means_closed_form():
    assert np.allclose(population_mean(HideSeekV1Spec(3, 0.1, 1)), [0, 0.2, 0])
    assert np.allclose(population_mean(HideSeekV2Spec(4, 0.2, 0)), [0.1, 0, 0, 0])
    assert np.allclose(population_mean(BanditLossSpec(3, 0.25, 0)), [0.25, 0.5, 0.5])
    mu = population_mean(SparsePcaSpec(5, 0.2, (1, 3)))
    assert mu[1, 3] == pytest.approx(0.1) and mu[3, 1] == pytest.approx(0.1)
    assert np.allclose(np.diag(mu), 1.0)
    mat = population_mean(MatrixOptSpec(3, 0.4, (2, 1)))
    assert mat[2, 1] == pytest.approx(0.4) and np.count_nonzero(mat) == 1


def test_zero_bias_means_are_flat():
    assert not np.any(population_mean(HideSeekV1Spec(5, 0.0, 2)))
    assert not np.any(population_mean(HideSeekV2Spec(5, 0.0, 2)))
    assert not np.any(population_mean(MatrixOptSpec(5, 0.0, (1, 1))))


@pytest.mark.parametrize(
    "spec",
    [
        HideSeekV1Spec(5, 0.15, 3),
        BanditLossSpec(5, 0.2, 1),
        MatrixOptSpec(3, 0.3, (1, 2)),
    ],
)
def test_empirical_mean_matches_population_mean(spec):
    n = 200_000
    if isinstance(spec, HideSeekV1Spec):
        x = sample_v1_batch(spec, rng(17), n)
    elif isinstance(spec, BanditLossSpec):
        x = sample_bandit_loss_batch(spec, rng(17), n)
    else:
        x = sample_opt_matrix_batch(spec, rng(17), n)
    x = x.astype(float)
    se = x.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(x.mean(axis=0) - population_mean(spec)) <= 4 * se + 1e-12)


def test_reference_is_exchangeable():
    x = sample_v1_batch(HideSeekV1Spec(6, 0.3, None), rng(18), 200_000).astype(float)
    perm = rng(19).permutation(6)
    assert np.allclose(x.mean(axis=0), x[:, perm].mean(axis=0)[np.argsort(perm)])
    assert np.all(np.abs(x.mean(axis=0)) < 0.01)


def test_samplers_reproducible():
    spec = HideSeekV1Spec(8, 0.1, 0)
    a = sample_v1_batch(spec, stream(5, 1), 100)
    b = sample_v1_batch(spec, stream(5, 1), 100)
    c = sample_v1_batch(spec, stream(5, 2), 100)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.floats(0, 0.5), st.data())
def test_v1_pmf_normalized(d, rho, data):
    j = data.draw(st.one_of(st.none(), st.integers(0, d - 1)))
    spec = HideSeekV1Spec(d, rho, j)
    total = math.fsum(v1_pmf(spec, x) for x in itertools.product((-1, 1), repeat=d))
    assert total == pytest.approx(1.0, abs=1e-12)

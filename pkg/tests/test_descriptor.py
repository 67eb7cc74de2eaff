import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trustsup.descriptor import build_usd, usd_batch, validate_softmax_matrix
from trustsup.errors import DataFormatError
from trustsup.numerics import seeded_rng


def random_matrix(rng, models, classes):
    return rng.dirichlet(np.ones(classes), size=models)


def is_tie_free(p):
    flat = np.sort(p.ravel())
    return np.diff(flat).min() > 1e-12


class TestBuildUsd:
    def test_single_model_is_descending_sort(self):
        usd = build_usd([[0.2, 0.5, 0.3]])
        assert np.allclose(usd.values, [0.5, 0.3, 0.2])

    def test_two_model_hand_trace(self):
        # leading member holds 0.7; its class order (1, 2, 0) applies to both
        # rows; member order stays (0, 1) since 0.7 > 0.6
        usd = build_usd([[0.1, 0.7, 0.2], [0.6, 0.3, 0.1]])
        assert np.allclose(usd.values, [0.7, 0.2, 0.1, 0.3, 0.1, 0.6])
        assert list(usd.model_order) == [0, 1]
        assert list(usd.class_perm) == [1, 2, 0]

    def test_class_relabeling_invariance(self):
        rng = seeded_rng(11)
        p = random_matrix(rng, 4, 5)
        assert is_tie_free(p)
        base = build_usd(p).values
        for _ in range(5):
            sigma = rng.permutation(5)
            assert np.array_equal(build_usd(p[:, sigma]).values, base)

    def test_block_sums_preserved(self):
        rng = seeded_rng(3)
        p = random_matrix(rng, 5, 7)
        usd = build_usd(p)
        blocks = usd.values.reshape(5, 7)
        expected = p.sum(axis=1)[usd.model_order]
        assert np.allclose(blocks.sum(axis=1), expected, atol=1e-12)

    def test_block_maxima_non_increasing_and_global_max_first(self):
        rng = seeded_rng(4)
        p = random_matrix(rng, 6, 4)
        usd = build_usd(p)
        maxima = usd.values.reshape(6, 4).max(axis=1)
        assert (np.diff(maxima) <= 1e-15).all()
        assert usd.values[0] == p.max()

    def test_row_off_simplex_names_row(self):
        bad = np.array([[0.5, 0.5], [0.4, 0.4]])
        with pytest.raises(DataFormatError, match="row 1"):
            build_usd(bad)

    def test_nan_rejected(self):
        with pytest.raises(DataFormatError, match="NaN"):
            build_usd([[np.nan, 1.0]])

    def test_out_of_range_rejected(self):
        with pytest.raises(DataFormatError, match=r"\[0, 1\]"):
            build_usd([[1.2, -0.2]])

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), models=st.integers(1, 6), classes=st.integers(2, 8))
    def test_invariance_property(self, seed, models, classes):
        rng = seeded_rng(seed)
        p = random_matrix(rng, models, classes)
        if not is_tie_free(p):
            return
        sigma = rng.permutation(classes)
        assert np.array_equal(build_usd(p[:, sigma]).values, build_usd(p).values)


class TestUsdBatch:
    def test_empty_batch_has_configured_width(self):
        out = usd_batch([], models=3, classes=4)
        assert out.shape == (0, 12)

    def test_empty_batch_without_sizes_rejected(self):
        with pytest.raises(DataFormatError):
            usd_batch([])

    def test_identical_samples_identical_rows(self):
        p = random_matrix(seeded_rng(0), 3, 4)
        out = usd_batch([p, p])
        assert np.array_equal(out[0], out[1])

    def test_batch_matches_per_sample_loop(self):
        rng = seeded_rng(9)
        mats = [random_matrix(rng, 4, 6) for _ in range(25)]
        batch = usd_batch(mats)
        loop = np.stack([build_usd(m).values for m in mats])
        assert np.array_equal(batch, loop)

    def test_heterogeneous_shapes_rejected(self):
        rng = seeded_rng(1)
        with pytest.raises(DataFormatError):
            usd_batch([random_matrix(rng, 2, 3), random_matrix(rng, 3, 3)])

    def test_bad_sample_names_index(self):
        rng = seeded_rng(2)
        good = random_matrix(rng, 2, 3)
        bad = np.array([[0.5, 0.4, 0.2], [0.2, 0.4, 0.4]])
        with pytest.raises(DataFormatError, match="sample 1"):
            usd_batch([good, bad])


class TestValidate:
    def test_accepts_tolerant_simplex(self):
        p = validate_softmax_matrix([[0.3, 0.7 + 5e-7]])
        assert p.shape == (1, 2)

    def test_empty_matrix_rejected(self):
        with pytest.raises(DataFormatError):
            validate_softmax_matrix(np.zeros((0, 3)))

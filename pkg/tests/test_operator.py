import itertools

import numpy as np
import pytest

from cnn_cs import exceptions, operator
from cnn_cs.model_sparse import sample_model_sparse


def dense_oracle(bank: operator.FilterBank, geom: operator.InputGeometry) -> np.ndarray:
    """W assembled entry by entry from the row indexing convention."""
    weights, width, stride = bank.weights, bank.filter_len, geom.stride
    n = geom.shifts(width)
    length = geom.length
    if bank.dims == 1:
        dense = np.zeros((bank.num_filters * n, bank.num_channels * length))
        for i, j, m in itertools.product(
            range(bank.num_filters), range(n), range(bank.num_channels)
        ):
            start = m * length + j * stride
            dense[i * n + j, start : start + width] = weights[i, m]
        return dense

    dense = np.zeros((bank.num_filters * n * n, bank.num_channels, length, length))
    for i, jr, jc in itertools.product(range(bank.num_filters), range(n), range(n)):
        dense[
            i * n * n + jr * n + jc,
            :,
            jr * stride : jr * stride + width,
            jc * stride : jc * stride + width,
        ] = weights[i]
    return dense.reshape(bank.num_filters * n * n, -1)


def random_operator(rng: np.random.Generator, *, normalize=False) -> operator.StructuredOperator:
    dims = int(rng.choice([1, 2]))
    width, stride, shifts = (int(v) for v in rng.integers(1, [5, 4, 5]))
    bank = operator.FilterBank(
        rng.standard_normal(
            (int(rng.integers(1, 4)), int(rng.integers(1, 4))) + (width,) * dims
        )
    )
    if normalize:
        bank = operator.normalize_rows(bank)
    geom = operator.InputGeometry((shifts - 1) * stride + width, stride, dims)
    return operator.build_operator(bank, geom)


class TestFilterBank:
    @pytest.fixture
    def target(self) -> operator.FilterBank:
        return operator.FilterBank(np.arange(24, dtype=float).reshape(2, 3, 4))

    def test_shape_properties(self, target):
        actual = (
            target.num_filters,
            target.num_channels,
            target.filter_len,
            target.dims,
        )

        assert actual == (2, 3, 4, 1)

    def test_as_matrix__concatenates_channels(self, target):
        actual = target.as_matrix()

        assert actual.shape == (2, 12)
        np.testing.assert_array_equal(actual[1], np.arange(12, 24))

    def test_weights__are_read_only(self, target):
        with pytest.raises(ValueError):
            target.weights[0, 0, 0] = 1.0

    @pytest.mark.parametrize(
        "weights",
        (
            np.ones((2, 3)),
            np.ones((2, 3, 2, 3)),
            np.ones((0, 3, 2)),
            np.full((1, 1, 2), np.nan),
        ),
    )
    def test_init__where_weights_invalid(self, weights):
        with pytest.raises(ValueError):
            operator.FilterBank(weights)

    def test_is_normalized__where_rows_unit(self):
        target = operator.FilterBank([[[0.6, 0.8]], [[1.0, 0.0]]])

        assert target.is_normalized()

    def test_is_normalized__where_rows_not_unit(self, target):
        assert not target.is_normalized()


class TestNewRandomFilterbank:
    def test_same_seed__gives_identical_weights(self):
        first = operator.new_random_filterbank(4, 3, 5, seed=7)
        second = operator.new_random_filterbank(4, 3, 5, seed=7)

        np.testing.assert_array_equal(first.weights, second.weights)

    def test_different_seed__gives_different_weights(self):
        first = operator.new_random_filterbank(4, 3, 5, seed=7)
        second = operator.new_random_filterbank(4, 3, 5, seed=8)

        assert not np.array_equal(first.weights, second.weights)

    def test_shape__where_two_dimensional(self):
        actual = operator.new_random_filterbank(4, 3, 5, dims=2, seed=0)

        assert actual.weights.shape == (4, 3, 5, 5)

    def test_scale__rows_have_unit_norm_on_average(self):
        actual = operator.new_random_filterbank(2000, 8, 5, seed=0)

        assert np.mean(actual.group_norms() ** 2) == pytest.approx(1.0, abs=0.02)

    @pytest.mark.parametrize("args", ((0, 1, 1), (1, 0, 1), (1, 1, 0)))
    def test_invalid_sizes(self, args):
        with pytest.raises(ValueError):
            operator.new_random_filterbank(*args)


class TestNormalizeRows:
    def test_rows_become_unit_norm(self):
        bank = operator.new_random_filterbank(6, 4, 3, seed=3)

        actual = operator.normalize_rows(bank)

        np.testing.assert_allclose(actual.group_norms(), 1.0, rtol=1e-12)

    def test_where_filter_is_zero(self):
        weights = np.ones((3, 2, 2))
        weights[1] = 0.0

        with pytest.raises(exceptions.ZeroFilter, match=r"\[1\]"):
            operator.normalize_rows(operator.FilterBank(weights))


class TestInputGeometry:
    @pytest.mark.parametrize(
        "length, stride, filter_len, expected",
        ((32, 1, 5, 28), (16, 1, 3, 14), (9, 2, 3, 4), (5, 1, 5, 1)),
    )
    def test_shifts(self, length, stride, filter_len, expected):
        target = operator.InputGeometry(length, stride)

        actual = target.shifts(filter_len)

        assert actual == expected

    @pytest.mark.parametrize("length, stride", ((4, 1), (8, 2)))
    def test_shifts__where_filter_does_not_fit(self, length, stride):
        target = operator.InputGeometry(length, stride)

        with pytest.raises(exceptions.GeometryMismatch):
            target.shifts(5)


class TestStructuredOperator:
    @pytest.fixture
    def target(self) -> operator.StructuredOperator:
        bank = operator.normalize_rows(operator.new_random_filterbank(96, 32, 5, seed=0))
        return operator.build_operator(bank, operator.InputGeometry(32))

    def test_shape(self, target):
        assert target.shape == (96 * 28, 32 * 32)
        assert target.block_size == 28

    def test_shape__where_two_dimensional(self):
        bank = operator.new_random_filterbank(4, 2, 3, dims=2, seed=0)

        actual = operator.build_operator(bank, operator.InputGeometry(8, dims=2))

        assert actual.shape == (4 * 36, 2 * 64)

    def test_init__where_dims_differ(self):
        bank = operator.new_random_filterbank(4, 2, 3, dims=2, seed=0)

        with pytest.raises(exceptions.GeometryMismatch):
            operator.build_operator(bank, operator.InputGeometry(8))

    def test_apply_forward__where_length_wrong(self, target):
        with pytest.raises(exceptions.DimensionMismatch):
            target.apply_forward(np.zeros(1023))

    def test_apply_adjoint__where_length_wrong(self, target):
        with pytest.raises(exceptions.DimensionMismatch):
            target.apply_adjoint(np.zeros((96, 28)))

    def test_forward_and_adjoint__match_dense_oracle(self, rng):
        for _ in range(100):
            target = random_operator(rng)
            dense = dense_oracle(target.bank, target.geom)
            x = rng.standard_normal(target.col_count)
            z = rng.standard_normal(target.row_count)

            np.testing.assert_allclose(
                target.apply_forward(x), dense @ x, rtol=1e-12, atol=1e-12
            )
            np.testing.assert_allclose(
                target.apply_adjoint(z), dense.T @ z, rtol=1e-12, atol=1e-12
            )

    def test_adjoint_identity(self, rng):
        for _ in range(100):
            target = random_operator(rng)
            x = rng.standard_normal(target.col_count)
            z = rng.standard_normal(target.row_count)
            h = target.apply_forward(x)
            y = target.apply_adjoint(z)

            scale = np.linalg.norm(h) * np.linalg.norm(z) + np.linalg.norm(x) * np.linalg.norm(y)
            assert abs(h @ z - x @ y) <= 1e-10 * scale

    def test_materialize_dense(self, rng):
        target = random_operator(rng)

        actual = target.materialize_dense()

        np.testing.assert_allclose(
            actual, dense_oracle(target.bank, target.geom), atol=1e-15
        )


class TestCrelu:
    def test_split__parts_are_nonnegative(self, rng):
        h = rng.standard_normal(50)

        plus, minus = operator.crelu_split(h)

        assert np.all(plus >= 0) and np.all(minus >= 0)
        np.testing.assert_array_equal(plus - minus, h)

    def test_reconstruct__where_operator_orthogonal(self, rng, matrix_operator):
        for _ in range(20):
            q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
            x = rng.standard_normal(6)

            actual = operator.crelu_reconstruct(matrix_operator(q), x)

            assert np.linalg.norm(actual - x) <= 1e-10 * np.linalg.norm(x)

    def test_reconstruct__equals_gram_applied(self, rng):
        bank = operator.new_random_filterbank(5, 2, 3, seed=1)
        target = operator.build_operator(bank, operator.InputGeometry(7))
        x = rng.standard_normal(target.col_count)

        actual = operator.crelu_reconstruct(target, x)

        np.testing.assert_allclose(
            actual, target.apply_adjoint(target.apply_forward(x)), atol=1e-12
        )

    def test_pair_filterbank(self):
        bank = operator.FilterBank([[[1.0, 2.0]]])

        actual = operator.pair_filterbank(bank)

        np.testing.assert_array_equal(actual.weights, [[[1.0, 2.0]], [[-1.0, -2.0]]])


class TestCoherence:
    def test_where_filters_shifted_once(self):
        bank = operator.FilterBank([[[0.6, 0.8]]])
        target = operator.build_operator(bank, operator.InputGeometry(3))

        actual = operator.coherence(target)

        assert actual.mu == pytest.approx(0.48, abs=1e-15)
        assert actual.rows == (0, 1)

    def test_where_identity_like_bank(self, matrix_operator):
        actual = operator.coherence(matrix_operator(np.eye(5)))

        assert actual.mu == 0.0

    def test_where_not_normalized(self):
        bank = operator.FilterBank(np.ones((2, 1, 2)))
        target = operator.build_operator(bank, operator.InputGeometry(3))

        with pytest.raises(exceptions.NotNormalized):
            operator.coherence(target)

    def test_matches_dense_gram(self, rng):
        for _ in range(50):
            target = random_operator(rng, normalize=True)
            dense = target.materialize_dense()
            gram = np.abs(dense @ dense.T)
            np.fill_diagonal(gram, 0.0)

            actual = operator.coherence(target)

            assert actual.mu == pytest.approx(gram.max(), abs=1e-12)
            if actual.rows is not None:
                first, second = actual.rows
                assert first != second
                assert gram[first, second] == pytest.approx(actual.mu, abs=1e-12)

    def test_invariant_under_filter_permutation(self, rng):
        for _ in range(20):
            target = random_operator(rng, normalize=True)
            order = rng.permutation(target.num_blocks)
            permuted = operator.build_operator(
                operator.FilterBank(target.bank.weights[order]), target.geom
            )

            actual = operator.coherence(permuted)

            assert actual.mu == pytest.approx(operator.coherence(target).mu, abs=1e-12)

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "num_filters, num_channels, low, high",
        ((512, 512, 0.04, 0.10), (64, 3, 0.52, 0.82)),
    )
    def test_random_two_dimensional_banks(self, num_filters, num_channels, low, high):
        bank = operator.normalize_rows(
            operator.new_random_filterbank(num_filters, num_channels, 3, dims=2, seed=0)
        )
        target = operator.build_operator(bank, operator.InputGeometry(16, dims=2))

        actual = operator.coherence(target)

        assert low <= actual.mu <= high


def test_norm_preserved_in_expectation():
    z = sample_model_sparse(16, 12, 4, np.random.default_rng(5)).coeffs
    geom = operator.InputGeometry(16)

    ratios = []
    for seed in range(2000):
        target = operator.build_operator(
            operator.new_random_filterbank(16, 8, 5, seed=seed), geom
        )
        ratios.append(np.sum(target.apply_adjoint(z) ** 2) / np.sum(z**2))

    standard_error = np.std(ratios, ddof=1) / np.sqrt(len(ratios))
    assert abs(np.mean(ratios) - 1.0) <= 5 * standard_error

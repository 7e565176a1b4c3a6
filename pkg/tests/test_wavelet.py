import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesdecomp.core import RngHandle, Signal, make_grid
from bayesdecomp.wavelet import (CoeffVector, daubechies_filters, dwt_forward,
                                 dwt_forward_2d, dwt_inverse, dwt_inverse_2d,
                                 forward_values, inverse_values, level_blocks,
                                 wavelet_matrix)


def _rand(grid, seed=0):
    return Signal(grid=grid, values=RngHandle(seed=seed).generator().standard_normal(grid.n))


class TestFilters:
    def test_haar(self):
        b = daubechies_filters(1)
        r = 1.0 / np.sqrt(2.0)
        assert np.allclose(b.lowpass, [r, r], atol=1e-15)
        assert np.allclose(b.highpass, [r, -r], atol=1e-15)

    def test_db2_values(self):
        b = daubechies_filters(2)
        assert np.allclose(
            b.lowpass, [0.48296, 0.83652, 0.22414, -0.12941], atol=5e-6
        )

    @pytest.mark.parametrize("order", range(1, 11))
    def test_qmf_invariants(self, order):
        b = daubechies_filters(order)
        lo, hi = b.lowpass, b.highpass
        assert lo.size == 2 * order
        assert abs(lo.sum() - np.sqrt(2.0)) < 1e-12
        assert abs((lo * lo).sum() - 1.0) < 1e-12
        assert abs((hi * hi).sum() - 1.0) < 1e-12
        assert abs(lo @ hi) < 1e-12
        # orthogonality to even shifts of itself
        for shift in range(1, order):
            assert abs(lo[: -2 * shift] @ lo[2 * shift:]) < 1e-12
        # mirror relation hi[k] = (-1)^k lo[2M-1-k]
        k = np.arange(2 * order)
        assert np.array_equal(hi, (-1.0) ** k * lo[::-1])

    def test_rejects_unsupported_order(self):
        with pytest.raises(ValueError):
            daubechies_filters(11)
        with pytest.raises(ValueError):
            daubechies_filters(0)


class TestForward1D:
    def test_constant_signal_haar(self):
        grid = make_grid(1, 2)
        c = dwt_forward(Signal(grid=grid, values=np.ones(4)), daubechies_filters(1))
        assert c.values[0] == pytest.approx(2.0, abs=1e-14)
        assert np.abs(c.values[1:]).max() < 1e-14

    def test_unit_vector_norm(self):
        grid = make_grid(1, 3)
        e1 = np.zeros(8)
        e1[0] = 1.0
        for order in (1, 2, 8):
            c = dwt_forward(Signal(grid=grid, values=e1), daubechies_filters(order))
            assert np.linalg.norm(c.values) == pytest.approx(1.0, abs=1e-12)

    def test_roundtrip_db8_512(self):
        grid = make_grid(1, 9)
        f = _rand(grid, seed=5)
        b = daubechies_filters(8)
        back = dwt_inverse(dwt_forward(f, b), b)
        assert np.abs(back.values - f.values).max() < 1e-10


class TestInverse1D:
    def test_inverse_of_constant(self):
        grid = make_grid(1, 2)
        c = CoeffVector(grid=grid, values=np.array([2.0, 0.0, 0.0, 0.0]))
        f = dwt_inverse(c, daubechies_filters(1))
        assert np.allclose(f.values, np.ones(4), atol=1e-14)

    def test_unit_coeff_gives_unit_norm(self):
        grid = make_grid(1, 4)
        b = daubechies_filters(4)
        for k in (0, 1, 5, 15):
            vals = np.zeros(16)
            vals[k] = 1.0
            f = dwt_inverse(CoeffVector(grid=grid, values=vals), b)
            assert np.linalg.norm(f.values) == pytest.approx(1.0, abs=1e-12)

    def test_adjoint_identity(self):
        # <W f, c> == <f, W^T c>
        grid = make_grid(1, 5)
        b = daubechies_filters(8)
        gen = RngHandle(seed=9).generator()
        f = gen.standard_normal(32)
        c = gen.standard_normal(32)
        lhs = forward_values(f, b, grid) @ c
        rhs = f @ inverse_values(c, b, grid)
        assert abs(lhs - rhs) < 1e-12


class Test2D:
    def test_constant_4x4_haar(self):
        grid = make_grid(2, 2)
        c = dwt_forward_2d(Signal(grid=grid, values=np.ones(16)), daubechies_filters(1))
        assert c.values[0] == pytest.approx(4.0, abs=1e-14)
        assert np.abs(c.values[1:]).max() < 1e-14

    def test_roundtrip_db8_64x64(self):
        grid = make_grid(2, 6)
        f = _rand(grid, seed=6)
        b = daubechies_filters(8)
        back = dwt_inverse_2d(dwt_forward_2d(f, b), b)
        assert np.abs(back.values - f.values).max() < 1e-10

    def test_parseval(self):
        grid = make_grid(2, 4)
        f = _rand(grid, seed=7)
        for order in (1, 2, 8):
            c = dwt_forward(f, daubechies_filters(order))
            assert abs(np.linalg.norm(c.values) - np.linalg.norm(f.values)) < 1e-12

    def test_requires_2d_grid(self):
        grid = make_grid(1, 3)
        f = _rand(grid)
        with pytest.raises(ValueError):
            dwt_forward_2d(f, daubechies_filters(1))


class TestInvariants:
    @pytest.mark.parametrize("order", [1, 2, 4, 8])
    @pytest.mark.parametrize("J", range(3, 10))
    def test_roundtrip_1d_all(self, order, J):
        grid = make_grid(1, J)
        f = _rand(grid, seed=J * 100 + order)
        b = daubechies_filters(order)
        back = inverse_values(forward_values(f.values, b, grid), b, grid)
        assert np.abs(back - f.values).max() < 1e-10

    @pytest.mark.parametrize("order", [1, 2, 4, 8])
    @pytest.mark.parametrize("J", [3, 4, 5])
    def test_roundtrip_2d_all(self, order, J):
        grid = make_grid(2, J)
        f = _rand(grid, seed=J * 10 + order)
        b = daubechies_filters(order)
        back = inverse_values(forward_values(f.values, b, grid), b, grid)
        assert np.abs(back - f.values).max() < 1e-10

    @pytest.mark.parametrize("order", [1, 2, 8])
    @pytest.mark.parametrize("d,J", [(1, 5), (1, 6), (2, 3)])
    def test_orthonormal_dense(self, order, d, J):
        grid = make_grid(d, J)
        w = wavelet_matrix(daubechies_filters(order), grid)
        assert np.abs(w @ w.T - np.eye(grid.n)).max() < 1e-10

    def test_energy_preserved(self):
        grid = make_grid(1, 8)
        f = _rand(grid, seed=3)
        for order in (1, 2, 4, 8):
            c = forward_values(f.values, daubechies_filters(order), grid)
            assert abs(np.linalg.norm(c) - np.linalg.norm(f.values)) < 1e-12

    def test_haar_detail_vanishes_on_dyadic_blocks(self):
        # constant on aligned blocks of length 2^(J-j) -> zero detail at
        # levels finer than the block scale
        grid = make_grid(1, 5)
        gen = RngHandle(seed=12).generator()
        block = 8  # 2^3: constant on blocks of 8 -> levels j >= 2 are zero
        vals = np.repeat(gen.standard_normal(grid.n // block), block)
        c = forward_values(vals, daubechies_filters(1), grid)
        for j, sl in level_blocks(grid):
            if 2 ** (grid.J - j) <= block:
                assert np.abs(c[sl]).max() < 1e-12

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=1, max_value=10), st.integers(min_value=0, max_value=10 ** 6))
    def test_roundtrip_any_order(self, order, seed):
        grid = make_grid(1, 4)
        f = RngHandle(seed=seed).generator().standard_normal(16)
        b = daubechies_filters(order)
        back = inverse_values(forward_values(f, b, grid), b, grid)
        assert np.abs(back - f).max() < 1e-10


class TestCoeffLayout:
    def test_level_blocks_partition(self):
        for d, J in [(1, 5), (2, 3)]:
            grid = make_grid(d, J)
            covered = [0]
            for j, sl in level_blocks(grid):
                assert sl.start == 2 ** (j * d)
                assert sl.stop == 2 ** ((j + 1) * d)
                covered.extend(range(sl.start, sl.stop))
            assert covered == list(range(grid.n))

    def test_2d_level_block_sizes(self):
        grid = make_grid(2, 3)
        sizes = [sl.stop - sl.start for _, sl in level_blocks(grid)]
        assert sizes == [3, 12, 48]  # 3 * 4^j

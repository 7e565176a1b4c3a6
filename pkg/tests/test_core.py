import numpy as np
import pytest

from bayesdecomp.core import (Grid, RngHandle, Signal, add_noise, load_signal,
                              make_grid, save_signal)


class TestMakeGrid:
    def test_paper_sizes(self):
        assert make_grid(1, 9).n == 512
        assert make_grid(1, 7).n == 128
        assert make_grid(2, 6).n == 4096

    def test_geometry(self):
        g = make_grid(2, 4)
        assert g.n_side == 16
        assert g.spacing * g.n_side == 1.0

    @pytest.mark.parametrize("d,J", [(0, 3), (3, 3), (1, 0), (1, 17)])
    def test_rejects_bad_args(self, d, J):
        with pytest.raises(ValueError):
            make_grid(d, J)


class TestSignal:
    def test_length_checked(self):
        with pytest.raises(ValueError):
            Signal(grid=make_grid(1, 3), values=np.zeros(7))

    def test_finite_checked(self):
        vals = np.zeros(8)
        vals[3] = np.nan
        with pytest.raises(ValueError):
            Signal(grid=make_grid(1, 3), values=vals)

    def test_immutable(self):
        s = Signal(grid=make_grid(1, 3), values=np.zeros(8))
        with pytest.raises(ValueError):
            s.values[0] = 1.0


class TestRngHandle:
    def test_reproducible(self):
        a = RngHandle(seed=123, stream_id=7).generator().standard_normal(100)
        b = RngHandle(seed=123, stream_id=7).generator().standard_normal(100)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RngHandle(seed=123, stream_id=0).generator().standard_normal(100)
        b = RngHandle(seed=123, stream_id=1).generator().standard_normal(100)
        assert not np.array_equal(a, b)


class TestAddNoise:
    def test_sigma_formula(self):
        # norm 10 over 100 entries at level 0.1 -> sigma = 0.1 * 10 / 10
        data = np.full(100, 1.0)
        _, sigma = add_noise(data, 0.1, RngHandle(seed=0))
        assert sigma == pytest.approx(0.1 * 10.0 / 10.0)

    def test_rejects_zero_level(self):
        with pytest.raises(ValueError):
            add_noise(np.ones(8), 0.0, RngHandle(seed=0))

    def test_rejects_zero_data(self):
        with pytest.raises(ValueError):
            add_noise(np.zeros(8), 0.1, RngHandle(seed=0))

    def test_realized_ratio_concentrates(self):
        # ||eps|| / ||clean|| stays within [0.08, 0.12] at level 0.1, m=512
        clean = RngHandle(seed=42).generator().standard_normal(512)
        for s in range(100):
            noisy, _ = add_noise(clean, 0.1, RngHandle(seed=1000 + s))
            ratio = np.linalg.norm(noisy - clean) / np.linalg.norm(clean)
            assert 0.08 <= ratio <= 0.12

    def test_noise_calibration(self):
        # E ||eps||^2 = m sigma^2 within 5% over >= 100 draws
        clean = RngHandle(seed=3).generator().standard_normal(256)
        ratios = []
        for s in range(200):
            noisy, sigma = add_noise(clean, 0.2, RngHandle(seed=s))
            ratios.append(np.sum((noisy - clean) ** 2) / (256 * sigma ** 2))
        assert abs(np.mean(ratios) - 1.0) < 0.05


class TestSignalIO:
    def test_roundtrip_1d(self, tmp_path):
        grid = make_grid(1, 4)
        s = Signal(grid=grid, values=RngHandle(seed=1).generator().standard_normal(16))
        save_signal(tmp_path / "s.txt", s, {"seed": 1})
        back = load_signal(tmp_path / "s.txt")
        assert back.grid == grid
        assert np.array_equal(back.values, s.values)

    def test_roundtrip_2d(self, tmp_path):
        grid = make_grid(2, 3)
        s = Signal(grid=grid, values=RngHandle(seed=2).generator().standard_normal(64))
        save_signal(tmp_path / "img.txt", s, {"noise_level": 0.1, "sigma": 0.05})
        back = load_signal(tmp_path / "img.txt")
        assert back.grid == grid
        assert np.array_equal(back.values, s.values)

    def test_2d_is_comma_separated_rows(self, tmp_path):
        grid = make_grid(2, 2)
        s = Signal(grid=grid, values=np.arange(16.0))
        save_signal(tmp_path / "img.txt", s)
        lines = (tmp_path / "img.txt").read_text().strip().splitlines()
        assert len(lines) == 4
        assert [float(x) for x in lines[0].split(",")] == [0.0, 1.0, 2.0, 3.0]

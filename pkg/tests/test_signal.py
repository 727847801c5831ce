import numpy as np
import pytest

from blindmimo import (
    build_constellation,
    build_frame,
    concentration_statistic,
    header_length,
    random_stiefel,
    snr_to_noise_variance,
    synthesize_received,
)


class TestConstellation:
    def test_qpsk_points(self):
        c = build_constellation("qpsk")
        assert c.size == 4 and c.bits_per_symbol == 2
        assert np.abs(np.abs(c.points) - 1.0).max() < 1e-12
        assert abs(c.points.sum()) < 1e-12
        assert c.s_infinity == pytest.approx(1.0)
        assert c.points[0] == pytest.approx((1 + 1j) / np.sqrt(2))

    def test_qam16_unit_power_by_direct_sum(self):
        c = build_constellation("qam16")
        # Independent oracle: all 16 grid points on {-3,-1,1,3}^2 / sqrt(10).
        grid = np.array([a + 1j * b for a in (-3, -1, 1, 3) for b in (-3, -1, 1, 3)]) / np.sqrt(10)
        assert sorted(np.round(c.points, 12).tolist(), key=lambda z: (z.real, z.imag)) == sorted(
            np.round(grid, 12).tolist(), key=lambda z: (z.real, z.imag)
        )
        assert np.mean(np.abs(grid) ** 2) == pytest.approx(1.0)
        assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0)

    def test_gray_neighbours_differ_in_one_bit(self):
        for kind in ("qpsk", "qam16"):
            c = build_constellation(kind)
            d = np.abs(c.points[:, None] - c.points[None, :])
            dmin = d[d > 1e-9].min()
            bits = c.bits_of(np.arange(c.size))
            for i in range(c.size):
                for j in range(c.size):
                    if 1e-9 < d[i, j] < dmin * 1.001:
                        assert int(np.sum(bits[i] != bits[j])) == 1

    def test_unknown_tag(self):
        with pytest.raises(ValueError):
            build_constellation("8psk")


class TestBuildFrame:
    def test_header_length_arithmetic(self):
        assert header_length(8, 4) == 2
        assert header_length(4, 4) == 1
        assert header_length(5, 4) == 2
        assert header_length(1, 4) == 0

    def test_reference_column_shared(self):
        c = build_constellation("qpsk")
        f = build_frame(8, 32, c, np.random.default_rng(0))
        assert np.allclose(f.x[:, 0], f.ref_value / np.sqrt(32))

    def test_headers_distinct_and_injective(self):
        c = build_constellation("qpsk")
        f = build_frame(8, 32, c, np.random.default_rng(0))
        assert f.header_len == 2
        headers = {tuple(row) for row in f.id_headers.tolist()}
        assert len(headers) == 8

    def test_too_short_frame_rejected(self):
        c = build_constellation("qpsk")
        with pytest.raises(ValueError):
            build_frame(8, 3, c, np.random.default_rng(0))

    def test_peak_magnitude_bound(self):
        c = build_constellation("qam16")
        f = build_frame(4, 64, c, np.random.default_rng(1))
        assert np.abs(f.x).max() <= c.s_infinity / np.sqrt(64) + 1e-15

    def test_frame_power_near_k(self):
        for kind in ("qpsk", "qam16"):
            c = build_constellation(kind)
            f = build_frame(8, 120, c, np.random.default_rng(2))
            p = np.linalg.norm(f.x) ** 2
            assert 0.9 * 8 <= p <= 1.1 * 8

    def test_seeded_bit_identical(self):
        c = build_constellation("qpsk")
        a = build_frame(4, 50, c, np.random.default_rng(5)).x
        b = build_frame(4, 50, c, np.random.default_rng(5)).x
        assert a.tobytes() == b.tobytes()


class TestSynthesizeReceived:
    def test_noiseless_single_user_passthrough(self):
        c = build_constellation("qpsk")
        f = build_frame(1, 16, c, np.random.default_rng(0))
        h = np.zeros((6, 1), dtype=complex)
        h[0, 0] = 1.0
        rx = synthesize_received(h, f, np.ones(1), np.ones(1), 0.0, np.random.default_rng(1))
        assert np.allclose(rx.y_bar[0], f.x[0])
        assert np.abs(rx.y_bar[1:]).max() == 0.0

    def test_noise_variance_moment(self):
        c = build_constellation("qpsk")
        f = build_frame(2, 500, c, np.random.default_rng(0))
        h = np.zeros((1000, 2), dtype=complex)
        sigma = 0.37
        rx = synthesize_received(h, f, np.ones(2), np.ones(2), sigma, np.random.default_rng(1))
        v = np.abs(rx.y_bar.ravel()) ** 2  # pure noise since the channel is zero
        se = v.std(ddof=1) / np.sqrt(v.size)
        assert abs(v.mean() - sigma) < 3 * se

    def test_negative_variance_rejected(self):
        c = build_constellation("qpsk")
        f = build_frame(2, 16, c, np.random.default_rng(0))
        with pytest.raises(ValueError):
            synthesize_received(np.zeros((4, 2), complex), f, np.ones(2), np.ones(2), -1.0,
                                np.random.default_rng(0))

    def test_snr_mapping(self):
        assert snr_to_noise_variance(0.0, 8, 240) == pytest.approx(8 / 240)
        assert snr_to_noise_variance(20.0, 8, 240) == pytest.approx(8 / (100 * 240))


class TestConcentrationStatistic:
    def test_exactly_orthonormal_rows(self):
        x = random_stiefel(40, 4, np.random.default_rng(0)).a.conj().T
        assert concentration_statistic(x) < 1e-9

    def test_single_unit_row(self):
        x = np.array([[1.0, 1.0]]) / np.sqrt(2)
        assert concentration_statistic(x) == pytest.approx(0.0, abs=1e-15)

    def test_statistic_shrinks_with_t(self):
        c = build_constellation("qpsk")
        rng = np.random.default_rng(3)
        short = [concentration_statistic(build_frame(8, 100, c, rng)) for _ in range(200)]
        rng = np.random.default_rng(3)
        long = [concentration_statistic(build_frame(8, 800, c, rng)) for _ in range(200)]
        assert np.median(long) < np.median(short)

import numpy as np
from scipy import stats

from rgbdseg.engine import pixel_rng, rng_stream

from reference import pixel_rng_py


class TestPurity:
    def test_fixed_arguments_fixed_value(self):
        first = pixel_rng(123, 4, 5, 6, 7)
        assert pixel_rng(123, 4, 5, 6, 7) == first
        assert 0.0 <= first < 1.0

    def test_matches_python_twin(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            seed, x, y, f, d = (int(v) for v in rng.integers(0, 2**20, size=5))
            assert pixel_rng(seed, x, y, f, d) == pixel_rng_py(seed, x, y, f, d)
        # Large 64-bit seeds too.
        assert pixel_rng(2**63 + 11, 1, 2, 3, 4) == pixel_rng_py(2**63 + 11, 1, 2, 3, 4)

    def test_distinct_keys_differ(self):
        base = pixel_rng(5, 10, 20, 30, 0)
        assert pixel_rng(5, 11, 20, 30, 0) != base
        assert pixel_rng(5, 10, 21, 30, 0) != base
        assert pixel_rng(5, 10, 20, 31, 0) != base
        assert pixel_rng(5, 10, 20, 30, 1) != base
        assert pixel_rng(6, 10, 20, 30, 0) != base


class TestUniformity:
    def test_mean_over_million_draws(self):
        draws = rng_stream(42, 17, 23, 0, 1_000_000)
        assert abs(float(draws.mean()) - 0.5) < 0.002

    def test_chi_square_256_bins(self):
        draws = rng_stream(42, 17, 23, 0, 1_000_000)
        observed = np.bincount((draws * 256).astype(np.int64), minlength=256)
        _, p = stats.chisquare(observed)
        assert p > 0.001

    def test_lag1_autocorrelation(self):
        draws = rng_stream(7, 3, 9, 2, 200_000)
        a = draws[:-1] - draws[:-1].mean()
        b = draws[1:] - draws[1:].mean()
        corr = float((a * b).mean() / (a.std() * b.std()))
        # Noise floor for n samples is ~1/sqrt(n); allow 4 sigma.
        assert abs(corr) < 4.0 / np.sqrt(draws.size - 1)

    def test_neighbouring_pixels_uncorrelated(self):
        n = 100_000
        left = rng_stream(7, 50, 60, 0, n)
        right = rng_stream(7, 51, 60, 0, n)
        below = rng_stream(7, 50, 61, 0, n)
        for other in (right, below):
            a = left - left.mean()
            b = other - other.mean()
            corr = float((a * b).mean() / (a.std() * b.std()))
            assert abs(corr) < 4.0 / np.sqrt(n)

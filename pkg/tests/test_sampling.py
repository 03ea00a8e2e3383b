import math

import numpy as np
import pytest
from numpy.random import Philox

from gausstomo import (ContinuousSweep, DomainError, GaussianStateSpec,
                       SchemeKind, SeedSpec, UniformGrid, effective_covariance,
                       heterodyne_arrays, homodyne_arrays, raw_words,
                       sample_heterodyne, sample_homodyne)

FIG5 = GaussianStateSpec(mu=2.0, lam=10.0, eta=0.5)
VACUUM = GaussianStateSpec(mu=1.0, lam=1.0)


class TestSeedSpec:
    def test_validation(self):
        with pytest.raises(DomainError):
            SeedSpec(-1)
        with pytest.raises(DomainError):
            SeedSpec(2 ** 64)
        with pytest.raises(DomainError):
            SeedSpec(1.5)  # type: ignore[arg-type]

    def test_stream_derivation(self):
        assert SeedSpec(9, 4).stream(3) == SeedSpec(9, 7)

    def test_json_round_trip(self):
        seed = SeedSpec(123, 456)
        assert SeedSpec.from_json_dict(seed.to_json_dict()) == seed


class TestRawWords:
    def test_counter_block_addressing(self):
        # any window equals the same slice of the sequential stream
        seed = SeedSpec(123, 456)
        full = raw_words(seed, 0, 64)
        for start, count in ((0, 4), (1, 7), (5, 13), (30, 34), (63, 1)):
            window = raw_words(seed, start, count)
            assert np.array_equal(window, full[start:start + count])

    def test_matches_philox_reference(self):
        seed = SeedSpec(123, 456)
        ref = Philox(key=np.array([123, 456], dtype=np.uint64)).random_raw(8)
        assert np.array_equal(raw_words(seed, 0, 8), ref)

    def test_distinct_streams_share_no_blocks(self):
        a = raw_words(SeedSpec(7, 0), 0, 4096)
        b = raw_words(SeedSpec(7, 1), 0, 4096)
        assert not np.any(a == b)
        # and no shared 4-word subsequences anywhere in the window
        quads_a = {tuple(a[i:i + 4]) for i in range(0, 4096, 4)}
        quads_b = {tuple(b[i:i + 4]) for i in range(0, 4096, 4)}
        assert not quads_a & quads_b


class TestHomodyneSampling:
    def test_bit_identical_reruns(self):
        seed = SeedSpec(42, 7)
        a = sample_homodyne(FIG5, 500, seed=seed)
        b = sample_homodyne(FIG5, 500, seed=seed)
        assert a == b

    def test_window_split_reassembles_single_threaded_sequence(self):
        seed = SeedSpec(42, 7)
        t_full, x_full = homodyne_arrays(FIG5, 1000, seed=seed)
        pieces = [homodyne_arrays(FIG5, n, seed=seed, start=s)
                  for s, n in ((0, 300), (300, 450), (750, 250))]
        t_cat = np.concatenate([p[0] for p in pieces])
        x_cat = np.concatenate([p[1] for p in pieces])
        assert np.array_equal(t_full, t_cat)
        assert np.array_equal(x_full, x_cat)

    def test_vacuum_variance(self):
        _, x = homodyne_arrays(VACUUM, 100_000, seed=SeedSpec(1))
        n = x.size
        var = float(np.mean(x * x))
        se = 0.5 * math.sqrt(2.0 / n)
        assert abs(var - 0.5) < 3 * se

    def test_angle_bin_variance_matches_marginal(self):
        # around theta = 0 the marginal variance is g1 + delta_hom = 0.6
        thetas, x = homodyne_arrays(FIG5, 400_000, seed=SeedSpec(2))
        sel = (thetas < 0.01) | (thetas > math.pi - 0.01)
        xs = x[sel]
        assert xs.size > 1500
        var = float(np.mean(xs * xs))
        se = 0.6 * math.sqrt(2.0 / xs.size)
        assert abs(var - 0.6) < 3 * se + 0.01  # small smear from the 0.01 bin width

    def test_sweep_angles_are_uniform(self):
        thetas, _ = homodyne_arrays(VACUUM, 50_000, seed=SeedSpec(3))
        assert thetas.min() >= 0.0 and thetas.max() < math.pi
        hist, _ = np.histogram(thetas, bins=10, range=(0, math.pi))
        assert hist.min() > 4500  # ~5000 expected per bin

    def test_uniform_grid_cycles_balanced(self):
        d = 7
        thetas, _ = homodyne_arrays(VACUUM, 100, UniformGrid(d), seed=SeedSpec(4))
        expected = np.array([(k % d) * math.pi / d for k in range(100)])
        assert np.array_equal(thetas, expected)
        counts = np.unique(thetas, return_counts=True)[1]
        assert counts.max() - counts.min() <= 1

    def test_grid_policy_validation(self):
        with pytest.raises(DomainError):
            UniformGrid(0)

    def test_rejects_empty_run(self):
        with pytest.raises(DomainError):
            sample_homodyne(VACUUM, 0)

    def test_sample_objects_match_arrays(self):
        seed = SeedSpec(5)
        samples = sample_homodyne(FIG5, 50, ContinuousSweep(), seed)
        thetas, x = homodyne_arrays(FIG5, 50, ContinuousSweep(), seed)
        assert [s.theta for s in samples] == list(thetas)
        assert [s.x for s in samples] == list(x)


class TestHeterodyneSampling:
    def test_bit_identical_reruns(self):
        seed = SeedSpec(11, 3)
        assert sample_heterodyne(FIG5, 200, seed) == sample_heterodyne(FIG5, 200, seed)

    def test_window_split(self):
        seed = SeedSpec(11, 3)
        x_full, p_full = heterodyne_arrays(FIG5, 600, seed)
        x_a, p_a = heterodyne_arrays(FIG5, 200, seed, start=0)
        x_b, p_b = heterodyne_arrays(FIG5, 400, seed, start=200)
        assert np.array_equal(x_full, np.concatenate([x_a, x_b]))
        assert np.array_equal(p_full, np.concatenate([p_a, p_b]))

    def test_vacuum_sample_covariance(self):
        x, p = heterodyne_arrays(GaussianStateSpec(1.0, 1.0), 100_000, SeedSpec(6, 5))
        n = x.size
        for moment, target in ((np.mean(x * x), 1.0), (np.mean(p * p), 1.0)):
            assert abs(float(moment) - target) < 3 * target * math.sqrt(2 / n)
        corr = float(np.mean(x * p))
        assert abs(corr) < 3 / math.sqrt(n)

    def test_squeezed_sample_covariance(self):
        x, p = heterodyne_arrays(FIG5, 100_000, SeedSpec(7))
        n = x.size
        cov = effective_covariance(FIG5, SchemeKind.HETERODYNE)
        assert abs(float(np.mean(x * x)) - cov.g1) < 3 * cov.g1 * math.sqrt(2 / n)
        assert abs(float(np.mean(p * p)) - cov.g2) < 3 * cov.g2 * math.sqrt(2 / n)
        corr = float(np.mean(x * p))
        assert abs(corr) < 3 * math.sqrt(cov.g1 * cov.g2 / n)

    def test_rotated_state_correlation(self):
        spec = GaussianStateSpec(2.0, 10.0, phi=math.pi / 4, eta=0.5)
        cov = effective_covariance(spec, SchemeKind.HETERODYNE)
        x, p = heterodyne_arrays(spec, 200_000, SeedSpec(8))
        m12 = float(np.mean(x * p))
        target = cov.g3 / math.sqrt(2)
        assert abs(m12 - target) < 3 * math.sqrt(cov.g1 * cov.g2 / x.size) + 0.02

    def test_unbiasedness_over_trials(self):
        # mean of the (1/n) sum z z^T estimator converges entrywise to G_het
        spec = GaussianStateSpec(1.0, 2.0, eta=0.8)
        cov = effective_covariance(spec, SchemeKind.HETERODYNE)
        trials, n = 2000, 100
        acc = np.zeros(3)
        for t in range(trials):
            x, p = heterodyne_arrays(spec, n, SeedSpec(9, t))
            acc += [np.mean(x * x), np.mean(p * p), np.mean(x * p)]
        acc /= trials
        for value, target in zip(acc, (cov.g1, cov.g2, 0.0)):
            se = max(target, 1.0) * math.sqrt(2 / (n * trials))
            assert abs(value - target) < 4 * se

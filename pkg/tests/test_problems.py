"""Oracle checks for the problem definitions and their gradient streams."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgdtime.problems import (
    STEP_CAP,
    ProblemSpec,
    StreamPool,
    _fresh_generator,
    logreg_from_data,
    make_quadratic,
    make_synthetic_logreg,
    make_toy_adversarial,
    sample_gradient,
    split_cursor,
    stream_cursor,
)


def builtin_problems():
    """One instance of each built-in family, modest noise."""
    return [
        make_toy_adversarial(sigma=10.0, x0=-30.0, n=4),
        make_quadratic(dimension=3, L=2.0, sigma2=4.0, x0=[1.0, -2.0, 0.5], n=4),
        make_quadratic(dimension=2, L=1.0, sigma2=1.0, x0=[3.0, 0.0], n=2,
                       heterogeneous_shift=[0.5, -0.25]),
        make_synthetic_logreg(dimension=3, samples=16, n=4, seed=7),
    ]


class TestToyAdversarial:
    def test_constants(self):
        spec = make_toy_adversarial(sigma=10.0, x0=-30.0, n=100)
        assert spec.dimension == 1
        assert spec.smoothness_L == 1.0
        assert spec.noise_sigma2 == 100.0  # sigma is a standard deviation
        assert spec.workers_n == 100
        assert spec.start_point[0] == -30.0
        # f(-30) = 900/4 on the flat side
        assert spec.delta_gap == pytest.approx(225.0, rel=1e-12)

    def test_exact_gradient_piecewise(self):
        spec = make_toy_adversarial(sigma=0.0, x0=-30.0, n=2)
        assert spec.grad(np.array([3.0]))[0] == 3.0
        assert spec.grad(np.array([-4.0]))[0] == -2.0
        assert spec.grad(np.array([0.0]))[0] == 0.0

    def test_zero_noise_draws_are_exact(self):
        spec = make_toy_adversarial(sigma=0.0, x0=-1.0, n=3)
        for cursor in (stream_cursor(0, 0), stream_cursor(5, 2)):
            s = sample_gradient(spec, 1, np.array([3.0]), cursor)
            assert s.gradient[0] == 3.0

    def test_monte_carlo_mean_near_exact(self):
        # 5 * sigma / sqrt(N) = 5*10/316.2 < 0.2
        spec = make_toy_adversarial(sigma=10.0, x0=-30.0, n=1)
        point = np.array([-4.0])
        total = 0.0
        N = 10**5
        for rnd in range(N):
            total += sample_gradient(spec, 0, point,
                                     stream_cursor(rnd, 0)).gradient[0]
        assert abs(total / N - (-2.0)) < 0.2

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            make_toy_adversarial(sigma=-1.0)
        with pytest.raises(ValueError):
            make_toy_adversarial(n=0)


class TestQuadratic:
    def test_constants_at_distance_two(self):
        spec = make_quadratic(dimension=4, L=1.0, sigma2=0.0,
                              x0=[2.0, 0.0, 0.0, 0.0], n=2)
        assert spec.dist_B == pytest.approx(2.0, rel=1e-12)
        assert spec.delta_gap == pytest.approx(2.0, rel=1e-12)

    def test_gradient_zero_at_center(self):
        spec = make_quadratic(dimension=3, L=1.5, sigma2=0.0,
                              x0=[1.0, 1.0, 1.0], n=2)
        g = sample_gradient(spec, 0, np.zeros(3), stream_cursor(0, 0)).gradient
        assert np.all(g == 0.0)

    def test_heterogeneous_mean_gradient_matches_homogeneous(self):
        shift = [0.7, -0.3]
        het = make_quadratic(dimension=2, L=2.0, sigma2=0.0, x0=[1.0, 1.0],
                             n=4, heterogeneous_shift=shift)
        hom = make_quadratic(dimension=2, L=2.0, sigma2=0.0, x0=[1.0, 1.0], n=4)
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.standard_normal(2)
            mean = np.mean([het.worker_grad(i, x) for i in range(4)], axis=0)
            np.testing.assert_allclose(mean, hom.grad(x), rtol=1e-12)
        # worker objectives genuinely differ
        x = np.zeros(2)
        assert np.any(het.worker_grad(0, x) != het.worker_grad(1, x))
        assert het.heterogeneous and not hom.heterogeneous

    def test_f_inf_for_heterogeneous_split(self):
        # inf_x mean_i (L/2)||x - c_i||^2 = (L/2)||s||^2 at x = 0
        shift = [0.5, -0.25]
        spec = make_quadratic(dimension=2, L=1.0, sigma2=0.0, x0=[3.0, 0.0],
                              n=2, heterogeneous_shift=shift)
        assert spec.f_inf == pytest.approx(0.5 * (0.5**2 + 0.25**2), rel=1e-12)
        assert spec.f_gap(np.zeros(2)) == pytest.approx(0.0, abs=1e-15)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            make_quadratic(dimension=2, L=0.0, sigma2=1.0, x0=[0.0, 0.0], n=2)
        with pytest.raises(ValueError):
            make_quadratic(dimension=2, L=1.0, sigma2=1.0, x0=[0.0, 0.0], n=3,
                           heterogeneous_shift=[1.0, 0.0])
        with pytest.raises(ValueError):
            make_quadratic(dimension=2, L=1.0, sigma2=1.0, x0=[0.0], n=2)


class TestSyntheticLogreg:
    def test_all_same_labels_bias_sign(self):
        rng = np.random.default_rng(3)
        X = np.column_stack([np.ones(8), rng.standard_normal((8, 2))])
        for label in (1.0, -1.0):
            spec = logreg_from_data(X, np.full(8, label), n=2)
            g = spec.grad(np.zeros(3))
            # exact gradient at 0 is -(X^T y)/(2m): bias coordinate has the
            # opposite sign of the label mean
            assert np.sign(g[0]) == -label

    def test_single_sample_is_deterministic(self):
        spec = make_synthetic_logreg(dimension=2, samples=1, n=2, seed=0)
        assert spec.noise_sigma2 == 0.0
        x = np.array([0.3, -0.1])
        draws = [sample_gradient(spec, 0, x, stream_cursor(0, s)).gradient
                 for s in range(4)]
        for d in draws[1:]:
            np.testing.assert_array_equal(d, draws[0])
        np.testing.assert_allclose(draws[0], spec.grad(x), rtol=1e-12)

    def test_smoothness_matches_brute_force_eigenvalue(self):
        spec = make_synthetic_logreg(dimension=2, samples=8, n=2, seed=11)
        X = spec.model.X
        lam_max = np.linalg.eigvalsh(X.T @ X)[-1]
        assert spec.smoothness_L == pytest.approx(lam_max / 32.0, rel=1e-12)

    def test_delta_gap_is_reachable(self):
        spec = make_synthetic_logreg(dimension=3, samples=16, n=2, seed=5)
        assert spec.delta_gap >= 0.0
        assert spec.f_gap(spec.start_point) == pytest.approx(spec.delta_gap,
                                                             rel=1e-12)
        # the cached minimizer really is a stationary point
        assert spec.delta_gap <= spec.f(spec.start_point)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            make_synthetic_logreg(dimension=2, samples=0, n=2, seed=0)
        with pytest.raises(ValueError):
            logreg_from_data(np.ones((4, 2)), np.array([1.0, 2.0, 1.0, -1.0]), n=2)


class TestOracleContracts:
    @pytest.mark.parametrize("spec", builtin_problems(),
                             ids=lambda s: s.kind + ("_het" if s.heterogeneous else ""))
    def test_unbiasedness(self, spec):
        """Mean of 1e5 draws within 5*sqrt(sigma2/N) per coordinate."""
        N = 10**5
        point = spec.start_point * 0.1
        gen = _fresh_generator(0, 0, 0)
        if spec.heterogeneous:
            exact = spec.worker_grad(0, point)
        else:
            exact = spec.grad(point)
        Z = np.broadcast_to(point, (N, spec.dimension))
        draws = spec.model.draw_block(gen, N)
        rows = spec.model.stoch_rows(Z, draws, np.zeros(N, dtype=int))
        bound = 5.0 * np.sqrt(spec.noise_sigma2 / N) + 1e-12
        assert np.all(np.abs(rows.mean(axis=0) - exact) <= bound)

    @pytest.mark.parametrize("spec", builtin_problems(),
                             ids=lambda s: s.kind + ("_het" if s.heterogeneous else ""))
    def test_variance_bound(self, spec):
        """Empirical E||noise||^2 <= 1.1 * noise_sigma2 at 10 random points."""
        if spec.noise_sigma2 == 0.0:
            return
        rng = np.random.default_rng(1)
        gen = _fresh_generator(0, 0, 1)
        N = 20_000
        for _ in range(10):
            point = rng.standard_normal(spec.dimension)
            Z = np.broadcast_to(point, (N, spec.dimension))
            draws = spec.model.draw_block(gen, N)
            rows = spec.model.stoch_rows(Z, draws, np.zeros(N, dtype=int))
            noise = rows - spec.model.grad_rows(Z[:1], np.zeros(1, dtype=int))
            second_moment = float(np.mean(np.sum(noise * noise, axis=1)))
            assert second_moment <= 1.1 * spec.noise_sigma2

    @pytest.mark.parametrize("spec", builtin_problems(),
                             ids=lambda s: s.kind + ("_het" if s.heterogeneous else ""))
    def test_smoothness_spot_check(self, spec):
        rng = np.random.default_rng(2)
        L = spec.smoothness_L
        for _ in range(1000):
            x = rng.standard_normal(spec.dimension) * 3.0
            y = rng.standard_normal(spec.dimension) * 3.0
            lhs = np.linalg.norm(spec.grad(x) - spec.grad(y))
            assert lhs <= L * np.linalg.norm(x - y) * (1.0 + 1e-9)

    def test_same_cursor_same_sample(self):
        spec = make_quadratic(dimension=2, L=1.0, sigma2=1.0, x0=[1.0, 0.0], n=2)
        c = stream_cursor(3, 4)
        a = sample_gradient(spec, 1, np.array([0.5, 0.5]), c, seed=9)
        b = sample_gradient(spec, 1, np.array([0.5, 0.5]), c, seed=9)
        np.testing.assert_array_equal(a.gradient, b.gradient)
        assert a.noise_draw_id == b.noise_draw_id == c

    def test_homogeneous_workers_answer_identically(self):
        spec = make_quadratic(dimension=2, L=1.0, sigma2=2.0, x0=[1.0, 0.0], n=3)
        x = np.array([0.2, -0.7])
        Z = x[None, :]
        gen_draws = _fresh_generator(0, 0, 0)
        d = spec.model.draw_block(gen_draws, 1)
        rows = [spec.model.stoch_rows(Z, d, np.array([w])) for w in range(3)]
        for r in rows[1:]:
            np.testing.assert_array_equal(r, rows[0])

    def test_worker_out_of_range(self):
        spec = make_toy_adversarial(n=2)
        with pytest.raises(ValueError):
            sample_gradient(spec, 2, np.array([0.0]), stream_cursor(0, 0))
        with pytest.raises(ValueError):
            spec.worker_grad(5, np.array([0.0]))


class TestStreams:
    def test_pool_matches_fresh_generators(self):
        pool = StreamPool()
        for seed, worker, rnd in [(0, 0, 0), (1, 3, 7), (2**40, 17, 123)]:
            a = pool.generator(seed, worker, rnd).standard_normal(8)
            b = _fresh_generator(seed, worker, rnd).standard_normal(8)
            np.testing.assert_array_equal(a, b)

    def test_pool_rewinds(self):
        pool = StreamPool()
        first = pool.generator(5, 1, 2).standard_normal(4)
        pool.generator(6, 0, 0).standard_normal(100)
        again = pool.generator(5, 1, 2).standard_normal(4)
        np.testing.assert_array_equal(first, again)

    def test_distinct_streams_differ(self):
        base = _fresh_generator(0, 0, 0).standard_normal(4)
        for key in [(0, 0, 1), (0, 1, 0), (1, 0, 0)]:
            other = _fresh_generator(*key).standard_normal(4)
            assert np.any(other != base)

    @given(rnd=st.integers(min_value=0, max_value=2**30),
           step=st.integers(min_value=0, max_value=STEP_CAP - 1))
    @settings(max_examples=200, deadline=None)
    def test_cursor_round_trip(self, rnd, step):
        assert split_cursor(stream_cursor(rnd, step)) == (rnd, step)

    def test_cursor_is_monotone_in_round(self):
        assert stream_cursor(1, 0) > stream_cursor(0, STEP_CAP - 1)

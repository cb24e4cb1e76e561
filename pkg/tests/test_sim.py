"""Coupling simulators: parity, determinism, statistical gates."""

import math

import numpy as np
import pytest
from scipy import stats

from renewbound import dist, sim
from renewbound.bounds import BoundParams, assemble_certificate, band_radius
from renewbound.dist import CapExceededError, InvalidInputError, UniformComponent
from renewbound.rng import SeedableRngStream


def mirror_walk(model, x, r, rng):
    """Reference reimplementation of the gap walk over dist.sample draws."""
    y = x
    s = 0.0
    steps = 0
    lower_draws = []
    upper_draws = []
    while abs(y) > r:
        xv = dist.sample(model, rng)
        if y >= 0.0:
            lower_draws.append(xv)
            s += xv
            y -= xv
        else:
            upper_draws.append(xv)
            y += xv
        steps += 1
    t = s + (y if y < 0.0 else 0.0)
    if steps == 0:
        t = 0.0
    return t, s + abs(y), abs(y), steps, lower_draws, upper_draws


class TestStepOneWalk:
    def test_start_inside_band_is_immediate(self, uniform_cert):
        model = dist.uniform(1.0, 2.0)
        rng = SeedableRngStream(seed=1, stream_id=0)
        out = sim.step1_walk(model, uniform_cert.r / 2.0, uniform_cert.r, rng)
        assert out.time == 0.0
        assert out.steps == 0
        assert out.gap == uniform_cert.r / 2.0
        assert rng.counter == 0

    def test_matches_reference_recursion(self, case):
        _, model, _, params, _ = case
        r = band_radius(model, params)
        for sid in range(5):
            a = SeedableRngStream(seed=5, stream_id=sid)
            b = SeedableRngStream(seed=5, stream_id=sid)
            out = sim.step1_walk(model, 6.0, r, a)
            t, tbar, gap, steps, _, _ = mirror_walk(model, 6.0, r, b)
            assert out.time == t
            assert out.time_upper == tbar
            assert out.gap == gap
            assert out.steps == steps
            assert a.counter == b.counter

    def test_credited_time_never_exceeds_upper_version(self, uniform_model):
        r = 0.6
        for sid in range(20):
            rng = SeedableRngStream(seed=9, stream_id=sid)
            out = sim.step1_walk(uniform_model, 4.0, r, rng)
            assert out.time <= out.time_upper
            assert 0.0 <= out.gap <= r

    def test_requires_positive_radius(self, uniform_model):
        rng = SeedableRngStream(seed=0, stream_id=0)
        with pytest.raises(InvalidInputError):
            sim.step1_walk(uniform_model, 1.0, 0.0, rng)

    def test_step_cap_trips(self, uniform_model):
        rng = SeedableRngStream(seed=0, stream_id=0)
        with pytest.raises(CapExceededError):
            sim.step1_walk(uniform_model, 50.0, 0.5, rng, step_cap=3)


class TestStepTwoAttempt:
    def test_zero_gap_succeeds_for_free(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        rng = SeedableRngStream(seed=2, stream_id=0)
        out = sim.step2_attempt(uniform_model, comp, 0.0, rng)
        assert out.success and out.trials == 0 and out.k == 0
        assert out.epoch_max == out.epoch_min == 0.0

    def test_success_aligns_the_epochs(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        z = 1.2
        k_want = math.ceil(z / comp.L)
        succ = fails = 0
        for sid in range(400):
            rng = SeedableRngStream(seed=3, stream_id=sid)
            out = sim.step2_attempt(uniform_model, comp, z, rng)
            assert out.k == k_want
            if out.success:
                succ += 1
                assert out.epoch_max == out.epoch_min
                assert out.trials == k_want
            else:
                fails += 1
                assert out.epoch_max >= out.epoch_min
                assert out.trials <= k_want
        assert succ > 0 and fails > 0

    def test_success_frequency_respects_floor(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        z = comp.L  # one slot, success probability exactly eta
        n = 4000
        succ, _, _, _ = sim.split_attempts(uniform_model, comp, z, n, seed=4)
        p_hat = succ.mean()
        se = math.sqrt(comp.eta * (1 - comp.eta) / n)
        assert abs(p_hat - comp.eta) < 5 * se

    def test_negative_gap_rejected(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        rng = SeedableRngStream(seed=0, stream_id=0)
        with pytest.raises(InvalidInputError):
            sim.step2_attempt(uniform_model, comp, -0.1, rng)


class TestRunCoupling:
    def test_trace_reassembles_its_own_time(self, case):
        _, model, comp, params, _ = case
        cert = assemble_certificate(model, comp, params)
        for sid in range(10):
            rng = SeedableRngStream(seed=6, stream_id=sid)
            trace = sim.run_coupling(model, comp, cert, 3.0, rng)
            assert trace.iterations[-1][1].success
            assert all(not s.success for _, s in trace.iterations[:-1])
            # the coupling clock runs on the lower copy: each cycle adds the
            # walk's credited time plus the cascade's lower-copy epoch
            total = 0.0
            for walk, split in trace.iterations:
                total += walk.time + split.epoch_min
            assert trace.t_star == pytest.approx(total, rel=1e-9, abs=1e-12)

    def test_matches_batch_driver_bit_for_bit(self, case):
        _, model, comp, params, _ = case
        cert = assemble_certificate(model, comp, params)
        n, seed, base = 16, 7, 100
        times = sim.coupling_times(model, comp, cert, 2.0, n, seed, stream_base=base)
        for i in range(n):
            rng = SeedableRngStream(seed=seed, stream_id=base + i)
            trace = sim.run_coupling(model, comp, cert, 2.0, rng)
            assert trace.t_star == times[i]

    def test_invalid_certificate_is_refused(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        bad = BoundParams(beta=1.0, delta=0.5, theta=0.9)
        rng = SeedableRngStream(seed=0, stream_id=0)
        from renewbound.bounds import InvalidCertificateError

        with pytest.raises(InvalidCertificateError):
            sim.run_coupling(uniform_model, comp, bad, 2.0, rng)

    def test_trace_serializes(self, uniform_cert, uniform_model):
        rng = SeedableRngStream(seed=8, stream_id=0)
        comp = uniform_cert.component
        trace = sim.run_coupling(uniform_model, comp, uniform_cert, 2.0, rng)
        d = trace.to_dict()
        assert d["t_star"] == trace.t_star
        assert len(d["iterations"]) == trace.n_cycles


class TestThreadInvariance:
    def test_coupling_times_identical_across_thread_counts(self, case):
        _, model, comp, params, _ = case
        cert = assemble_certificate(model, comp, params)
        one = sim.coupling_times(model, comp, cert, 2.0, 500, seed=11, threads=1)
        four = sim.coupling_times(model, comp, cert, 2.0, 500, seed=11, threads=4)
        assert np.array_equal(one, four)

    def test_tv_estimate_identical_across_thread_counts(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        params = BoundParams(beta=1.0, delta=0.5, theta=7e-3)
        a = sim.estimate_tv(uniform_model, comp, params, 2.0, 8.0, 400, seed=1, threads=1)
        b = sim.estimate_tv(uniform_model, comp, params, 2.0, 8.0, 400, seed=1, threads=3)
        assert a == b


class TestWalkHitTimes:
    def test_matches_per_stream_walks(self, exp_model):
        r = 3.0
        n, seed, base = 32, 13, 50
        t, tbar, gap, steps = sim.walk_hit_times(
            exp_model, 5.0, r, n, seed, stream_base=base
        )
        for i in range(4):
            rng = SeedableRngStream(seed=seed, stream_id=base + i)
            out = sim.step1_walk(exp_model, 5.0, r, rng)
            assert out.time == t[i]
            assert out.time_upper == tbar[i]
            assert out.gap == gap[i]
            assert out.steps == steps[i]

    def test_moment_stays_under_lyapunov_cap(self, exp_model):
        # E exp(lam * T) <= exp(beta * x) for lam = delta * beta at the
        # matching band radius
        beta, delta = 0.5, 0.5
        params = BoundParams(beta=beta, delta=delta, theta=0.5)
        r = band_radius(exp_model, params)
        x = 5.0
        n = 20000
        t, _, _, _ = sim.walk_hit_times(exp_model, x, r, n, seed=17)
        vals = np.exp(params.lam * t)
        mean = vals.mean()
        se = vals.std(ddof=1) / math.sqrt(n)
        assert mean <= math.exp(beta * x) + 3 * se


class TestSplitAttemptsDriver:
    def test_matches_per_stream_attempts(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        z = 1.0
        n, seed, base = 32, 19, 10
        succ, hi, lo, trials = sim.split_attempts(
            uniform_model, comp, z, n, seed, stream_base=base
        )
        for i in range(4):
            rng = SeedableRngStream(seed=seed, stream_id=base + i)
            out = sim.step2_attempt(uniform_model, comp, z, rng)
            assert out.success == bool(succ[i])
            assert out.epoch_max == hi[i]
            assert out.epoch_min == lo[i]
            assert out.trials == trials[i]

    def test_validates_inputs(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        with pytest.raises(InvalidInputError):
            sim.split_attempts(uniform_model, comp, -1.0, 10, seed=0)
        with pytest.raises(InvalidInputError):
            sim.split_attempts(uniform_model, comp, 1.0, 0, seed=0)


class TestTimeGrid:
    def test_starts_at_x_and_spans_the_decay_scale(self):
        grid = sim.default_time_grid(2.0, 0.1, n=16)
        assert grid[0] == 2.0
        assert grid[-1] == pytest.approx(2.0 + 200.0, rel=1e-12)
        assert grid.size == 16
        assert np.all(np.diff(grid) > 0)

    def test_validates_inputs(self):
        with pytest.raises(InvalidInputError):
            sim.default_time_grid(2.0, 0.0)
        with pytest.raises(InvalidInputError):
            sim.default_time_grid(2.0, 0.1, n=1)


class TestEstimateTail:
    def test_survival_is_nonincreasing_and_bounded(self, case):
        _, model, comp, params, _ = case
        est = sim.estimate_tail(model, comp, params, 2.0, n=400, seed=23)
        assert np.all(np.diff(est.survival) <= 0)
        assert np.all((0 <= est.survival) & (est.survival <= 1))
        want_se = np.sqrt(est.survival * (1 - est.survival) / est.n)
        assert est.stderr == pytest.approx(want_se)

    def test_explicit_grid_is_respected(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        params = BoundParams(beta=1.0, delta=0.5, theta=7e-3)
        grid = [2.0, 5.0, 9.0]
        est = sim.estimate_tail(
            uniform_model, comp, params, 2.0, t_grid=grid, n=200, seed=3
        )
        assert est.t_grid == pytest.approx(grid)

    def test_replica_floor(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        params = BoundParams(beta=1.0, delta=0.5, theta=7e-3)
        with pytest.raises(InvalidInputError):
            sim.estimate_tail(uniform_model, comp, params, 2.0, n=50, seed=0)


class TestRenewalSimulation:
    def test_epochs_accumulate_from_the_delay(self, uniform_model):
        rng = SeedableRngStream(seed=29, stream_id=0)
        epochs, residual = sim.simulate_renewal(uniform_model, 0.5, 30.0, rng)
        assert epochs[0] == 0.5
        gaps = np.diff(epochs)
        assert np.all(gaps >= 1.0 - 1e-12) and np.all(gaps <= 2.0 + 1e-12)
        assert 0.0 < residual <= 2.0

    def test_delay_past_horizon_leaves_no_epochs(self, uniform_model):
        rng = SeedableRngStream(seed=0, stream_id=0)
        epochs, residual = sim.simulate_renewal(uniform_model, 7.5, 5.0, rng)
        assert epochs.size == 0
        assert residual == pytest.approx(2.5)
        assert rng.counter == 0

    def test_zero_delay_poisson_counts(self, exp_model):
        # with exponential gaps and zero delay the count over (0, h] is
        # Poisson(h), so the mean epoch count equals h
        h = 2.0
        n = 20000
        mean, se = sim.estimate_renewal_measure(exp_model, 0.0, 0.0, h, n, seed=31)
        assert abs(mean - h) < 4 * se

    def test_stationary_delay_flattens_the_measure(self, uniform_model):
        # under the stationary delay the expected count of any width-h
        # interval is h / mean, far from the synchronized zero-delay value
        delay_model = dist.stationary_delay_model(uniform_model)
        h = 0.75
        n = 20000
        mean, se = sim.estimate_renewal_measure(
            uniform_model, 0.0, 10.0, h, n, seed=37, delay_model=delay_model
        )
        assert abs(mean - h / uniform_model.mean) < 4 * se

    def test_residual_life_is_memoryless_for_exponential(self, exp_model):
        out = sim.residual_life_samples(exp_model, 0.0, 5.0, 8000, seed=41)
        ks = stats.kstest(out, lambda v: 1.0 - np.exp(-v))
        assert ks.pvalue > 0.01


class TestEstimateTv:
    def test_sandwich_orders_correctly(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        params = BoundParams(beta=1.0, delta=0.5, theta=7e-3)
        est = sim.estimate_tv(uniform_model, comp, params, 2.0, 6.0, 4000, seed=43)
        assert est.lower <= est.upper + 3 * (est.lower_stderr + est.upper_stderr)
        assert 0.0 <= est.lower <= 1.0
        assert 0.0 <= est.upper <= 1.0

    def test_upper_estimate_decays_in_t(self, uniform_model):
        comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
        params = BoundParams(beta=1.0, delta=0.5, theta=7e-3)
        early = sim.estimate_tv(uniform_model, comp, params, 2.0, 4.0, 2000, seed=47)
        late = sim.estimate_tv(uniform_model, comp, params, 2.0, 12.0, 2000, seed=47)
        assert late.upper <= early.upper


class TestCountInequality:
    def test_holds_for_exponential_with_exact_mass(self, exp_model):
        comp = UniformComponent(c=1.0, L=1.0, eta_tilde=0.02)
        params = BoundParams(beta=0.5, delta=0.5, theta=1.2e-7)
        h = 0.5
        out = sim.check_count_inequality(
            exp_model, comp, params, 3.0, 2.0, h, 4000, seed=53, u0=h
        )
        assert out.holds
        assert out.u0 == h
        assert out.rhs == pytest.approx(
            (out.u0 + 1.0) * (out.rhs / (out.u0 + 1.0)), rel=1e-12
        )

    def test_estimates_the_mass_when_not_given(self, exp_model):
        comp = UniformComponent(c=1.0, L=1.0, eta_tilde=0.02)
        params = BoundParams(beta=0.5, delta=0.5, theta=1.2e-7)
        h = 0.5
        out = sim.check_count_inequality(
            exp_model, comp, params, 3.0, 2.0, h, 4000, seed=59
        )
        assert out.holds
        # zero-delay epoch count of (0, h] for unit-rate gaps has mean h
        assert abs(out.u0 - h) < 0.1


class TestSupermartingale:
    def test_holds_at_the_certified_radius(self, case):
        _, model, _, params, _ = case
        r = band_radius(model, params)
        out = sim.check_supermartingale(
            model, params.beta, params.lam, r, 4.0, n=4000, seed=61
        )
        assert out.holds
        assert out.rho <= 1.0 + 1e-12
        assert out.m0 == pytest.approx(math.exp(params.beta * 4.0))

    def test_rejects_non_contracting_radius(self, uniform_model):
        params = BoundParams(beta=1.0, delta=0.5, theta=7e-3)
        r = band_radius(uniform_model, params)
        with pytest.raises(InvalidInputError):
            sim.check_supermartingale(
                uniform_model, params.beta, params.lam, r / 2.0, 4.0, n=100
            )


class TestRateFit:
    def test_recovers_noiseless_decay(self):
        t = np.linspace(0.0, 40.0, 25)
        v = 2.5 * np.exp(-0.17 * t)
        fit = sim.fit_exponential_rate(t, v)
        assert fit.rate == pytest.approx(0.17, rel=1e-9)
        assert fit.amplitude == pytest.approx(2.5, rel=1e-9)
        assert fit.residual == pytest.approx(0.0, abs=1e-9)
        assert fit.n_used == 25

    def test_weights_prioritize_low_noise_points(self):
        t = np.linspace(0.0, 20.0, 21)
        v = np.exp(-0.3 * t)
        v_noisy = v.copy()
        v_noisy[-1] *= 40.0  # corrupt one point, then down-weight it
        w = np.ones_like(v)
        w[-1] = 1e-12
        fit = sim.fit_exponential_rate(t, v_noisy, weights=w)
        assert fit.rate == pytest.approx(0.3, rel=1e-6)

    def test_drops_nonpositive_points_with_warning(self):
        t = np.linspace(0.0, 10.0, 11)
        v = np.exp(-0.2 * t)
        v[3] = 0.0
        with pytest.warns(UserWarning):
            fit = sim.fit_exponential_rate(t, v)
        assert fit.n_used == 10
        assert fit.rate == pytest.approx(0.2, rel=1e-9)

    def test_needs_three_positive_points(self):
        with pytest.raises(InvalidInputError):
            sim.fit_exponential_rate([1.0, 2.0], [0.5, 0.25])


class TestSamplingMarginals:
    """Distributional checks of every stream the coupling consumes."""

    def test_walk_subsequences_follow_the_model(self, case):
        _, model, _, params, _ = case
        r = band_radius(model, params)
        lower, upper = [], []
        for sid in range(600):
            rng = SeedableRngStream(seed=67, stream_id=sid)
            _, _, _, _, lo, up = mirror_walk(model, 6.0, r, rng)
            lower.extend(lo)
            upper.extend(up)
        assert len(lower) >= 600
        ks_lo = stats.kstest(np.asarray(lower), lambda v: [model.cdf(t) for t in v])
        assert ks_lo.pvalue > 0.01
        if len(upper) >= 100:
            ks_up = stats.kstest(
                np.asarray(upper), lambda v: [model.cdf(t) for t in v]
            )
            assert ks_up.pvalue > 0.01

    def test_split_legs_follow_the_model(self, case):
        _, model, comp, _, _ = case
        shift = comp.L / 3.0
        firsts, seconds = [], []
        rng = SeedableRngStream(seed=71, stream_id=0)
        for _ in range(3000):
            xp, xpp, _ = dist.split_pair(model, comp, shift, rng)
            firsts.append(xp)
            seconds.append(xpp)
        for data in (firsts, seconds):
            ks = stats.kstest(np.asarray(data), lambda v: [model.cdf(t) for t in v])
            assert ks.pvalue > 0.01

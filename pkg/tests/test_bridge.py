import numpy as np
import pytest

import bridgerates as br

P11_HALF = 0.6839397205857212
P12_HALF = 0.31606027941427883
GEN_RATIO_T0 = 2.163953413738653  # P11(0.5) / P12(0.5)


@pytest.fixture(scope="module")
def spec_half(symmetric_two):
    return br.BridgeSpec(symmetric_two, 0, 1, 0.5)


@pytest.fixture(scope="module")
def spec_one(symmetric_two):
    return br.BridgeSpec(symmetric_two, 0, 1, 1.0)


def test_bridge_rows_are_distributions(spec_one):
    for (s, t) in ((0.0, 0.3), (0.2, 0.8), (0.5, 0.999)):
        for a in range(2):
            row = br.bridge_transition_row(spec_one, a, s, t)
            assert np.all(row >= -1e-14)
            assert row.sum() == pytest.approx(1.0, abs=1e-12)


def test_bridge_hits_terminal_state(spec_one):
    # as t -> t0 the law collapses onto the conditioned endpoint
    for a in range(2):
        row = br.bridge_transition_row(spec_one, a, 0.1, 1.0 - 1e-9)
        assert row[1] == pytest.approx(1.0, abs=1e-6)


def test_bridge_chapman_kolmogorov(ring_three):
    spec = br.BridgeSpec(ring_three, 0, 2, 1.4)
    s, t, u = 0.2, 0.7, 1.1
    for a in range(3):
        direct = br.bridge_transition_row(spec, a, s, u)
        stepped = np.zeros(3)
        for c in range(3):
            stepped += br.bridge_transition(spec, a, c, s, t) * br.bridge_transition_row(
                spec, c, t, u
            )
        assert np.allclose(direct, stepped, atol=1e-10)


def test_bridge_generator_frozen_ratio(spec_half):
    # at time zero the conditioned 0 -> 1 rate is Q_01 P_11(t0)/P_01(t0)
    got = br.bridge_generator(spec_half, 0, 1, 0.0)
    assert got == pytest.approx(GEN_RATIO_T0, abs=1e-10)
    assert got == pytest.approx(P11_HALF / P12_HALF, abs=1e-12)


def test_bridge_generator_finite_difference(spec_one):
    # rows of the kernel differentiate to the inhomogeneous generator
    t, h = 0.35, 1e-6
    for a in range(2):
        for b in range(2):
            if a == b:
                continue
            fd = br.bridge_transition(spec_one, a, b, t, t + h) / h
            gen = br.bridge_generator(spec_one, a, b, t)
            assert fd == pytest.approx(gen, rel=1e-3)


def test_bridge_degenerate_at_terminal_time(spec_one):
    # at s = t0 a state other than the endpoint has no time left to reach it
    with pytest.raises(br.DegenerateDenominator):
        br.bridge_transition_row(spec_one, 0, spec_one.t0, spec_one.t0)


def test_sample_bridge_endpoints(spec_one):
    rng = np.random.default_rng(31)
    for _ in range(200):
        path = br.sample_bridge(spec_one, rng)
        assert path.x0 == 0
        seq = np.concatenate([[path.x0], path.destinations])
        assert seq[-1] == 1
        assert np.all(path.jump_times <= spec_one.t0)


def test_sample_bridge_acceptance_rate(spec_half, symmetric_two):
    # rejection sampler acceptance tracks P_xy(t0)
    rng = np.random.default_rng(17)
    n_try = 20_000
    accepted = 0
    for _ in range(n_try):
        path = br.gillespie(symmetric_two, 0, 0.5, rng)
        end = path.destinations[-1] if path.destinations.size else path.x0
        accepted += end == 1
    phat = accepted / n_try
    sigma = (P12_HALF * (1 - P12_HALF) / n_try) ** 0.5
    assert abs(phat - P12_HALF) < 4 * sigma


def test_rejection_budget_exceeded(spec_one):
    with pytest.raises(br.RejectionBudgetExceeded):
        br.sample_bridge(spec_one, np.random.default_rng(0), max_attempts=0)


def test_conditional_samples_deterministic(spec_one):
    a = br.conditional_samples(spec_one, "occupation", 64, seed=5)
    b = br.conditional_samples(spec_one, "occupation", 64, seed=5)
    assert np.array_equal(a.samples, b.samples)


def test_conditional_samples_thread_invariant(spec_one):
    a = br.conditional_samples(spec_one, "flux", 96, seed=5, threads=1)
    b = br.conditional_samples(spec_one, "flux", 96, seed=5, threads=4)
    assert np.array_equal(a.samples, b.samples)


def test_conditional_occupation_rows_sum_to_one(spec_one):
    law = br.conditional_samples(spec_one, "occupation", 256, seed=2)
    assert law.samples.shape == (256, 2)
    assert np.allclose(law.samples.sum(axis=1), 1.0, atol=1e-10)


def test_conditional_flux_divergence_identity(spec_one):
    # every flux block of an x -> y bridge has divergence (e_x - e_y)/t0
    law = br.conditional_samples(spec_one, "flux", 128, seed=11)
    n = 2
    assert law.samples.shape == (128, n + n * n)
    expect = np.array([1.0, -1.0]) / spec_one.t0
    for row in law.samples:
        flux = row[n:].reshape(n, n)
        assert np.allclose(br.divergence(flux), expect, atol=1e-10)


def test_conditional_mean_matches_kernel_quadrature(spec_one):
    # E[occupation of state a] = (1/t0) int_0^t0 p_bridge(x -> a at u) du
    law = br.conditional_samples(spec_one, "occupation", 40_000, seed=23)
    grid = np.linspace(1e-9, spec_one.t0 - 1e-9, 801)
    rows = np.array([br.bridge_transition_row(spec_one, 0, 0.0, u) for u in grid])
    want = np.trapezoid(rows, grid, axis=0) / spec_one.t0
    got = law.samples.mean(axis=0)
    assert np.abs(got - want).max() < 0.01

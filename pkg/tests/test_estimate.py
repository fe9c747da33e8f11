import math

import numpy as np
import pytest

import bridgerates as br
from conftest import random_generator

DVG_73 = 0.08348486100883201
BALL_73_003 = 0.07096824596787867


@pytest.fixture(scope="module")
def occ_oracle(symmetric_two):
    return br.build_oracle(symmetric_two, 0.5, "occupation", 4000, seed=20)


def test_build_oracle_covers_all_pairs(occ_oracle):
    assert sorted(occ_oracle.laws) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert occ_oracle.mode == "occupation"
    assert occ_oracle.d == 2
    for law in occ_oracle.laws.values():
        assert law.n_samples == 4000


def test_build_oracle_cache_roundtrip(symmetric_two, tmp_path):
    a = br.build_oracle(
        symmetric_two, 0.5, "occupation", 300, seed=6, cache_dir=tmp_path
    )
    files = sorted(p.name for p in tmp_path.iterdir())
    assert len(files) == 4
    # second build must reuse the cached draws exactly
    b = br.build_oracle(
        symmetric_two, 0.5, "occupation", 300, seed=6, cache_dir=tmp_path
    )
    for pair in a.laws:
        assert np.array_equal(a.laws[pair].samples, b.laws[pair].samples)
    # and the cache is keyed on the seed
    c = br.build_oracle(
        symmetric_two, 0.5, "occupation", 300, seed=7, cache_dir=tmp_path
    )
    assert len(list(tmp_path.iterdir())) == 8
    assert not np.array_equal(
        a.laws[(0, 1)].samples, c.laws[(0, 1)].samples
    )


def test_infconv_dvg_matches_closed_form(symmetric_two, occ_oracle):
    P = br.transition_at(symmetric_two, 0.5)
    res = br.infconv_dvg(np.array([0.7, 0.3]), occ_oracle, P, seed=20)
    assert res.feasible
    assert res.converged
    assert res.value / 0.5 == pytest.approx(DVG_73, abs=0.01)
    # reported decomposition is a valid pair measure
    assert res.theta.weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(res.theta.weights >= 0)


def test_infconv_dvg_rejects_flux_oracle(symmetric_two):
    flux_oracle = br.build_oracle(symmetric_two, 0.5, "flux", 200, seed=1)
    P = br.transition_at(symmetric_two, 0.5)
    with pytest.raises(ValueError):
        br.infconv_dvg(np.array([0.7, 0.3]), flux_oracle, P)


def test_infconv_dvg_rejects_bad_shape(symmetric_two, occ_oracle):
    P = br.transition_at(symmetric_two, 0.5)
    with pytest.raises(ValueError):
        br.infconv_dvg(np.array([0.5, 0.3, 0.2]), occ_oracle, P)


def test_infconv_bfg_flags_broken_divergence(symmetric_two):
    oracle = br.build_oracle(symmetric_two, 1.0, "flux", 500, seed=3)
    P = br.transition_at(symmetric_two, 1.0)
    res = br.infconv_bfg(
        np.array([0.5, 0.5]), np.array([[0.0, 1.0], [0.2, 0.0]]), oracle, P
    )
    assert not res.feasible
    assert res.value == math.inf


def test_contract_matches_occupation_rate(symmetric_two):
    rho = br.ProbVector([0.7, 0.3])
    out = br.contract_dvg_from_bfg(rho.weights, symmetric_two)
    want = br.dvg_rate(rho, symmetric_two).value
    assert out.value == pytest.approx(want, abs=1e-8)
    assert out.gap < 1e-7
    # minimizing flux is divergence-free and lives on the support of rho Q
    assert np.abs(br.divergence(out.flux)).max() < 1e-8


def test_contract_random_chains():
    rng = np.random.default_rng(40)
    for _ in range(5):
        n = int(rng.integers(2, 5))
        Q = random_generator(rng, n)
        rho = br.ProbVector(rng.dirichlet(np.ones(n)))
        out = br.contract_dvg_from_bfg(rho.weights, Q)
        want = br.dvg_rate(rho, Q).value
        assert out.value == pytest.approx(want, abs=1e-6)


def test_ball_rate_zero_when_center_is_invariant(symmetric_two):
    value, rho = br.ball_rate(symmetric_two, np.array([0.5, 0.5]), 0.05)
    assert value == pytest.approx(0.0, abs=1e-10)


def test_ball_rate_frozen_reference(symmetric_two):
    value, rho = br.ball_rate(symmetric_two, np.array([0.7, 0.3]), 0.03)
    assert value == pytest.approx(BALL_73_003, abs=1e-6)
    # minimizer sits inside the ball, on the invariant-measure side
    assert np.abs(rho - np.array([0.7, 0.3])).sum() <= 0.03 + 1e-8
    assert rho.sum() == pytest.approx(1.0, abs=1e-10)
    assert rho[0] < 0.7


def test_mc_decay_validations(symmetric_two):
    target = np.array([0.7, 0.3])
    with pytest.raises(ValueError):
        br.mc_decay_rate(symmetric_two, target, 0.1, (10,), 1000, 0)
    with pytest.raises(ValueError):
        br.mc_decay_rate(symmetric_two, target, -0.1, (10, 20), 1000, 0)
    with pytest.raises(ValueError):
        br.mc_decay_rate(symmetric_two, target, 0.1, (20, 10), 1000, 0)
    with pytest.raises(ValueError):
        br.mc_decay_rate(symmetric_two, target, 0.1, (10, 20), 1000, 0, kind="nope")
    with pytest.raises(ValueError):
        br.mc_decay_rate(symmetric_two, target, 0.1, (10, 20), 1000, 0, kind="pair")


def test_mc_decay_insufficient_hits(symmetric_two):
    # a tiny ball around a far-from-invariant point is essentially never hit
    with pytest.raises(br.InsufficientHits) as info:
        br.mc_decay_rate(
            symmetric_two, np.array([0.99, 0.01]), 0.005, (60, 90), 2000, 0
        )
    assert hasattr(info.value, "largest_usable_n")


def test_mc_decay_occupation_slope(symmetric_two):
    fit = br.mc_decay_rate(
        symmetric_two, np.array([0.7, 0.3]), 0.05, (20, 30, 40), 60_000, seed=2
    )
    ref, _ = br.ball_rate(symmetric_two, np.array([0.7, 0.3]), 0.05)
    assert fit.slope > 0
    assert 0.5 * ref < fit.slope < 2.0 * ref
    probs = fit.probabilities()
    assert probs.shape == (3,)
    assert np.all(np.diff(fit.neg_log_prob) > 0)


def test_mc_decay_pair_kind_runs(symmetric_two):
    # pair statistic over windows: target the stationary pair measure
    P = br.transition_at(symmetric_two, 1.0)
    mu = br.dtmc_invariant(P).weights
    theta = mu[:, None] * P.probs
    fit = br.mc_decay_rate(
        symmetric_two, theta, 0.35, (6, 10), 4000, seed=4, kind="pair", t0=1.0
    )
    assert fit.slope >= 0
    assert len(fit.hits) == 2

import numpy as np
import pytest

from helpers import geometric_model, hmm_forward_backward, markov_matrix, random_kernel, random_model, random_obs
from semimarkov import (ObservationModel, SemiMarkovModel, SojournLaw, collect_statistics,
                        estimate, initial_statistics, load_bundled, reestimate_a,
                        reestimate_observation, run_filter, simulate, statistics_step,
                        step_G, step_N)
from semimarkov.estimate import FUNCTIONALS, normalized_statistics


def _geometric_case(rng, n, T=999):
    rho = rng.uniform(0.05, 0.5, n)
    p = random_kernel(rng, n)
    model = geometric_model(rho, p, rng.dirichlet(np.ones(n)))
    obs = random_obs(rng, n)
    y = simulate(model, obs, T, int(rng.integers(1 << 30))).observations
    return model, obs, y, hmm_forward_backward(markov_matrix(rho, p), model.p0, obs.c, obs.d, y)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_geometric_equivalence_with_e_step(rng, n):
    model, obs, y, ref = _geometric_case(rng, n)
    est = normalized_statistics(collect_statistics(model, obs, y))
    np.testing.assert_allclose(est.N_hat, ref["N"], atol=1e-10, rtol=0)
    np.testing.assert_allclose(est.J_hat, ref["J"], atol=1e-10, rtol=0)
    for f in range(len(FUNCTIONALS)):
        scale = max(1.0, np.abs(ref["G"][f]).max())
        np.testing.assert_allclose(est.G_hat[f], ref["G"][f], atol=1e-10 * scale, rtol=0)
        np.testing.assert_allclose(est.H_hat[f], ref["H"][f], atol=1e-10 * scale, rtol=0)


def test_initial_statistics_zero():
    model, obs = load_bundled("mixed3")
    stat = initial_statistics(model, obs, 0.1)
    assert not stat.sigma_N.any() and not stat.sigma_G.any()
    # the same-time sums already count y_0
    np.testing.assert_allclose(stat.sigma_H[0].sum(axis=-1) / stat.q.sum(), stat.q / stat.q.sum())


def test_textbook_recursions_match_kernel(rng):
    for _ in range(5):
        N = int(rng.integers(2, 5))
        model = random_model(rng, N, 5)
        obs = random_obs(rng, N)
        y = rng.normal(size=12)
        filt = run_filter(model, obs, y)
        stat = collect_statistics(model, obs, y, filt=filt)
        # raw (unscaled) recursions, driven by the same h_hat sequence
        q = np.array(model.p0) * np.exp(obs.log_gamma(y[0]))
        sN = np.zeros((N, N, N))
        sG = {f: np.zeros((N, N)) for f in FUNCTIONALS}
        for k in range(y.size - 1):
            hk = int(filt.h_hat[k])
            sN = step_N(sN, q, model, obs, hk, y[k + 1])
            for f in FUNCTIONALS:
                sG[f] = step_G(sG[f], q, model, obs, hk, y[k + 1], f)
            from semimarkov import transition_matrix
            q = np.exp(obs.log_gamma(y[k + 1])) * (transition_matrix(model, hk) @ q)
        mass = q.sum()
        est = normalized_statistics(stat)
        np.testing.assert_allclose(sN.sum(axis=-1) / mass, est.N_hat, rtol=1e-10, atol=1e-12)
        for fi, f in enumerate(FUNCTIONALS):
            np.testing.assert_allclose(sG[f].sum(axis=-1) / mass, est.G_hat[fi],
                                       rtol=1e-10, atol=1e-12)


def test_step_scale_argument(rng):
    model = random_model(rng, 3, 4)
    obs = random_obs(rng, 3)
    q = rng.dirichlet(np.ones(3))
    sN = rng.random((3, 3, 3))
    np.testing.assert_allclose(step_N(sN, q, model, obs, 1, 0.3, scale=8.0),
                               step_N(sN, q, model, obs, 1, 0.3) / 8.0, rtol=1e-15)
    sG = rng.random((3, 3))
    np.testing.assert_allclose(step_G(sG, q, model, obs, 1, 0.3, "y", scale=8.0),
                               step_G(sG, q, model, obs, 1, 0.3, lambda v: v) / 8.0, rtol=1e-15)


def test_step_by_step_matches_batch(mixed3):
    model, obs = mixed3
    y = simulate(model, obs, 60, 2).observations
    batch = collect_statistics(model, obs, y)
    stat = initial_statistics(model, obs, y[0])
    for k in range(1, y.size):
        stat = statistics_step(stat, model, obs, y[k])
    a, b = normalized_statistics(stat), normalized_statistics(batch)
    np.testing.assert_allclose(a.N_hat, b.N_hat, rtol=1e-11)
    np.testing.assert_allclose(a.G_hat, b.G_hat, rtol=1e-11, atol=1e-11)
    np.testing.assert_allclose(a.H_hat, b.H_hat, rtol=1e-11, atol=1e-11)
    assert stat.k == batch.k == 60


def test_occupation_partition_and_nonnegativity(bundled):
    _, model, obs = bundled
    y = simulate(model, obs, 400, 6).observations
    stat = collect_statistics(model, obs, y)
    est = normalized_statistics(stat)
    assert abs(est.J_hat.sum() - 400) < 1e-6
    assert np.all(est.J_hat <= 400 + 1e-9)
    assert np.all(stat.sigma_N >= 0) and np.all(stat.sigma_J >= 0)
    assert np.all(stat.sigma_G[2] >= 0)


def test_vector_and_componentwise_sums_agree(mixed3):
    """<sigma(N X), 1> equals the scalar estimate computed from the stacked sums."""
    model, obs = mixed3
    y = simulate(model, obs, 100, 4).observations
    stat = collect_statistics(model, obs, y)
    N = model.n_states
    by_vector = stat.sigma_N.sum(axis=-1)
    by_component = np.array([[sum(stat.sigma_N[j, i, m] for m in range(N)) for i in range(N)]
                             for j in range(N)])
    np.testing.assert_allclose(by_vector, by_component, rtol=1e-12)


def test_jump_count_ground_truth():
    # noiseless-limit observations of a known path with 3 jumps 1 -> 2
    model = SemiMarkovModel([[0, 1], [1, 0]], [SojournLaw.geometric(0.2, 200)] * 2, [1, 0])
    obs = ObservationModel([0.0, 1.0], [1e-3, 1e-3])
    states = np.array([0, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0, 1, 1, 0, 0, 0])
    est = estimate(model, obs, obs.c[states])
    assert abs(est["N_hat"][1, 0] - 3) < 0.05
    assert abs(est["N_hat"][0, 1] - 3) < 0.05
    # occupation of state 1 over the lagged window X_0..X_{T-1}
    assert abs(est["J_hat"][0] - np.sum(states[:-1] == 0)) < 0.5


def test_occupation_ground_truth():
    model = SemiMarkovModel([[0, 1], [1, 0]], [SojournLaw.geometric(0.3, 200)] * 2, [0.5, 0.5])
    obs = ObservationModel([0.0, 1.0], [1e-3, 1e-3])
    states = np.array([0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 1])  # state 1 occupies 7 of X_0..X_9
    est = estimate(model, obs, obs.c[states])
    assert abs(est["J_hat"][0] - 7) < 0.5


def test_centered_functional_mean():
    model = SemiMarkovModel([[0, 1], [1, 0]], [SojournLaw.geometric(0.2, 200)] * 2, [0.5, 0.5])
    obs = ObservationModel([0.0, 0.0], [1.0, 1.0])
    vals = []
    for seed in range(100):
        y = simulate(model, obs, 50, seed).observations
        vals.append(normalized_statistics(collect_statistics(model, obs, y)).G_hat[1].sum())
    vals = np.array(vals)
    assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / np.sqrt(vals.size)


def test_reestimate_geometric_consistency():
    model, obs = load_bundled("geometric2")
    path = simulate(model, obs, 10_000, 21)
    est = estimate(model, obs, path.observations)
    rho = np.array([0.1, 0.2])
    a = est["a_hat"]
    assert abs(a[1, 0] - rho[0]) < 0.02 and abs(a[0, 1] - rho[1]) < 0.02
    np.testing.assert_allclose(a.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(est["c_hat"], obs.c, atol=0.05)
    np.testing.assert_allclose(est["d_hat"], obs.d, atol=0.05)
    assert est["undefined_states"] == []


def test_unvisited_state_marker():
    model = SemiMarkovModel([[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]],
                            [SojournLaw.geometric(0.01, 100)] * 3, [1, 0, 0])
    obs = ObservationModel([0.0, 5.0, 10.0], [0.01, 0.01, 0.01])
    est = estimate(model, obs, np.zeros(30))
    assert 1 in est["undefined_states"] and 2 in est["undefined_states"]
    assert np.all(np.isnan(est["a_hat"][:, 1])) and np.isnan(est["c_hat"][2])
    assert not np.isnan(est["a_hat"][:, 0]).any()


def test_constant_observations_floor_variance():
    model = SemiMarkovModel([[0, 1], [1, 0]], [SojournLaw.geometric(1e-3, 2000)] * 2, [1, 0])
    obs = ObservationModel([0.5, 3.0], [0.1, 0.1])
    stat = collect_statistics(model, obs, np.full(50, 0.5))
    c, d, _ = reestimate_observation(stat)
    assert d[0] ** 2 == pytest.approx(1e-8, rel=1e-12)
    assert abs(c[0] - 0.5) < 1e-10


def test_single_state_occupancy_sample_mean(rng):
    model = SemiMarkovModel([[0, 1], [1, 0]], [SojournLaw.geometric(1e-9, 5000)] * 2, [1, 0])
    obs = ObservationModel([0.0, 50.0], [1.0, 1.0])
    y = rng.normal(0.0, 1.0, 200)
    c, _, _ = reestimate_observation(collect_statistics(model, obs, y))
    assert abs(c[0] - y.mean()) < 1e-10


def test_reestimates_invariant_under_scaling(mixed3):
    model, obs = mixed3
    y = simulate(model, obs, 200, 8).observations
    stat = collect_statistics(model, obs, y)
    a0, _ = reestimate_a(stat)
    c0, d0, _ = reestimate_observation(stat)
    for factor in (1e-100, 1e100):
        scaled = stat.scaled(factor)
        a1, _ = reestimate_a(scaled)
        c1, d1, _ = reestimate_observation(scaled)
        np.testing.assert_array_equal(a1, a0)
        np.testing.assert_array_equal(c1, c0)
        np.testing.assert_array_equal(d1, d0)
    for factor in (2.0**-332, 2.0**332):
        scaled = stat.scaled_arrays(factor)
        np.testing.assert_array_equal(reestimate_a(scaled)[0], a0)
        np.testing.assert_array_equal(reestimate_observation(scaled)[0], c0)


def test_raw_decimal_scaling_is_close_not_exact(mixed3):
    """Multiplying the stored arrays by 10^+-100 rounds each entry; outputs stay within 1e-13."""
    model, obs = mixed3
    y = simulate(model, obs, 120, 12).observations
    ref = stat = initial_statistics(model, obs, y[0])
    for k in range(1, 40):
        ref = stat = statistics_step(stat, model, obs, y[k])
    for factor in (1e100, 1e-100):
        a, b = ref, stat.scaled_arrays(factor)
        for k in range(40, y.size):
            a = statistics_step(a, model, obs, y[k])
            b = statistics_step(b, model, obs, y[k])
            assert (a.h_hat, a.map_state) == (b.h_hat, b.map_state)
            np.testing.assert_allclose(b.q / b.q.sum(), a.q / a.q.sum(), rtol=1e-13, atol=1e-300)
            np.testing.assert_allclose(reestimate_a(b)[0], reestimate_a(a)[0], rtol=1e-13)
            np.testing.assert_allclose(reestimate_observation(b)[0],
                                       reestimate_observation(a)[0], rtol=1e-13)

import numpy as np
import pytest

from helpers import (brute_force_smoother, geometric_model, markov_matrix, random_kernel,
                     random_model, random_obs)
from semimarkov import (ModelError, NumericalGuardError, ObservationModel, SemiMarkovModel,
                        SojournLaw, build_embedded, embedded_filter, embedded_predict,
                        enumerate_posterior, run_filter)


def test_columns_stochastic_and_sparse(rng):
    for _ in range(30):
        model = random_model(rng, int(rng.integers(2, 6)), 7)
        em = build_embedded(model)
        np.testing.assert_allclose(np.asarray(em.C.sum(axis=0)).ravel(), 1.0, atol=1e-12)
        nnz = np.diff(em.C.indptr)
        assert np.all(nnz <= model.n_states)  # N - 1 jump targets plus one stay entry
        assert em.C.min() >= 0


def test_index_layout():
    model = SemiMarkovModel([[0, 1], [1, 0]], [SojournLaw([0.5, 0.5])] * 2, [1, 0])
    em = build_embedded(model)
    assert [em.index(i, r) for r in (1, 2) for i in (0, 1)] == [0, 1, 2, 3]
    np.testing.assert_array_equal(em.lift([0.3, 0.7]), [0.3, 0.7, 0, 0])
    np.testing.assert_array_equal(em.marginal([0.125, 0.25, 0.375, 0.25]), [0.5, 0.5])


def test_depth_one_is_the_jump_kernel(rng):
    p = random_kernel(rng, 4)
    model = SemiMarkovModel(p, [SojournLaw([1.0])] * 4, np.full(4, 0.25))
    em = build_embedded(model)
    np.testing.assert_array_equal(em.C.toarray(), p)


def test_depth_too_small_rejected():
    model = SemiMarkovModel([[0, 1], [1, 0]], [SojournLaw([0.2, 0.3, 0.5])] * 2, [1, 0])
    with pytest.raises(ModelError) as exc:
        build_embedded(model, depth=2)
    assert exc.value.field == "depth"


def test_blocks_match_hazards():
    laws = [SojournLaw([0.5, 0.3, 0.2]), SojournLaw([0.2, 0.2, 0.6])]
    model = SemiMarkovModel([[0, 1], [1, 0]], laws, [1, 0])
    jump, stay = build_embedded(model).blocks()
    for r in (1, 2, 3):
        ex = [law.exit_probability(r) for law in laws]
        np.testing.assert_allclose(jump[r - 1], np.array([[0, ex[1]], [ex[0], 0]]), atol=1e-15)
        if r < 3:
            np.testing.assert_allclose(stay[r - 1], np.diag([1 - ex[0], 1 - ex[1]]), atol=1e-15)


def test_geometric_marginal_prediction_matches_markov_chain():
    rho, p = [0.2, 0.35], np.array([[0, 1.0], [1.0, 0]])
    model = geometric_model(rho, p, [0.7, 0.3], support=300)
    em = build_embedded(model)
    A = markov_matrix(rho, p)
    dist = em.lift(model.p0)
    x = np.array(model.p0)
    for k in range(1, 40):
        dist = embedded_predict(em, dist, 1)
        x = A @ x
        np.testing.assert_allclose(em.marginal(dist), x, atol=1e-13)


def test_predict_preserves_mass(rng):
    model = random_model(rng, 3, 5)
    em = build_embedded(model)
    out = embedded_predict(em, em.lift(model.p0), 25)
    assert abs(out.sum() - 1) < 1e-13


def test_deterministic_prediction_is_a_permutation():
    model = SemiMarkovModel([[0, 1], [1, 0]], [SojournLaw([0, 0, 1.0])] * 2, [1, 0])
    em = build_embedded(model)
    out = embedded_predict(em, em.lift([1, 0]), 3)
    np.testing.assert_array_equal(em.marginal(out), [0, 1])
    assert out[em.index(1, 1)] == 1.0


def test_embedded_filter_matches_enumeration(rng):
    for _ in range(15):
        N = int(rng.integers(2, 4))
        model = random_model(rng, N, 4)
        obs = random_obs(rng, N)
        y = rng.normal(size=6)
        for init in ("bayes0", "prior"):
            exact = enumerate_posterior(model, obs, y, init=init)
            res = embedded_filter(build_embedded(model), obs, y, init=init)
            np.testing.assert_allclose(res.marginals, exact.filtered, atol=1e-12)
        # both are log densities relative to the N(0, 1) reference measure
        lognorm = embedded_filter(build_embedded(model), obs, y).log_norm[-1]
        assert abs(lognorm - enumerate_posterior(model, obs, y).log_evidence) < 1e-10


def test_enumeration_matches_hand_loop(rng):
    model = random_model(rng, 2, 3)
    obs = random_obs(rng, 2)
    y = rng.normal(size=6)
    filt, smooth = brute_force_smoother(model, obs, y)
    exact = enumerate_posterior(model, obs, y)
    np.testing.assert_allclose(exact.filtered, filt, atol=1e-13)
    np.testing.assert_allclose(exact.smoothed, smooth, atol=1e-13)


def test_enumeration_limit():
    model = SemiMarkovModel([[0, 1], [1, 0]], [SojournLaw([1.0])] * 2, [1, 0])
    with pytest.raises(ValueError):
        enumerate_posterior(model, ObservationModel([0, 1], [1, 1]), np.zeros(30))


def test_uninformative_observations_reduce_to_prediction(rng):
    model = random_model(rng, 3, 5)
    obs = ObservationModel([0.0, 0.5, 1.0], [1e8] * 3)
    em = build_embedded(model)
    y = rng.normal(size=20)
    res = embedded_filter(em, obs, y, init="prior")
    pred = em.lift(model.p0)
    for k in range(20):
        np.testing.assert_allclose(em.marginal(res.q[k]), em.marginal(pred), atol=1e-12)
        pred = embedded_predict(em, pred, 1)


def test_underflow_guard():
    model = SemiMarkovModel([[0, 1], [1, 0]], [SojournLaw([0, 0, 1.0])] * 2, [1, 0])
    obs = ObservationModel([0.0, 1.0], [1e-3, 1e-3])
    # y keeps saying state 1 for longer than the deterministic sojourn allows;
    # after the forced jump both hypotheses are ~1e6 sigma away
    y = np.array([0.0, 0.0, 0.0, 0.0, 1000.0])
    with pytest.raises(NumericalGuardError):
        embedded_filter(build_embedded(model), obs, y)


def test_geometric_embedded_matches_approximate_filter(geometric2):
    model, obs = geometric2
    y = np.random.default_rng(4).normal(1.0, 1.0, 200)
    exact = embedded_filter(build_embedded(model), obs, y)
    approx = run_filter(model, obs, y)
    np.testing.assert_allclose(approx.posteriors, exact.marginals, atol=1e-10)

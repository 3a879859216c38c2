import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import toy_alphabet, toy_instance
from keyspace.cipher import SubstitutionKey, decrypt, make_instance, random_key
from keyspace.errors import ParameterError, SizeError, UnobservedFractionError
from keyspace.landscape import (
    DEFAULT_TAUS,
    all_keys,
    classical_expected_trials,
    diagnostics,
    enumerate_exact,
    estimate_p_good,
    grover_oracle_calls,
    normalize_score,
    normalize_scores,
    sample_scores,
    score_key,
    score_keys,
)
from keyspace.ngram import log_prob, uniform_model


def test_score_key_is_decrypt_then_score(toy5):
    inst, model = toy5
    for seed in range(5):
        k = random_key(seed, 5)
        assert score_key(k, inst.ciphertext, model) == log_prob(model, decrypt(inst.ciphertext, k))


def test_score_keys_batch(lee_modern, trigram_modern):
    inst = make_instance(lee_modern, 400, 3)
    keys = np.stack([random_key(s, 26).mapping for s in range(20)])
    batch = score_keys(keys, inst.ciphertext, trigram_modern)
    single = [score_key(SubstitutionKey(k), inst.ciphertext, trigram_modern) for k in keys]
    np.testing.assert_allclose(batch, single, rtol=0, atol=1e-9)


def test_uniform_model_scores_every_key_alike():
    a = toy_alphabet("ABCDE")
    m = uniform_model(a, 3)
    cipher = np.random.default_rng(0).integers(0, 5, 50)
    expected = 50 * math.log10(1 / 5)
    for s in range(5):
        assert score_key(random_key(s, 5), cipher, m) == pytest.approx(expected, abs=1e-10)
    # every normalized score is 1, so every key is marked at every threshold
    est = estimate_p_good(cipher, m, DEFAULT_TAUS, 500, 0)
    assert all(p == 1.0 for p in est.p_hat)


def test_normalize_examples():
    assert normalize_score(-500, -500, -900) == 1.0
    assert normalize_score(-900, -500, -900) == 0.0
    assert normalize_score(-700, -500, -900) == 0.5
    assert normalize_score(-3, -3, -3) == 1.0
    before = diagnostics["clamped"]
    assert normalize_score(-400, -500, -900) == 1.0
    assert normalize_score(-1000, -500, -900) == 0.0
    assert diagnostics["clamped"] == before + 2
    with pytest.raises(ParameterError):
        normalize_score(0, -1, 0)
    np.testing.assert_array_equal(normalize_scores([-900, -700, -500], -500, -900), [0, 0.5, 1])


@given(st.lists(st.floats(-1e4, 0), min_size=1, max_size=50), st.floats(0, 100))
def test_normalized_in_unit_interval(scores, extra):
    s = np.array(scores)
    s_best = s.max() + extra
    v = normalize_scores(s, s_best, s.min())
    assert np.all((v >= 0) & (v <= 1))


def test_monte_carlo_agrees_with_exact(toy5):
    inst, model = toy5
    exact = enumerate_exact(inst.ciphertext, model)
    assert exact.n_samples == 120
    mc = estimate_p_good(inst.ciphertext, model, DEFAULT_TAUS, 10_000, 4, exact.s_best)
    for p_true, p_hat, se in zip(exact.p_hat, mc.p_hat, mc.stderr):
        assert abs(p_hat - p_true) <= 4 * max(se, 1e-3)


def test_nesting_and_exact_fractions(toy5):
    inst, model = toy5
    taus = (0.0, 0.5, 0.9, 0.95, 0.99, 1.0)
    exact = enumerate_exact(inst.ciphertext, model, taus)
    assert exact.p_hat[0] == 1.0
    assert exact.marked_counts[-1] >= 1
    assert list(exact.marked_counts) == sorted(exact.marked_counts, reverse=True)
    assert exact.p_exact()[0] == 1
    assert exact.stderr == (0.0,) * len(taus)


def test_enumerate_exact_small_and_refused():
    inst, model = toy_instance("AE", 100, 1, order=2)
    exact = enumerate_exact(inst.ciphertext, model, (0.5,))
    assert exact.n_samples == 2
    assert all_keys(2).tolist() == [[0, 1], [1, 0]]
    nine = uniform_model(toy_alphabet("ABCDEFGHI"), 1)
    with pytest.raises(SizeError):
        enumerate_exact(np.zeros(5, dtype=int), nine)


def test_zero_marked_bound(lee_modern, trigram_modern):
    inst = make_instance(lee_modern, 1000, 8)
    s_true = score_key(inst.true_key, inst.ciphertext, trigram_modern)
    est = estimate_p_good(inst.ciphertext, trigram_modern, (0.99,), 2000, 1, s_true)
    assert est.marked_counts == (0,)
    assert est.p_upper95 == (3 / 2000,)
    assert est.cost_p(0) == (3 / 2000, True)


@pytest.mark.parametrize("p, calls", [(1.0, 1), (1e-4, 79), (1e-2, 8), (0.5, 2)])
def test_grover_examples(p, calls):
    assert grover_oracle_calls(p) == calls


@pytest.mark.parametrize("p, trials", [(1.0, 1.0), (1e-2, 100.0), (1e-4, 10_000.0)])
def test_classical_examples(p, trials):
    assert classical_expected_trials(p) == pytest.approx(trials, rel=1e-15)


def test_cost_model_errors():
    for f in (grover_oracle_calls, classical_expected_trials):
        with pytest.raises(UnobservedFractionError):
            f(0.0)
        with pytest.raises(ParameterError):
            f(1.5)


@given(st.floats(1e-12, 1.0))
def test_grover_never_exceeds_classical(p):
    assert grover_oracle_calls(p) <= max(1, math.ceil(classical_expected_trials(p)))


@given(st.floats(1e-10, 1e-3))
def test_quadratic_scaling(p):
    ratio = grover_oracle_calls(p) / math.sqrt(classical_expected_trials(p))
    assert ratio == pytest.approx(math.pi / 4, rel=0.05)


def test_worker_count_does_not_change_samples(toy5):
    inst, model = toy5
    a = sample_scores(inst.ciphertext, model, 2500, 77, workers=1)
    b = sample_scores(inst.ciphertext, model, 2500, 77, workers=3)
    assert np.array_equal(a, b)
    c = sample_scores(inst.ciphertext, model, 2500, 78, workers=1)
    assert not np.array_equal(a, c)


def test_estimate_replayable(toy5):
    inst, model = toy5
    e1 = estimate_p_good(inst.ciphertext, model, n_samples=3000, rng=5)
    e2 = estimate_p_good(inst.ciphertext, model, n_samples=3000, rng=5)
    assert e1.marked_counts == e2.marked_counts and e1.s_floor == e2.s_floor
    with pytest.raises(ParameterError):
        estimate_p_good(inst.ciphertext, model, n_samples=0)
    with pytest.raises(ParameterError):
        estimate_p_good(inst.ciphertext, model, taus=())

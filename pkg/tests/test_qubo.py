import functools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import toy_instance
from keyspace.cipher import SubstitutionKey
from keyspace.errors import InputError, ParameterError
from keyspace.landscape import all_keys, score_key, score_keys
from keyspace.qubo import (
    _State,
    anneal,
    build_qubo,
    decode_assignment,
    default_lambda,
    energy,
    is_permutation_matrix,
    key_to_assignment,
    penalty,
    schedule,
)


@functools.cache
def toy5_bigram_problem():
    inst, model = toy_instance("AEINT", 50, 0, order=2)
    return build_qubo(inst.ciphertext, model)


def brute_energy(problem, cipher, model, x):
    """Direct evaluation of -S2 plus the row/column penalty, without the matrices."""
    A = problem.size
    X = np.asarray(x).reshape(A, A)
    lp1, lp2 = model.tables[0], model.tables[1]
    e = -sum(X[cipher[0], u] * lp1[u] for u in range(A))
    for a, b in zip(cipher[:-1], cipher[1:]):
        e -= sum(X[a, u] * X[b, v] * lp2[u, v] for u in range(A) for v in range(A))
    return e + problem.lam * penalty(x, A)


def test_penalty_values():
    assert penalty(key_to_assignment(SubstitutionKey.identity(4)), 4) == 0
    assert penalty(np.zeros(16), 4) == 8
    assert penalty(np.ones(16), 4) == 8 * 9


def test_all_zero_energy(toy6_bigram):
    inst, model = toy6_bigram
    q = build_qubo(inst.ciphertext, model)
    assert energy(q, np.zeros(36)) == pytest.approx(2 * 6 * q.lam, rel=1e-15)
    assert q.lam == default_lambda(200, model.tables[1])
    np.testing.assert_array_equal(np.diag(q.quadratic), 0)
    np.testing.assert_array_equal(q.quadratic, q.quadratic.T)


def test_feasible_energy_is_negative_bigram_score(toy6_bigram):
    inst, model = toy6_bigram
    q = build_qubo(inst.ciphertext, model)
    keys = all_keys(6)
    scores = score_keys(keys, inst.ciphertext, model)
    energies = np.array([energy(q, key_to_assignment(SubstitutionKey(k))) for k in keys])
    assert len(keys) == 720
    assert np.max(np.abs(energies + scores)) < 1e-9


def test_energy_matches_brute_force_on_random_states():
    inst, model = toy_instance("AEIN", 40, 2, order=2)
    q = build_qubo(inst.ciphertext, model)
    rng = np.random.default_rng(1)
    for _ in range(30):
        x = rng.integers(0, 2, 16)
        assert energy(q, x) == pytest.approx(brute_energy(q, inst.ciphertext, model, x), abs=1e-8)


def test_true_key_is_minimum_when_self_trained():
    inst, model = toy_instance("AEINT", 300, 3, order=2, self_trained=True)
    q = build_qubo(inst.ciphertext, model)
    keys = all_keys(5)
    energies = [energy(q, key_to_assignment(SubstitutionKey(k))) for k in keys]
    best = SubstitutionKey(keys[int(np.argmin(energies))])
    assert best == inst.true_key


def test_penalty_dominates_infeasible(toy6_bigram):
    inst, model = toy6_bigram
    q = build_qubo(inst.ciphertext, model)
    worst_feasible = max(energy(q, key_to_assignment(SubstitutionKey(k))) for k in all_keys(6))
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 1000:
        x = rng.integers(0, 2, 36)
        if is_permutation_matrix(x, 6):
            continue
        checked += 1
        assert energy(q, x) > worst_feasible - q.lam


def test_incremental_deltas(toy6_bigram):
    inst, model = toy6_bigram
    q = build_qubo(inst.ciphertext, model)
    rng = np.random.default_rng(0)
    state = _State(q, key_to_assignment(SubstitutionKey(rng.permutation(6))))
    for step in range(10_000):
        before = energy(q, state.x)
        if rng.random() < 0.5:
            i = int(rng.integers(36))
            d = state.flip_delta(i)
            x2 = state.x.copy()
            x2[i] = 1 - x2[i]
            assert d == pytest.approx(energy(q, x2) - before, abs=1e-8)
            if rng.random() < 0.5:
                state.flip(i, d)
        else:
            c1, c2 = rng.choice(6, 2, replace=False)
            idx, deltas, d = state.swap_moves(int(c1), int(c2))
            x2 = state.x.reshape(6, 6).copy()
            x2[[c1, c2]] = x2[[c2, c1]]
            assert d == pytest.approx(energy(q, x2) - before, abs=1e-8)
            if idx is not None and rng.random() < 0.5:
                state.apply(idx, deltas, d)
    assert state.energy == pytest.approx(energy(q, state.x), abs=1e-6)


def test_schedule_endpoints():
    t = schedule(50.0, 0.01, 500)
    assert t[0] == 50.0 and t[-1] == 0.01 and len(t) == 500
    assert np.all(np.diff(t) < 0)
    r = t[1:-1] / t[:-2]
    assert np.max(np.abs(r - r[0])) < 1e-12
    assert schedule(3.0, 0.01, 1).tolist() == [3.0]


def test_anneal_trace_and_result(toy6_bigram):
    inst, model = toy6_bigram
    q = build_qubo(inst.ciphertext, model)
    tr = anneal(q, sweeps=100, rng=1)
    assert len(tr.records) == 100
    best = [r[3] for r in tr.records]
    assert all(b <= a for a, b in zip(best, best[1:]))
    assert tr.records[0][1] == q.lam and tr.records[-1][1] == 0.01
    assert tr.proposals == 100 * 36
    assert tr.best_energy == pytest.approx(best[-1], abs=1e-6)
    if tr.feasible:
        assert tr.best_energy == pytest.approx(-score_key(tr.key, inst.ciphertext, model), abs=1e-8)
    again = anneal(q, sweeps=100, rng=1)
    assert again.records == tr.records and again.key == tr.key


def test_anneal_validation(toy6_bigram):
    inst, model = toy6_bigram
    q = build_qubo(inst.ciphertext, model)
    with pytest.raises(ParameterError):
        anneal(q, sweeps=0)
    with pytest.raises(ParameterError):
        anneal(q, t0=0.001, t_min=0.01)


def test_build_validation(toy6_bigram, toy5):
    inst, model = toy6_bigram
    with pytest.raises(InputError):
        build_qubo([], model)
    with pytest.raises(ParameterError):
        build_qubo(inst.ciphertext, model.with_order(1))
    with pytest.raises(ParameterError):
        build_qubo(inst.ciphertext, model, lam=0)
    # a trigram model contributes its lower-order tables
    inst5, tri = toy5
    assert np.array_equal(build_qubo(inst5.ciphertext, tri).linear, build_qubo(inst5.ciphertext, tri.with_order(2)).linear)
    assert default_lambda(1, np.array([[-2.0]])) == 4.0


def test_decode_feasible_and_repair():
    inst, model = toy_instance("AEI", 30, 0, order=2)
    q = build_qubo(inst.ciphertext, model)
    key = SubstitutionKey([2, 0, 1])
    assert decode_assignment(key_to_assignment(key), q) == (key, True)
    # all ones: most frequent cipher symbol claims plain 0, and so on
    k, ok = decode_assignment(np.ones(9, dtype=int), q)
    order = np.argsort(-q.unigram_counts, kind="stable")
    assert not ok and k.mapping.tolist() == order.tolist()
    k, ok = decode_assignment(np.zeros(9, dtype=int), q)
    assert not ok and k.mapping.tolist() == order.tolist()
    with pytest.raises(InputError):
        energy(q, np.full(9, 2))


@given(st.lists(st.integers(0, 1), min_size=25, max_size=25))
def test_decode_always_bijective(bits):
    q = toy5_bigram_problem()
    k, ok = decode_assignment(np.array(bits), q)
    assert sorted(k.mapping.tolist()) == list(range(5))
    assert ok == is_permutation_matrix(np.array(bits), 5)


def repair_oracle(X, counts):
    """Greedy repair transcribed directly from its description."""
    A = len(counts)
    mapping, claimed = [None] * A, set()
    for c in sorted(range(A), key=lambda c: (-counts[c], c)):
        free = [p for p in range(A) if p not in claimed]
        p = max(free, key=lambda p: (X[c][p], -p))
        claimed.add(p)
        mapping[p] = c
    return mapping


@given(st.lists(st.integers(0, 1), min_size=25, max_size=25))
def test_decode_repair_matches_oracle(bits):
    q = toy5_bigram_problem()
    x = np.array(bits)
    k, ok = decode_assignment(x, q)
    if not ok:
        X = x.reshape(5, 5).tolist()
        assert k.mapping.tolist() == repair_oracle(X, q.unigram_counts.tolist())


def test_dump(tmp_path, toy6_bigram):
    inst, model = toy6_bigram
    q = build_qubo(inst.ciphertext, model)
    path = tmp_path / "q.json"
    q.dump(path)
    doc = json.loads(path.read_text())
    assert doc["size"] == 6 and doc["lambda"] == q.lam and len(doc["linear"]) == 36
    Q = np.zeros((36, 36))
    for i, j, v in doc["quadratic"]:
        assert i < j
        Q[i, j] = Q[j, i] = v
    np.testing.assert_array_equal(Q, q.quadratic)

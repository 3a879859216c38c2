"""Hill climbing and simulated annealing over substitution keys.

Both searches maximize the log10 score of the decrypted text. Neighbouring
keys differ by one transposition: swapping the cipher symbols of two plain
symbols, which swaps those two letters everywhere in the decryption.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cipher import SubstitutionKey, as_generator, random_keys
from .errors import InputError, ParameterError
from .landscape import normalize_scores, score_keys
from .ngram import NgramModel, log_prob_batch

LN10 = math.log(10.0)

DEFAULT_RESTARTS = 20
DEFAULT_MAX_ITERS = 500
DEFAULT_COOLING = 0.99
DEFAULT_STEPS_PER_TEMP = 100
DEFAULT_T_MIN_RATIO = 1e-3
T0_FLOOR = 1.0


@dataclass
class TraceStep:
    step: int
    score: float
    temperature: float | None = None
    restart: int = 0


@dataclass
class SearchTrace:
    method: str
    steps: list[TraceStep] = field(default_factory=list)
    scoring_calls: int = 0
    runtime_ms: float = 0.0
    best_key: SubstitutionKey | None = None
    best_score: float = -math.inf
    # initial score of each restart (hill climbing) or of the single run
    initial_scores: list[float] = field(default_factory=list)
    # neighbourhood scans per restart (hill climbing only)
    scans: list[int] = field(default_factory=list)
    t0: float | None = None

    def normalized_scores(self, s_best: float, s_floor: float) -> np.ndarray:
        return normalize_scores([s.score for s in self.steps], s_best, s_floor)


def _transpositions(size: int) -> np.ndarray:
    return np.array([(i, j) for i in range(size) for j in range(i + 1, size)], dtype=np.intp)


def _check_inputs(ciphertext, model: NgramModel) -> np.ndarray:
    c = np.asarray(ciphertext, dtype=np.intp)
    if c.ndim != 1 or c.size == 0:
        raise InputError("ciphertext must be a non-empty 1-D index sequence")
    if c.min() < 0 or c.max() >= model.size:
        raise InputError("ciphertext index out of range for the model alphabet")
    return c


def _substream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _climb(cipher, model, key, max_iters, pairs, swaps):
    """Best-improvement ascent from ``key``; returns (key, score, scores, calls, scans)."""
    inv = np.argsort(key)
    plain = inv[cipher]
    score = float(log_prob_batch(model, plain[None, :])[0])
    calls = 1
    history = [score]
    scans = 0
    while scans < max_iters:
        # swaps[k] relabels plain symbols pairs[k][0] <-> pairs[k][1]
        candidates = log_prob_batch(model, swaps[:, plain])
        calls += len(pairs)
        scans += 1
        k = int(np.argmax(candidates))
        if not candidates[k] > score:
            break
        i, j = pairs[k]
        key[i], key[j] = key[j], key[i]
        plain = swaps[k][plain]
        score = float(candidates[k])
        history.append(score)
    return key, score, history, calls, scans


def hill_climb(
    ciphertext,
    model: NgramModel,
    restarts: int = DEFAULT_RESTARTS,
    max_iters: int = DEFAULT_MAX_ITERS,
    rng=0,
    start_key: SubstitutionKey | None = None,
) -> SearchTrace:
    """Steepest-ascent hill climbing with random restarts.

    Each iteration scores all |A|(|A|-1)/2 transpositions of the current key
    and moves to the best one if it strictly improves. A restart ends at a
    local optimum or after ``max_iters`` scans. If ``start_key`` is given it
    replaces the random start of restart 0.
    """
    if restarts < 1:
        raise ParameterError(f"restarts must be >= 1, got {restarts}")
    if max_iters < 1:
        raise ParameterError(f"max_iters must be >= 1, got {max_iters}")
    cipher = _check_inputs(ciphertext, model)
    A = model.size
    seed = int(rng) if isinstance(rng, (int, np.integer)) else int(as_generator(rng).integers(0, 2**63))
    pairs = _transpositions(A)
    swaps = np.tile(np.arange(A), (len(pairs), 1))
    rows = np.arange(len(pairs))
    swaps[rows, pairs[:, 0]] = pairs[:, 1]
    swaps[rows, pairs[:, 1]] = pairs[:, 0]

    trace = SearchTrace("hill_climb")
    started = time.perf_counter()
    step = 0
    for r in range(restarts):
        if r == 0 and start_key is not None:
            key = start_key.mapping.copy()
        else:
            key = _substream(seed, r).permutation(A)
        key, score, history, calls, scans = _climb(cipher, model, key, max_iters, pairs, swaps)
        trace.scoring_calls += calls
        trace.scans.append(scans)
        trace.initial_scores.append(history[0])
        for s in history:
            trace.steps.append(TraceStep(step, s, None, r))
            step += 1
        # strict comparison keeps the lowest restart index on ties
        if score > trace.best_score:
            trace.best_score = score
            trace.best_key = SubstitutionKey(key)
    trace.runtime_ms = (time.perf_counter() - started) * 1000.0
    return trace


class SwapScorer:
    """Incremental rescoring of single transpositions of a key.

    Swapping key entries i and j relabels plain symbols i and j at the
    positions of their cipher symbols, so only the n-gram windows touching
    those positions change. Windows are cached per cipher-symbol pair.
    """

    def __init__(self, ciphertext, model: NgramModel, key):
        self.cipher = np.asarray(ciphertext, dtype=np.intp)
        self.model = model
        self.key = np.array(key, dtype=np.intp)
        self.plain = np.argsort(self.key)[self.cipher]
        self.score = float(log_prob_batch(model, self.plain[None, :])[0])
        L = self.cipher.size
        n = model.order
        self.positions = [np.flatnonzero(self.cipher == c) for c in range(model.size)]
        self.ends = []
        for pos in self.positions:
            e = (pos[:, None] + np.arange(n)[None, :]).ravel()
            self.ends.append(np.unique(e[e < L]))
        self._top = model.tables[-1].ravel()
        self._powers = model.size ** np.arange(n - 1, -1, -1)
        self._identity = np.arange(model.size)
        self._windows: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def _windows_for(self, ci: int, cj: int):
        pair = (ci, cj) if ci < cj else (cj, ci)
        cached = self._windows.get(pair)
        if cached is None:
            n = self.model.order
            ends = np.union1d(self.ends[ci], self.ends[cj])
            body = ends[ends >= n - 1]
            cached = (ends[ends < n - 1], body[:, None] - (n - 1) + np.arange(n))
            self._windows[pair] = cached
        return cached

    def delta(self, i: int, j: int):
        """Score change from swapping key entries i and j, plus a token for apply()."""
        head, win = self._windows_for(int(self.key[i]), int(self.key[j]))
        relabel = self._identity.copy()
        relabel[i], relabel[j] = j, i
        old = self.plain[win]
        top = self._top
        d = float(top.take(relabel[old] @ self._powers).sum() - top.take(old @ self._powers).sum())
        for t in head.tolist():
            prefix = self.plain[: t + 1]
            table = self.model.tables[t]
            d += float(table[tuple(relabel[prefix])] - table[tuple(prefix)])
        return d, relabel

    def apply(self, i: int, j: int, d: float, relabel: np.ndarray):
        self.key[i], self.key[j] = self.key[j], self.key[i]
        self.plain = relabel[self.plain]
        self.score += d


def calibrate_t0(ciphertext, model: NgramModel, rng=0, probe_count: int = 100) -> float:
    """Sample standard deviation (ddof=1) of scores of random keys."""
    if probe_count < 2:
        raise ParameterError(f"probe_count must be >= 2, got {probe_count}")
    cipher = _check_inputs(ciphertext, model)
    keys = random_keys(as_generator(rng), model.size, probe_count)
    scores = score_keys(keys, cipher, model)
    return float(np.std(scores, ddof=1))


def acceptance_probability(delta: float, temperature: float) -> float:
    """Metropolis rule for a maximization in log10 units."""
    if delta >= 0:
        return 1.0
    return math.exp(delta * LN10 / temperature)


def simulated_annealing(
    ciphertext,
    model: NgramModel,
    t0: float | None = None,
    cooling: float = DEFAULT_COOLING,
    steps_per_temp: int = DEFAULT_STEPS_PER_TEMP,
    t_min_ratio: float = DEFAULT_T_MIN_RATIO,
    rng=0,
    start_key: SubstitutionKey | None = None,
) -> SearchTrace:
    """Annealing with random transposition proposals and geometric cooling.

    Temperature level k runs at ``t0 * cooling**k`` for ``steps_per_temp``
    proposals; the run stops once the temperature falls below
    ``t_min_ratio * t0``. Without ``t0`` the start temperature is the spread of
    100 random-key scores (1.0 if that spread is zero). One trace record is
    written per temperature level.
    """
    if not 0 < cooling < 1:
        raise ParameterError(f"cooling must lie in (0, 1), got {cooling}")
    if steps_per_temp < 1:
        raise ParameterError(f"steps_per_temp must be >= 1, got {steps_per_temp}")
    if not 0 < t_min_ratio < 1:
        raise ParameterError(f"t_min_ratio must lie in (0, 1), got {t_min_ratio}")
    cipher = _check_inputs(ciphertext, model)
    rng = as_generator(rng)
    extra_calls = 0
    if t0 is None:
        t0 = calibrate_t0(cipher, model, rng)
        extra_calls = 100
        if t0 <= 0:
            t0 = T0_FLOOR
    if not t0 > 0:
        raise ParameterError(f"t0 must be > 0, got {t0}")

    A = model.size
    key = start_key.mapping.copy() if start_key is not None else rng.permutation(A)
    scorer = SwapScorer(cipher, model, key)
    trace = SearchTrace("anneal", t0=float(t0))
    trace.initial_scores.append(scorer.score)
    trace.scoring_calls = 1 + extra_calls
    best_score, best_key = scorer.score, scorer.key.copy()

    started = time.perf_counter()
    t_stop = t_min_ratio * t0
    k = 0
    temperature = t0
    while temperature >= t_stop:
        first = rng.integers(0, A, size=steps_per_temp)
        second = rng.integers(0, A - 1, size=steps_per_temp)
        second += second >= first
        coins = rng.random(steps_per_temp)
        for i, j, u in zip(first.tolist(), second.tolist(), coins.tolist()):
            d, relabel = scorer.delta(i, j)
            trace.scoring_calls += 1
            if d >= 0 or u < math.exp(d * LN10 / temperature):
                scorer.apply(i, j, d, relabel)
                if scorer.score > best_score:
                    best_score, best_key = scorer.score, scorer.key.copy()
        trace.steps.append(TraceStep(k, scorer.score, temperature))
        k += 1
        temperature = t0 * cooling**k
    trace.runtime_ms = (time.perf_counter() - started) * 1000.0
    # the running total drifts by rounding; report the exact rescoring
    best = SubstitutionKey(best_key)
    trace.best_key = best
    trace.best_score = float(score_keys(best.mapping[None, :], cipher, model)[0])
    return trace

"""Key scores, marked-key fractions and search-cost models.

A key is *marked* at level tau when its min-max normalized score
``(S - s_floor) / (s_best - s_floor)`` is at least tau, where ``s_best`` is
the best score known for the ciphertext and ``s_floor`` the lowest score in
the random sample.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cipher import SubstitutionKey, as_generator, decrypt, random_keys
from .errors import InputError, ParameterError, SizeError, UnobservedFractionError
from .ngram import NgramModel, log_prob, log_prob_batch

log = logging.getLogger(__name__)

DEFAULT_TAUS = (0.90, 0.92, 0.95, 0.98, 0.99, 0.995)
DEFAULT_SAMPLES = 10_000
# samples per independently seeded sub-stream
SAMPLE_BLOCK = 1000
MAX_EXACT_SIZE = 8

diagnostics: Counter = Counter()


@dataclass
class LandscapeEstimate:
    scores: np.ndarray
    s_best: float
    s_floor: float
    taus: tuple[float, ...]
    marked_counts: tuple[int, ...]
    n_samples: int
    p_hat: tuple[float, ...]
    stderr: tuple[float, ...]
    p_upper95: tuple[float | None, ...]
    seed: int | None = None
    exact: bool = False
    extra: dict = field(default_factory=dict)

    def normalized(self) -> np.ndarray:
        return normalize_scores(self.scores, self.s_best, self.s_floor)

    def p_exact(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(c, self.n_samples) for c in self.marked_counts)

    def cost_p(self, i: int) -> tuple[float, bool]:
        """Marked fraction to feed the cost models, and whether it is the 3/N bound."""
        if self.marked_counts[i] == 0 and self.p_upper95[i] is not None:
            return self.p_upper95[i], True
        return self.p_hat[i], False


def score_key(key: SubstitutionKey, ciphertext, model: NgramModel) -> float:
    """log10 likelihood of the ciphertext decrypted under ``key``."""
    if key.size != model.size:
        raise InputError(f"key size {key.size} does not match alphabet size {model.size}")
    return log_prob(model, decrypt(ciphertext, key))


def score_keys(keys: np.ndarray, ciphertext: np.ndarray, model: NgramModel) -> np.ndarray:
    """Scores for a (K, |A|) array of plain->cipher mappings."""
    keys = np.asarray(keys, dtype=np.intp)
    inv = np.argsort(keys, axis=1)
    plain = inv[:, np.asarray(ciphertext, dtype=np.intp)]
    return log_prob_batch(model, plain)


def normalize_score(s: float, s_best: float, s_floor: float) -> float:
    if s_floor > s_best:
        raise ParameterError(f"s_floor {s_floor} exceeds s_best {s_best}")
    if s_best == s_floor:
        return 1.0
    v = (s - s_floor) / (s_best - s_floor)
    if v < 0.0 or v > 1.0:
        diagnostics["clamped"] += 1
        log.debug("normalized score %r clamped", v)
        v = min(1.0, max(0.0, v))
    return v


def normalize_scores(scores, s_best: float, s_floor: float) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if s_floor > s_best:
        raise ParameterError(f"s_floor {s_floor} exceeds s_best {s_best}")
    if s_best == s_floor:
        return np.ones_like(scores)
    v = (scores - s_floor) / (s_best - s_floor)
    out = (v < 0.0) | (v > 1.0)
    if out.any():
        diagnostics["clamped"] += int(out.sum())
        v = np.clip(v, 0.0, 1.0)
    return v


def _check_taus(taus) -> tuple[float, ...]:
    taus = tuple(float(t) for t in taus)
    if not taus:
        raise ParameterError("at least one threshold is required")
    return taus


def _summarize(scores, s_best, taus, n, seed, exact) -> LandscapeEstimate:
    s_floor = float(scores.min())
    norm = normalize_scores(scores, s_best, s_floor)
    counts = tuple(int(np.count_nonzero(norm >= t)) for t in taus)
    p_hat = tuple(c / n for c in counts)
    if exact:
        stderr = tuple(0.0 for _ in taus)
        upper = tuple(None for _ in taus)
    else:
        stderr = tuple(math.sqrt(p * (1.0 - p) / n) for p in p_hat)
        upper = tuple(3.0 / n if c == 0 else None for c in counts)
    return LandscapeEstimate(scores, float(s_best), s_floor, taus, counts, n, p_hat, stderr, upper,
                             seed, exact)


def _block_scores(args) -> np.ndarray:
    seed, block, count, ciphertext, model = args
    stream = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))
    keys = random_keys(stream, model.size, count)
    return score_keys(keys, ciphertext, model)


def sample_scores(ciphertext, model: NgramModel, n_samples: int, seed: int, workers: int = 1) -> np.ndarray:
    """Scores of ``n_samples`` uniform keys.

    Sample i comes from the sub-stream of block ``i // SAMPLE_BLOCK`` seeded by
    ``(seed, block)``, so the result does not depend on ``workers``.
    """
    ciphertext = np.asarray(ciphertext, dtype=np.intp)
    jobs = []
    for b, start in enumerate(range(0, n_samples, SAMPLE_BLOCK)):
        jobs.append((seed, b, min(SAMPLE_BLOCK, n_samples - start), ciphertext, model))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_scores, jobs))
    else:
        parts = [_block_scores(j) for j in jobs]
    return np.concatenate(parts)


def _seed_from(rng) -> int:
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    return int(as_generator(rng).integers(0, 2**63))


def estimate_p_good(
    ciphertext,
    model: NgramModel,
    taus: Sequence[float] = DEFAULT_TAUS,
    n_samples: int = DEFAULT_SAMPLES,
    rng=0,
    s_best_external: float | None = None,
    workers: int = 1,
) -> LandscapeEstimate:
    """Monte Carlo estimate of the marked fraction for every threshold.

    ``s_best`` is the larger of the sample maximum and ``s_best_external``.
    Thresholds with no marked sample get the rule-of-three bound 3/N in
    ``p_upper95``.
    """
    if n_samples < 1:
        raise ParameterError(f"n_samples must be >= 1, got {n_samples}")
    taus = _check_taus(taus)
    seed = _seed_from(rng)
    scores = sample_scores(ciphertext, model, n_samples, seed, workers)
    s_best = float(scores.max())
    if s_best_external is not None:
        s_best = max(s_best, float(s_best_external))
    return _summarize(scores, s_best, taus, n_samples, seed, exact=False)


def enumerate_exact(ciphertext, model: NgramModel, taus: Sequence[float] = DEFAULT_TAUS) -> LandscapeEstimate:
    """Score every key; only for alphabets of at most 8 symbols."""
    A = model.size
    if A > MAX_EXACT_SIZE:
        raise SizeError(f"exhaustive enumeration refused for |A| = {A} (> {MAX_EXACT_SIZE})")
    taus = _check_taus(taus)
    keys = all_keys(A)
    scores = score_keys(keys, ciphertext, model)
    return _summarize(scores, float(scores.max()), taus, len(keys), None, exact=True)


def all_keys(size: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(size))), dtype=np.intp)


def grover_oracle_calls(p: float) -> int:
    """ceil(pi / (4 sqrt(p))), at least 1."""
    if p <= 0:
        raise UnobservedFractionError(f"marked fraction {p} is not positive; use the upper bound")
    if p > 1:
        raise ParameterError(f"marked fraction {p} exceeds 1")
    return max(1, math.ceil(math.pi / (4.0 * math.sqrt(p))))


def classical_expected_trials(p: float) -> float:
    if p <= 0:
        raise UnobservedFractionError(f"marked fraction {p} is not positive; use the upper bound")
    if p > 1:
        raise ParameterError(f"marked fraction {p} exceeds 1")
    return 1.0 / p

"""Key recovery as a QUBO over a binary assignment matrix.

Variable ``x[c, p]`` (flat index ``c * |A| + p``) is 1 when cipher symbol
``c`` decrypts to plain symbol ``p``. The energy to minimize is

    E(x) = -S2(x) + lam * C(x)

with S2 the bigram log10 likelihood of the decryption (quadratic in x) and
C the squared row/column deviation from a permutation matrix. Stored as
``constant + linear @ x + 0.5 * x @ quadratic @ x`` with a symmetric,
zero-diagonal ``quadratic``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cipher import SubstitutionKey, as_generator
from .errors import InputError, ParameterError
from .ngram import NgramModel

LN10 = math.log(10.0)
DEFAULT_SWEEPS = 500
DEFAULT_T_MIN = 1e-2


@dataclass(frozen=True, eq=False)
class QuboProblem:
    size: int
    lam: float
    constant: float
    linear: np.ndarray
    quadratic: np.ndarray
    bigram_counts: np.ndarray
    unigram_counts: np.ndarray

    @property
    def n_vars(self) -> int:
        return self.size * self.size

    def to_dict(self) -> dict:
        iu, ju = np.nonzero(np.triu(self.quadratic, k=1))
        return {
            "size": self.size,
            "lambda": self.lam,
            "constant": self.constant,
            "variable_order": "x[c][p] -> c*size + p",
            "linear": [float(v) for v in self.linear],
            "quadratic": [[int(i), int(j), float(self.quadratic[i, j])] for i, j in zip(iu, ju)],
        }

    def dump(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")), encoding="utf-8")


def default_lambda(length: int, bigram_table: np.ndarray) -> float:
    """2 (L - 1) max |log10 P2|, with L - 1 floored at 1."""
    return 2.0 * max(length - 1, 1) * float(np.max(np.abs(bigram_table)))


def penalty(x, size: int) -> float:
    X = np.asarray(x, dtype=np.float64).reshape(size, size)
    return float(((X.sum(axis=1) - 1) ** 2).sum() + ((X.sum(axis=0) - 1) ** 2).sum())


def build_qubo(ciphertext, bigram_model: NgramModel, lam: float | None = None) -> QuboProblem:
    """Assemble linear and quadratic coefficients for a ciphertext.

    A model of order above 2 contributes its bigram and unigram tables.
    """
    cipher = np.asarray(ciphertext, dtype=np.intp)
    if cipher.size == 0:
        raise InputError("cannot build a QUBO for an empty ciphertext")
    if bigram_model.order < 2:
        raise ParameterError("the QUBO objective needs a model of order >= 2")
    A = bigram_model.size
    if cipher.min() < 0 or cipher.max() >= A:
        raise InputError("ciphertext index out of range for the model alphabet")
    lp1 = bigram_model.tables[0]
    lp2 = bigram_model.tables[1]
    if lam is None:
        lam = default_lambda(cipher.size, lp2)
    if not lam > 0:
        raise ParameterError(f"penalty weight must be > 0, got {lam}")

    m = np.zeros((A, A), dtype=np.int64)
    np.add.at(m, (cipher[:-1], cipher[1:]), 1)
    n = np.bincount(cipher, minlength=A)

    # W[(a,u),(b,v)] = -m[a,b] * log10 P(v|u), over ordered variable pairs
    W = -np.kron(m.astype(np.float64), lp2)
    linear = np.diag(W).copy()
    first = cipher[0]
    linear[first * A : (first + 1) * A] -= lp1
    quad = W + W.T

    eye = np.eye(A)
    ones = np.ones((A, A))
    same_line = np.kron(eye, ones) + np.kron(ones, eye)
    quad += 2.0 * lam * same_line
    np.fill_diagonal(quad, 0.0)
    linear -= 2.0 * lam
    constant = 2.0 * A * lam
    linear.setflags(write=False)
    quad.setflags(write=False)
    return QuboProblem(A, float(lam), float(constant), linear, quad, m, n)


def _as_x(problem: QuboProblem, x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.size != problem.n_vars:
        raise InputError(f"assignment has {arr.size} entries, expected {problem.n_vars}")
    arr = arr.reshape(-1)
    if not np.all((arr == 0) | (arr == 1)):
        raise InputError("assignment entries must be 0 or 1")
    return arr.astype(np.float64)


def energy(problem: QuboProblem, x) -> float:
    v = _as_x(problem, x)
    return float(problem.constant + problem.linear @ v + 0.5 * v @ problem.quadratic @ v)


def key_to_assignment(key: SubstitutionKey) -> np.ndarray:
    """Permutation matrix with x[key[p], p] = 1, flattened."""
    A = key.size
    X = np.zeros((A, A), dtype=np.int8)
    X[key.mapping, np.arange(A)] = 1
    return X.reshape(-1)


def is_permutation_matrix(x, size: int) -> bool:
    X = np.asarray(x).reshape(size, size)
    return bool(np.all(X.sum(axis=0) == 1) and np.all(X.sum(axis=1) == 1))


def decode_assignment(x, problem: QuboProblem) -> tuple[SubstitutionKey, bool]:
    """Turn an assignment into a key, repairing infeasible matrices greedily.

    Repair visits cipher symbols by descending frequency (ties: lower index)
    and gives each the unclaimed plain symbol with the largest x, preferring
    the lowest plain index among equals.
    """
    A = problem.size
    X = np.asarray(x).reshape(A, A)
    if is_permutation_matrix(X, A):
        cipher_of_plain = np.argmax(X, axis=0)
        return SubstitutionKey(cipher_of_plain), True
    order = np.argsort(-problem.unigram_counts, kind="stable")
    claimed = np.zeros(A, dtype=bool)
    mapping = np.full(A, -1, dtype=np.intp)
    for c in order:
        # argmax returns the first maximum, i.e. the lowest plain index
        p = int(np.argmax(np.where(claimed, -1, X[c])))
        claimed[p] = True
        mapping[p] = c
    return SubstitutionKey(mapping), False


@dataclass
class AnnealTrace:
    records: list[tuple[int, float, float, float]] = field(default_factory=list)
    assignment: np.ndarray | None = None
    key: SubstitutionKey | None = None
    feasible: bool = False
    best_energy: float = math.inf
    temperatures: np.ndarray | None = None
    accepted: int = 0
    proposals: int = 0
    runtime_ms: float = 0.0


def schedule(t0: float, t_min: float, sweeps: int) -> np.ndarray:
    if sweeps == 1:
        return np.array([t0])
    r = (t_min / t0) ** (1.0 / (sweeps - 1))
    temps = t0 * r ** np.arange(sweeps)
    temps[-1] = t_min
    return temps


class _State:
    """Assignment, local fields h + Jx and running energy."""

    def __init__(self, problem: QuboProblem, x: np.ndarray):
        self.p = problem
        self.A = problem.size
        self.x = x.astype(np.float64)
        self.field = problem.linear + problem.quadratic @ self.x
        self.energy = energy(problem, self.x)

    def flip_delta(self, i: int) -> float:
        return (1.0 - 2.0 * self.x[i]) * self.field[i]

    def flip(self, i: int, d: float):
        s = 1.0 - 2.0 * self.x[i]
        self.x[i] += s
        self.field += s * self.p.quadratic[:, i]
        self.energy += d

    def swap_moves(self, c1: int, c2: int):
        A = self.A
        r1 = self.x[c1 * A : (c1 + 1) * A]
        r2 = self.x[c2 * A : (c2 + 1) * A]
        cols = np.flatnonzero(r1 != r2)
        if cols.size == 0:
            return None, None, 0.0
        idx = np.concatenate([c1 * A + cols, c2 * A + cols])
        deltas = np.concatenate([r2[cols] - r1[cols], r1[cols] - r2[cols]])
        sub = self.p.quadratic[np.ix_(idx, idx)]
        d = float(deltas @ self.field[idx] + 0.5 * deltas @ sub @ deltas)
        return idx, deltas, d

    def apply(self, idx, deltas, d: float):
        self.x[idx] += deltas
        self.field += self.p.quadratic[:, idx] @ deltas
        self.energy += d


def anneal(
    problem: QuboProblem,
    sweeps: int = DEFAULT_SWEEPS,
    t0: float | None = None,
    t_min: float | None = None,
    rng=0,
) -> AnnealTrace:
    """Metropolis annealing on the QUBO, starting from a random permutation.

    A sweep is |A|^2 proposals, each a single-bit flip or a swap of two
    rows (cipher symbols) with equal probability. Temperatures fall
    geometrically from ``t0`` (default lam) to ``t_min`` (default 0.01).
    """
    if sweeps < 1:
        raise ParameterError(f"sweeps must be >= 1, got {sweeps}")
    t0 = problem.lam if t0 is None else float(t0)
    t_min = DEFAULT_T_MIN if t_min is None else float(t_min)
    if not t0 > 0 or not t_min > 0 or t_min > t0:
        raise ParameterError(f"need 0 < t_min <= t0, got t0={t0}, t_min={t_min}")
    rng = as_generator(rng)
    A = problem.size
    nv = problem.n_vars

    start = SubstitutionKey(rng.permutation(A))
    state = _State(problem, key_to_assignment(start))
    best_x = state.x.copy()
    best_e = state.energy
    temps = schedule(t0, t_min, sweeps)
    trace = AnnealTrace(temperatures=temps)
    started = time.perf_counter()
    for k, T in enumerate(temps):
        kinds = rng.random(nv) < 0.5
        flips = rng.integers(0, nv, size=nv)
        c1 = rng.integers(0, A, size=nv)
        c2 = rng.integers(0, A - 1, size=nv)
        c2 += c2 >= c1
        coins = rng.random(nv)
        beta = LN10 / T
        for s in range(nv):
            if kinds[s]:
                i = int(flips[s])
                d = state.flip_delta(i)
                if d <= 0 or coins[s] < math.exp(-d * beta):
                    state.flip(i, d)
                    trace.accepted += 1
                else:
                    continue
            else:
                idx, deltas, d = state.swap_moves(int(c1[s]), int(c2[s]))
                if idx is None:
                    continue
                if d <= 0 or coins[s] < math.exp(-d * beta):
                    state.apply(idx, deltas, d)
                    trace.accepted += 1
                else:
                    continue
            if state.energy < best_e:
                best_e = state.energy
                best_x = state.x.copy()
        trace.proposals += nv
        # resynchronize against rounding drift once per sweep
        state.energy = energy(problem, state.x)
        state.field = problem.linear + problem.quadratic @ state.x
        trace.records.append((k, float(T), state.energy, best_e))
    trace.runtime_ms = (time.perf_counter() - started) * 1000.0
    trace.assignment = best_x.astype(np.int8)
    trace.best_energy = energy(problem, best_x)
    trace.key, trace.feasible = decode_assignment(trace.assignment, problem)
    return trace

"""Additive-smoothed character n-gram models (orders 1 to 3).

Probabilities are stored as dense log10 tables, one per order up to ``n``:
``tables[k-1]`` has shape ``(A,) * k`` and its last axis is the successor
symbol. The first ``n - 1`` positions of a sequence are scored by the
lower-order tables instead of padding with a boundary symbol.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Alphabet, NormalizedText
from .errors import InputError, ParameterError

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.001
MAX_ORDER = 3


@dataclass(frozen=True, eq=False)
class NgramModel:
    alphabet: Alphabet
    order: int
    alpha: float
    tables: tuple[np.ndarray, ...]
    counts: tuple[np.ndarray, ...] | None = None

    @property
    def size(self) -> int:
        return self.alphabet.size

    @property
    def log10_cond(self) -> np.ndarray:
        return self.tables[-1]

    @property
    def gram_counts(self) -> np.ndarray | None:
        return None if self.counts is None else self.counts[-1]

    @property
    def context_counts(self) -> np.ndarray | None:
        return None if self.counts is None else self.counts[-1].sum(axis=-1)

    @property
    def lower(self) -> "NgramModel | None":
        if self.order == 1:
            return None
        counts = None if self.counts is None else self.counts[:-1]
        return NgramModel(self.alphabet, self.order - 1, self.alpha, self.tables[:-1], counts)

    def with_order(self, order: int) -> "NgramModel":
        """Return the order-``order`` model from the same training run."""
        if not 1 <= order <= self.order:
            raise ParameterError(f"order {order} not available (model order {self.order})")
        counts = None if self.counts is None else self.counts[:order]
        return NgramModel(self.alphabet, order, self.alpha, self.tables[:order], counts)

    def cond_prob(self, context, symbol: int) -> float:
        """P(symbol | context) for a context of length order-1 (convenience)."""
        context = tuple(context)
        return 10.0 ** float(self.tables[len(context)][context + (symbol,)])


def _check_params(n: int, alpha: float):
    if n not in (1, 2, 3):
        raise ParameterError(f"n-gram order must be 1, 2 or 3, got {n}")
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")


def _gram_counts(seq: np.ndarray, k: int, size: int) -> np.ndarray:
    T = seq.size
    if T < k:
        return np.zeros((size,) * k, dtype=np.int64)
    flat = np.zeros(T - k + 1, dtype=np.int64)
    for j in range(k):
        flat = flat * size + seq[j : T - k + 1 + j]
    return np.bincount(flat, minlength=size**k).reshape((size,) * k)


def _smooth(counts: np.ndarray, alpha: float, size: int) -> np.ndarray:
    ctx = counts.sum(axis=-1, keepdims=True)
    return np.log10((counts + alpha) / (ctx + alpha * size))


def train(text: NormalizedText, n: int = 3, alpha: float = DEFAULT_ALPHA) -> NgramModel:
    """Count k-grams for k = 1..n and smooth each order with add-alpha.

    P(c | h) = (count(h c) + alpha) / (count(h) + alpha * |A|), where
    count(h) is the number of times h is followed by any symbol.
    """
    _check_params(n, alpha)
    size = text.alphabet.size
    seq = text.indices
    if seq.size < n:
        log.warning("training text of length %d is shorter than order %d; only smoothing mass remains",
                    seq.size, n)
    counts = tuple(_gram_counts(seq, k, size) for k in range(1, n + 1))
    tables = tuple(_smooth(c, alpha, size) for c in counts)
    for t in tables:
        t.setflags(write=False)
    return NgramModel(text.alphabet, n, float(alpha), tables, counts)


def _as_seq(model: NgramModel, seq) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.intp)
    if arr.size and (arr.min() < 0 or arr.max() >= model.size):
        raise InputError(f"symbol index out of range for alphabet of size {model.size}")
    return arr


def log_prob_batch(model: NgramModel, seqs: np.ndarray) -> np.ndarray:
    """log10 probability of each row of a 2-D index array (no validation)."""
    seqs = np.asarray(seqs)
    B, T = seqs.shape
    out = np.zeros(B, dtype=np.float64)
    if T == 0:
        return out
    n, A = model.order, model.size
    for t in range(min(n - 1, T)):
        out += model.tables[t][tuple(seqs[:, j] for j in range(t + 1))]
    if T >= n:
        flat = np.zeros((B, T - n + 1), dtype=np.intp)
        for j in range(n):
            flat *= A
            flat += seqs[:, j : T - n + 1 + j]
        out += model.tables[-1].ravel().take(flat).sum(axis=1)
    return out


def log_prob(model: NgramModel, seq) -> float:
    """Sum over positions of log10 P(c_t | preceding n-1 symbols)."""
    arr = _as_seq(model, seq)
    if arr.size == 0:
        return 0.0
    return float(log_prob_batch(model, arr[None, :])[0])


def per_char_log_prob(model: NgramModel, seq) -> float:
    arr = _as_seq(model, seq)
    if arr.size == 0:
        raise InputError("per-character score of an empty sequence is undefined")
    return log_prob(model, arr) / arr.size


def save_model(model: NgramModel, path: str | Path):
    """Write the model as JSON; floats use 17 significant digits."""
    doc = {
        "alphabet": model.alphabet.to_dict(),
        "n": model.order,
        "alpha": model.alpha,
        "tables": {str(k + 1): [float(v) for v in t.ravel()] for k, t in enumerate(model.tables)},
    }
    text = json.dumps(doc, separators=(",", ":"))
    Path(path).write_text(text, encoding="utf-8")


def load_model(path: str | Path) -> NgramModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    alphabet = Alphabet.from_dict(doc["alphabet"])
    n = int(doc["n"])
    _check_params(n, float(doc["alpha"]))
    A = alphabet.size
    tables = []
    for k in range(1, n + 1):
        arr = np.array(doc["tables"][str(k)], dtype=np.float64)
        if arr.size != A**k:
            raise InputError(f"order-{k} table has {arr.size} entries, expected {A ** k}")
        arr = arr.reshape((A,) * k)
        arr.setflags(write=False)
        tables.append(arr)
    return NgramModel(alphabet, n, float(doc["alpha"]), tuple(tables), None)


def uniform_model(alphabet: Alphabet, n: int = 1) -> NgramModel:
    """Model assigning 1/|A| to every symbol in every context."""
    _check_params(n, DEFAULT_ALPHA)
    A = alphabet.size
    tables = []
    for k in range(1, n + 1):
        t = np.full((A,) * k, -math.log10(A))
        t.setflags(write=False)
        tables.append(t)
    return NgramModel(alphabet, n, DEFAULT_ALPHA, tuple(tables), None)

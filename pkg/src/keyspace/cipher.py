"""Substitution keys, plaintext sampling, encryption and decryption."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Alphabet, NormalizedText
from .errors import InputError, InsufficientDataError, ParameterError

STANDARD_LENGTHS = (200, 400, 600, 800, 1000)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class SubstitutionKey:
    """Bijection plain index -> cipher index."""

    mapping: np.ndarray

    def __post_init__(self):
        arr = np.array(self.mapping, dtype=np.intp)
        if arr.ndim != 1 or arr.size < 2:
            raise InputError("a key needs a 1-D mapping of at least 2 entries")
        if not np.array_equal(np.sort(arr), np.arange(arr.size)):
            raise InputError("key mapping is not a permutation")
        arr.setflags(write=False)
        object.__setattr__(self, "mapping", arr)

    @property
    def size(self) -> int:
        return int(self.mapping.size)

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, SubstitutionKey):
            return NotImplemented
        return np.array_equal(self.mapping, other.mapping)

    def __hash__(self) -> int:
        return hash(self.mapping.tobytes())

    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.mapping)
        inv[self.mapping] = np.arange(self.size)
        return inv

    def swapped(self, i: int, j: int) -> "SubstitutionKey":
        m = self.mapping.copy()
        m[i], m[j] = m[j], m[i]
        return SubstitutionKey(m)

    @classmethod
    def identity(cls, size: int) -> "SubstitutionKey":
        return cls(np.arange(size))

    def to_string(self, alphabet: Alphabet) -> str:
        """Position i holds the cipher symbol for plain symbol i."""
        if alphabet.size != self.size:
            raise InputError("alphabet and key sizes differ")
        return alphabet.render(self.mapping)

    @classmethod
    def from_string(cls, text: str, alphabet: Alphabet) -> "SubstitutionKey":
        index = {s: i for i, s in enumerate(alphabet.symbols)}
        try:
            mapping = [index[c] for c in text.strip().upper()]
        except KeyError as exc:
            raise InputError(f"key symbol {exc.args[0]!r} not in alphabet") from None
        if len(mapping) != alphabet.size:
            raise InputError(f"key has {len(mapping)} symbols, alphabet has {alphabet.size}")
        return cls(mapping)


@dataclass(frozen=True, eq=False)
class CipherInstance:
    plaintext: NormalizedText
    ciphertext: np.ndarray
    true_key: SubstitutionKey
    corpus_label: str = ""
    offset: int = 0

    @property
    def alphabet(self) -> Alphabet:
        return self.plaintext.alphabet

    @property
    def length(self) -> int:
        return len(self.plaintext)

    def to_dict(self) -> dict:
        a = self.alphabet
        return {
            "alphabet": a.to_dict(),
            "corpus": self.corpus_label,
            "offset": self.offset,
            "length": self.length,
            "plaintext": self.plaintext.render(),
            "ciphertext": a.render(self.ciphertext),
            "true_key": self.true_key.to_string(a),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CipherInstance":
        a = Alphabet.from_dict(doc["alphabet"])
        plain = NormalizedText.from_symbols(doc["plaintext"], a, doc.get("corpus", ""))
        cipher = NormalizedText.from_symbols(doc["ciphertext"], a).indices
        key = SubstitutionKey.from_string(doc["true_key"], a)
        if not np.array_equal(encrypt(plain.indices, key), cipher):
            raise InputError("ciphertext is not the encryption of plaintext under true_key")
        return cls(plain, cipher, key, doc.get("corpus", ""), int(doc.get("offset", 0)))


def random_key(rng, size: int) -> SubstitutionKey:
    """Uniformly random permutation of ``size`` symbols."""
    if size < 2:
        raise ParameterError(f"key size must be >= 2, got {size}")
    return SubstitutionKey(as_generator(rng).permutation(size))


def random_keys(rng, size: int, count: int) -> np.ndarray:
    """``count`` independent uniform permutations as a (count, size) array."""
    base = np.broadcast_to(np.arange(size), (count, size))
    return as_generator(rng).permuted(base, axis=1)


def _check(seq, size: int) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.intp)
    if arr.size and (arr.min() < 0 or arr.max() >= size):
        raise InputError(f"index out of range for key of size {size}")
    return arr


def encrypt(plain, key: SubstitutionKey) -> np.ndarray:
    arr = _check(plain, key.size)
    return key.mapping[arr]


def decrypt(cipher, key: SubstitutionKey) -> np.ndarray:
    arr = _check(cipher, key.size)
    return key.inverse()[arr]


def sample_plaintext(corpus: NormalizedText, length: int, rng) -> tuple[NormalizedText, int]:
    """Contiguous segment whose start is uniform on [0, len - length]."""
    if length < 1:
        raise ParameterError(f"segment length must be >= 1, got {length}")
    if len(corpus) < length:
        raise InsufficientDataError(
            f"corpus {corpus.source_label!r} has {len(corpus)} symbols, need {length}"
        )
    offset = int(as_generator(rng).integers(0, len(corpus) - length + 1))
    seg = corpus.indices[offset : offset + length]
    return NormalizedText(corpus.alphabet, seg, corpus.source_label), offset


def make_instance(corpus: NormalizedText, length: int, rng) -> CipherInstance:
    rng = as_generator(rng)
    plain, offset = sample_plaintext(corpus, length, rng)
    key = random_key(rng, corpus.alphabet.size)
    return CipherInstance(plain, encrypt(plain.indices, key), key, corpus.source_label, offset)


def key_distance(a: SubstitutionKey, b: SubstitutionKey) -> float:
    """Fraction of plain symbols on which two keys agree."""
    if a.size != b.size:
        raise InputError(f"key sizes differ: {a.size} vs {b.size}")
    return float(np.mean(a.mapping == b.mapping))

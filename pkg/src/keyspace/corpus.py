"""Alphabets, orthographic normalization and symbol-index sequences.

Two preset orthographies are provided:

* ``modern``: the 26 basic Latin letters, nothing merged or dropped.
* ``historical``: I/J and U/V are collapsed (J->I, V->U) and K, W, X, Y are
  dropped, leaving 20 symbols.

``custom`` builds any other orthography from explicit symbol, merge and
exclusion lists.
"""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AlphabetError, AlphabetMismatchError, ParameterError

__all__ = [
    "Alphabet",
    "NormalizedText",
    "build_alphabet",
    "normalize_text",
    "merge_corpora",
    "load_text",
]

MODES = ("historical", "modern", "custom")

_HISTORICAL_MERGES = {"J": "I", "V": "U"}
_HISTORICAL_EXCLUDED = ("K", "W", "X", "Y")


@dataclass(frozen=True)
class Alphabet:
    """Ordered symbol set plus the merge/exclusion rules of an orthography."""

    mode: str
    symbols: tuple[str, ...]
    merges: tuple[tuple[str, str], ...] = ()
    excluded: tuple[str, ...] = ()
    _lookup: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        _validate(self.symbols, dict(self.merges), self.excluded)
        index = {s: i for i, s in enumerate(self.symbols)}
        table = dict(index)
        for src, dst in self.merges:
            table[src] = index[dst]
        object.__setattr__(self, "_lookup", table)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def merge_map(self) -> dict[str, str]:
        return dict(self.merges)

    def index_of(self, letter: str) -> int | None:
        """Index of an uppercase letter after merging, or None if dropped."""
        return self._lookup.get(letter)

    def render(self, indices: Iterable[int]) -> str:
        return "".join(self.symbols[i] for i in indices)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "symbols": "".join(self.symbols),
            "merge_map": dict(self.merges),
            "excluded": "".join(self.excluded),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Alphabet":
        mode = data["mode"]
        if mode in ("historical", "modern"):
            return build_alphabet(mode)
        return build_alphabet(
            "custom",
            {
                "symbols": data["symbols"],
                "merge_map": data.get("merge_map", {}),
                "excluded": data.get("excluded", ""),
            },
        )


def _validate(symbols: Sequence[str], merges: Mapping[str, str], excluded: Sequence[str]):
    seen = set()
    for s in symbols:
        if len(s) != 1 or not s.isupper():
            raise AlphabetError(f"symbol {s!r} is not a single uppercase letter", s)
        if s in seen:
            raise AlphabetError(f"symbol {s!r} listed twice", s)
        seen.add(s)
    if len(symbols) < 2:
        raise AlphabetError("an alphabet needs at least 2 symbols")
    for src, dst in merges.items():
        if src in seen:
            raise AlphabetError(f"letter {src!r} is both retained and merged into {dst!r}", src)
        if dst not in seen:
            raise AlphabetError(f"merge target {dst!r} (from {src!r}) is not a retained symbol", dst)
    for x in excluded:
        if x in seen:
            raise AlphabetError(f"letter {x!r} is both retained and excluded", x)
        if x in merges:
            raise AlphabetError(f"letter {x!r} is both merged and excluded", x)


def build_alphabet(mode: str, custom_spec: Mapping | None = None) -> Alphabet:
    """Build a preset or custom alphabet.

    ``custom_spec`` is only accepted for ``mode="custom"`` and holds
    ``symbols`` (string or list), ``merge_map`` (dict) and ``excluded``
    (string or list).
    """
    if mode not in MODES:
        raise ParameterError(f"unknown alphabet mode {mode!r}; expected one of {MODES}")
    if mode != "custom":
        if custom_spec is not None:
            raise ParameterError(f"custom_spec given for preset mode {mode!r}")
        if mode == "modern":
            return Alphabet("modern", tuple(string.ascii_uppercase))
        dropped = set(_HISTORICAL_MERGES) | set(_HISTORICAL_EXCLUDED)
        symbols = tuple(c for c in string.ascii_uppercase if c not in dropped)
        return Alphabet(
            "historical",
            symbols,
            tuple(sorted(_HISTORICAL_MERGES.items())),
            _HISTORICAL_EXCLUDED,
        )
    if custom_spec is None:
        raise ParameterError("mode 'custom' requires custom_spec")
    symbols = tuple(c.upper() for c in custom_spec["symbols"])
    merges = {k.upper(): v.upper() for k, v in dict(custom_spec.get("merge_map", {})).items()}
    excluded = tuple(c.upper() for c in custom_spec.get("excluded", ()))
    return Alphabet("custom", symbols, tuple(sorted(merges.items())), excluded)


@dataclass(frozen=True, eq=False)
class NormalizedText:
    """A symbol-index sequence over one alphabet (read-only int array)."""

    alphabet: Alphabet
    indices: np.ndarray
    source_label: str = ""

    def __post_init__(self):
        arr = np.ascontiguousarray(self.indices, dtype=np.intp)
        if arr.ndim != 1:
            raise ParameterError("indices must be one-dimensional")
        if arr.size and (arr.min() < 0 or arr.max() >= self.alphabet.size):
            raise ParameterError("index outside alphabet range")
        arr.setflags(write=False)
        object.__setattr__(self, "indices", arr)

    def __len__(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NormalizedText):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.indices, other.indices)

    def render(self) -> str:
        return self.alphabet.render(self.indices)

    @classmethod
    def from_symbols(cls, text: str, alphabet: Alphabet, source_label: str = "") -> "NormalizedText":
        """Wrap an already-normalized symbol string (no cleaning applied)."""
        index = {s: i for i, s in enumerate(alphabet.symbols)}
        return cls(alphabet, np.array([index[c] for c in text], dtype=np.intp), source_label)


def _strip_marks(raw: str) -> str:
    decomposed = unicodedata.normalize("NFD", raw)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def normalize_text(raw: str, alphabet: Alphabet, source_label: str = "") -> NormalizedText:
    """Strip diacritics, punctuation, digits and whitespace; uppercase; merge.

    Every character that does not end up as a retained symbol is dropped,
    word boundaries included.
    """
    out = []
    for ch in _strip_marks(raw).upper():
        # after decomposition anything outside basic Latin is dropped
        if not ("A" <= ch <= "Z"):
            continue
        idx = alphabet.index_of(ch)
        if idx is not None:
            out.append(idx)
    return NormalizedText(alphabet, np.array(out, dtype=np.intp), source_label)


def merge_corpora(parts: Sequence[NormalizedText]) -> NormalizedText:
    """Concatenate texts over one alphabet, in order."""
    if not parts:
        raise ParameterError("merge_corpora needs at least one part")
    if len(parts) == 1:
        return parts[0]
    ref = parts[0].alphabet
    for i, part in enumerate(parts):
        if part.alphabet != ref:
            raise AlphabetMismatchError(
                f"part {i} ({part.source_label or 'unlabelled'}) uses alphabet "
                f"{part.alphabet.mode!r}, expected {ref.mode!r}"
            )
    merged = np.concatenate([p.indices for p in parts])
    return NormalizedText(ref, merged, "merged")


def load_text(path: str | Path, alphabet: Alphabet, label: str | None = None) -> NormalizedText:
    """Read a UTF-8 file and normalize it."""
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    return normalize_text(raw, alphabet, label if label is not None else path.stem)

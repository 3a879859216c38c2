"""Key-space contraction of substitution ciphers under character n-gram models."""

__version__ = "0.1.0"

from .cipher import (  # noqa: E402
    CipherInstance,
    SubstitutionKey,
    decrypt,
    encrypt,
    key_distance,
    random_key,
    sample_plaintext,
)
from .corpus import Alphabet, NormalizedText, build_alphabet, merge_corpora, normalize_text  # noqa: E402
from .landscape import (  # noqa: E402
    LandscapeEstimate,
    classical_expected_trials,
    enumerate_exact,
    estimate_p_good,
    grover_oracle_calls,
    normalize_score,
    score_key,
)
from .ngram import NgramModel, log_prob, per_char_log_prob, train  # noqa: E402
from .qubo import anneal, build_qubo, decode_assignment, energy  # noqa: E402
from .search import calibrate_t0, hill_climb, simulated_annealing  # noqa: E402

__all__ = [
    "Alphabet",
    "CipherInstance",
    "LandscapeEstimate",
    "NgramModel",
    "NormalizedText",
    "SubstitutionKey",
    "anneal",
    "build_alphabet",
    "build_qubo",
    "calibrate_t0",
    "classical_expected_trials",
    "decode_assignment",
    "decrypt",
    "encrypt",
    "energy",
    "enumerate_exact",
    "estimate_p_good",
    "grover_oracle_calls",
    "hill_climb",
    "key_distance",
    "log_prob",
    "merge_corpora",
    "normalize_score",
    "normalize_text",
    "per_char_log_prob",
    "random_key",
    "sample_plaintext",
    "score_key",
    "simulated_annealing",
    "train",
]

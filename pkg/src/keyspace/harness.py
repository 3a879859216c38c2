"""Seeded experiment sweeps and their CSV outputs.

A sweep visits every (corpus, length, replicate) cell: it samples and
encrypts a plaintext segment, runs the configured solvers, pools the best
score they reach with the true key's score, estimates the marked fraction
for every threshold and converts it into search costs. Every cell draws its
randomness from ``SeedSequence(seed, spawn_key=(corpus_index, L))``, so the
output bytes do not depend on how many worker processes run the cells.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .cipher import STANDARD_LENGTHS, CipherInstance, SubstitutionKey, decrypt, key_distance, make_instance
from .corpus import Alphabet, NormalizedText, build_alphabet, load_text, merge_corpora
from .errors import ParameterError
from .landscape import (
    DEFAULT_SAMPLES,
    DEFAULT_TAUS,
    LandscapeEstimate,
    classical_expected_trials,
    estimate_p_good,
    grover_oracle_calls,
    normalize_score,
    score_key,
)
from .ngram import DEFAULT_ALPHA, NgramModel, train
from .qubo import anneal, build_qubo
from .search import hill_climb, simulated_annealing

log = logging.getLogger(__name__)

METHODS = ("hill_climb", "anneal", "qubo")
DEFAULT_BINS = 50
DEFAULT_TAU_STAR = 0.98

PGOOD_COLUMNS = ("corpus", "alphabet", "L", "tau", "n_samples", "n_marked", "p_hat", "stderr",
                 "p_upper95", "grover_calls", "classical_trials", "zero_marked_flag", "seed", "config_hash")
HIST_COLUMNS = ("corpus", "alphabet", "L", "seed", "bin_lo", "bin_hi", "count", "config_hash")
SCALING_COLUMNS = ("corpus", "alphabet", "L", "tau", "grover_calls", "classical_trials", "seed", "config_hash")
SEARCH_COLUMNS = ("corpus", "alphabet", "L", "method", "seed", "budget", "runtime_ms", "best_score",
                  "normalized_score", "key_accuracy", "char_accuracy", "key", "config_hash")
QUBO_COLUMNS = ("corpus", "alphabet", "L", "seed", "sweep", "temperature", "energy", "best_energy",
                "config_hash")


@dataclass
class ExperimentConfig:
    corpora: list[dict] = field(default_factory=list)
    alphabet: str | dict = "historical"
    order: int = 3
    alpha: float = DEFAULT_ALPHA
    lengths: tuple[int, ...] = STANDARD_LENGTHS
    taus: tuple[float, ...] = DEFAULT_TAUS
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    replicates: int = 1
    methods: tuple[str, ...] = METHODS
    hill_climb: dict = field(default_factory=lambda: {"restarts": 20, "max_iters": 500})
    anneal: dict = field(default_factory=lambda: {"cooling": 0.99, "steps_per_temp": 100,
                                                  "t_min_ratio": 1e-3})
    qubo: dict = field(default_factory=lambda: {"sweeps": 500, "t_min": 1e-2})
    merged: bool = False
    hist_bins: int = DEFAULT_BINS
    tau_star: float = DEFAULT_TAU_STAR
    record_runtime: bool = False
    out_dir: str = "results"

    def __post_init__(self):
        self.lengths = tuple(sorted(int(v) for v in self.lengths))
        self.taus = tuple(sorted(float(v) for v in self.taus))
        self.methods = tuple(self.methods)
        if not self.lengths or not self.taus:
            raise ParameterError("lengths and taus must be non-empty")
        if len(set(self.lengths)) != len(self.lengths) or len(set(self.taus)) != len(self.taus):
            raise ParameterError("lengths and taus must not repeat")
        if self.lengths[0] < 1:
            raise ParameterError("lengths must be positive")
        if not all(0 < t < 1 for t in self.taus):
            raise ParameterError("every tau must lie in (0, 1)")
        if self.tau_star not in self.taus:
            raise ParameterError(f"tau_star {self.tau_star} is not one of the configured taus")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ParameterError(f"unknown methods: {sorted(unknown)}")
        if self.n_samples < 1 or self.replicates < 1 or self.hist_bins < 1:
            raise ParameterError("n_samples, replicates and hist_bins must be >= 1")
        for c in self.corpora:
            if "path" not in c:
                raise ParameterError(f"corpus entry {c!r} has no path")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | Path | None = None) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        doc = dict(doc)
        corpora = []
        for entry in doc.get("corpora", []):
            entry = {"path": entry} if isinstance(entry, str) else dict(entry)
            p = Path(entry["path"])
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            entry["path"] = str(p)
            entry.setdefault("label", p.stem)
            corpora.append(entry)
        doc["corpora"] = corpora
        defaults = cls()
        for name in ("hill_climb", "anneal", "qubo"):
            if name in doc:
                doc[name] = {**getattr(defaults, name), **doc[name]}
        return cls(**doc)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """Hash of everything that affects results (not the output directory)."""
        blob = json.dumps(_portable_config(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def build_alphabet(self) -> Alphabet:
        if isinstance(self.alphabet, dict):
            return build_alphabet("custom", self.alphabet)
        return build_alphabet(self.alphabet)


@dataclass
class CellResult:
    corpus: str
    alphabet: str
    length: int
    seed: int
    estimate: LandscapeEstimate | None = None
    search_rows: list[dict] = field(default_factory=list)
    qubo_rows: list[dict] = field(default_factory=list)
    hist_rows: list[dict] = field(default_factory=list)
    skipped: str | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    config_hash: str
    seed: int
    version: str
    cells: list[CellResult] = field(default_factory=list)
    pgood_rows: list[dict] = field(default_factory=list)
    scaling_rows: list[dict] = field(default_factory=list)
    search_rows: list[dict] = field(default_factory=list)
    hist_rows: list[dict] = field(default_factory=list)
    qubo_rows: list[dict] = field(default_factory=list)
    files: dict[str, Path] = field(default_factory=dict)

    @property
    def skipped(self) -> list[tuple[str, int, str]]:
        return [(c.corpus, c.length, c.skipped) for c in self.cells if c.skipped]

    def provenance(self) -> dict:
        return {"config_hash": self.config_hash, "seed": self.seed, "version": self.version}


def _int_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, np.uint64)[0] >> np.uint64(1))


def char_accuracy(key: SubstitutionKey, instance: CipherInstance) -> float:
    return float(np.mean(decrypt(instance.ciphertext, key) == instance.plaintext.indices))


def histogram_rows(normalized_scores, bins: int = DEFAULT_BINS) -> list[dict]:
    """Equal-width bins over [0, 1]; the top bin is closed on the right."""
    scores = np.asarray(normalized_scores, dtype=np.float64)
    if scores.size == 0:
        raise ParameterError("cannot histogram an empty sample")
    counts, edges = np.histogram(scores, bins=bins, range=(0.0, 1.0))
    return [{"bin_lo": float(edges[i]), "bin_hi": float(edges[i + 1]), "count": int(counts[i])}
            for i in range(bins)]


def emit_histograms(scores, bins: int = DEFAULT_BINS, keys: dict | None = None) -> list[dict]:
    rows = histogram_rows(scores, bins)
    if keys:
        rows = [{**keys, **r} for r in rows]
    return rows


def emit_cost_curves(estimates: Iterable[tuple[dict, LandscapeEstimate]]) -> list[dict]:
    """One row per threshold; zero-marked cells are costed at the 3/N bound."""
    rows = []
    for keys, est in estimates:
        for i, tau in enumerate(est.taus):
            p, flagged = est.cost_p(i)
            rows.append({
                **{k: keys[k] for k in ("corpus", "alphabet", "L")},
                "tau": tau,
                "n_samples": est.n_samples,
                "n_marked": est.marked_counts[i],
                "p_hat": est.p_hat[i],
                "stderr": est.stderr[i],
                "p_upper95": est.p_upper95[i],
                "grover_calls": grover_oracle_calls(p),
                "classical_trials": classical_expected_trials(p),
                "zero_marked_flag": int(flagged),
                "seed": keys["seed"],
            })
    return rows


def emit_scaling(cost_rows: Sequence[dict], tau_star: float = DEFAULT_TAU_STAR,
                 taus: Sequence[float] | None = None) -> list[dict]:
    """Rows of the cost table at tau_star, across lengths."""
    available = set(taus) if taus is not None else {r["tau"] for r in cost_rows}
    if tau_star not in available:
        raise ParameterError(f"tau_star {tau_star} is not among the thresholds {sorted(available)}")
    return [{k: r.get(k) for k in SCALING_COLUMNS} for r in cost_rows if r["tau"] == tau_star]


def emit_solver_comparison(runs: Iterable[dict]) -> list[dict]:
    return [{k: r.get(k) for k in SEARCH_COLUMNS} for r in runs]


def _run_method(method: str, cfg: ExperimentConfig, instance: CipherInstance, model: NgramModel,
                seed: int) -> tuple[SubstitutionKey, float, int, float, list]:
    cipher = instance.ciphertext
    if method == "hill_climb":
        tr = hill_climb(cipher, model, rng=seed, **cfg.hill_climb)
        return tr.best_key, tr.best_score, tr.scoring_calls, tr.runtime_ms, []
    if method == "anneal":
        tr = simulated_annealing(cipher, model, rng=seed, **cfg.anneal)
        return tr.best_key, tr.best_score, tr.scoring_calls, tr.runtime_ms, []
    opts = dict(cfg.qubo)
    lam = opts.pop("lam", None)
    problem = build_qubo(cipher, model.with_order(2), lam)
    tr = anneal(problem, rng=seed, **opts)
    score = score_key(tr.key, cipher, model)
    return tr.key, score, tr.proposals, tr.runtime_ms, tr.records


def run_cell(cfg: ExperimentConfig, corpus: NormalizedText, model: NgramModel, corpus_index: int,
             length: int, run_seed: int) -> CellResult:
    alphabet = corpus.alphabet
    cell = CellResult(corpus.source_label, alphabet.mode, length, run_seed)
    keys = {"corpus": cell.corpus, "alphabet": cell.alphabet, "L": length, "seed": run_seed}
    if len(corpus) < length:
        cell.skipped = f"corpus has {len(corpus)} symbols, need {length}"
        log.warning("skipping %s L=%d: %s", cell.corpus, length, cell.skipped)
        return cell
    root = np.random.SeedSequence(run_seed, spawn_key=(corpus_index, length))
    s_inst, s_mc, *s_methods = root.spawn(2 + len(METHODS))
    instance = make_instance(corpus, length, np.random.default_rng(s_inst))
    true_score = score_key(instance.true_key, instance.ciphertext, model)

    runs = []
    for method, s in zip(METHODS, s_methods):
        if method not in cfg.methods:
            continue
        key, score, budget, runtime, trace = _run_method(method, cfg, instance, model, _int_seed(s))
        runs.append((method, key, score, budget, runtime))
        for sweep, temp, e, best in trace:
            cell.qubo_rows.append({**keys, "sweep": sweep, "temperature": temp, "energy": e,
                                   "best_energy": best})

    s_best = max([true_score] + [r[2] for r in runs])
    est = estimate_p_good(instance.ciphertext, model, cfg.taus, cfg.n_samples, _int_seed(s_mc),
                          s_best_external=s_best)
    cell.estimate = est
    cell.hist_rows = emit_histograms(est.normalized(), cfg.hist_bins, keys)
    s_floor = min(est.s_floor, min((r[2] for r in runs), default=est.s_floor))
    for method, key, score, budget, runtime in runs:
        cell.search_rows.append({
            **keys,
            "method": method,
            "budget": budget,
            "runtime_ms": runtime if cfg.record_runtime else None,
            "best_score": score,
            "normalized_score": normalize_score(score, s_best, s_floor),
            "key_accuracy": key_distance(key, instance.true_key),
            "char_accuracy": char_accuracy(key, instance),
            "key": key.to_string(alphabet),
        })
    return cell


# worker-process state, filled once per process by _init_worker
_WORKER: dict = {}


def _init_worker(cfg, corpora, models):
    _WORKER.update(cfg=cfg, corpora=corpora, models=models)


def _cell_job(args) -> CellResult:
    ci, length, run_seed = args
    return run_cell(_WORKER["cfg"], _WORKER["corpora"][ci], _WORKER["models"][ci], ci, length, run_seed)


def load_corpora(cfg: ExperimentConfig) -> list[NormalizedText]:
    alphabet = cfg.build_alphabet()
    texts = [load_text(c["path"], alphabet, c["label"]) for c in cfg.corpora]
    if cfg.merged and len(texts) > 1:
        texts.append(merge_corpora(texts))
    labels = [t.source_label for t in texts]
    if len(set(labels)) != len(labels):
        raise ParameterError(f"corpus labels must be unique, got {labels}")
    return texts


def run_sweep(cfg: ExperimentConfig, workers: int = 1, write: bool = True) -> ExperimentResult:
    """Run every cell of the grid and (optionally) write all CSV outputs."""
    if not cfg.corpora:
        raise ParameterError("the config names no corpora")
    corpora = load_corpora(cfg)
    models = [train(t, cfg.order, cfg.alpha) for t in corpora]
    jobs = [(ci, L, cfg.seed + r)
            for ci in range(len(corpora)) for L in cfg.lengths for r in range(cfg.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(cfg, corpora, models)) as pool:
            cells = list(pool.map(_cell_job, jobs))
    else:
        cells = [run_cell(cfg, corpora[ci], models[ci], ci, L, s) for ci, L, s in jobs]

    result = ExperimentResult(cfg, cfg.config_hash(), cfg.seed, __version__, cells)
    done = [c for c in cells if c.estimate is not None]
    cost = emit_cost_curves(({"corpus": c.corpus, "alphabet": c.alphabet, "L": c.length,
                              "seed": c.seed}, c.estimate) for c in done)
    result.pgood_rows = sorted(cost, key=lambda r: (r["corpus"], r["alphabet"], r["L"], r["tau"], r["seed"]))
    result.scaling_rows = emit_scaling(result.pgood_rows, cfg.tau_star, cfg.taus)
    result.search_rows = sorted(emit_solver_comparison(r for c in done for r in c.search_rows),
                                key=lambda r: (r["corpus"], r["alphabet"], r["L"], r["method"], r["seed"]))
    result.hist_rows = sorted((r for c in done for r in c.hist_rows),
                              key=lambda r: (r["corpus"], r["alphabet"], r["L"], r["seed"], r["bin_lo"]))
    result.qubo_rows = sorted((r for c in done for r in c.qubo_rows),
                              key=lambda r: (r["corpus"], r["alphabet"], r["L"], r["seed"], r["sweep"]))
    for rows in (result.pgood_rows, result.scaling_rows, result.search_rows, result.hist_rows,
                 result.qubo_rows):
        for r in rows:
            r["config_hash"] = result.config_hash
    if write:
        write_outputs(result, cfg.out_dir)
    return result


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        # shortest repr that round-trips, so derived columns recompute exactly
        return repr(float(v))
    return str(v)


def provenance_line(result: ExperimentResult) -> str:
    return (f"# keyspace version={result.version} config_hash={result.config_hash} "
            f"seed={result.seed}")


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[dict], header_comment: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header_comment + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r.get(c)) for c in columns])


def read_csv(path: str | Path) -> tuple[str, list[dict]]:
    """Return the provenance comment and the data rows (as strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        comment = fh.readline().rstrip("\n")
        rows = list(csv.DictReader(fh))
    return comment, rows


def write_outputs(result: ExperimentResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    line = provenance_line(result)
    files = {
        "pgood": (PGOOD_COLUMNS, result.pgood_rows),
        "scores_hist": (HIST_COLUMNS, result.hist_rows),
        "scaling": (SCALING_COLUMNS, result.scaling_rows),
        "search_runs": (SEARCH_COLUMNS, result.search_rows),
        "qubo_trace": (QUBO_COLUMNS, result.qubo_rows),
    }
    for name, (cols, rows) in files.items():
        path = out / f"{name}.csv"
        write_csv(path, cols, rows, line)
        result.files[name] = path
    prov = out / "provenance.json"
    doc = {**result.provenance(), "config": _portable_config(result.config),
           "skipped": [list(s) for s in result.skipped]}
    prov.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    result.files["provenance"] = prov
    return result.files


def _portable_config(cfg: ExperimentConfig) -> dict:
    doc = cfg.to_dict()
    doc.pop("out_dir")
    doc["corpora"] = [{"label": c["label"], "path": Path(c["path"]).name} for c in cfg.corpora]
    return doc

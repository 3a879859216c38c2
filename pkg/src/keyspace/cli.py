"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cipher import STANDARD_LENGTHS, CipherInstance, make_instance
from .corpus import build_alphabet, load_text, merge_corpora
from .errors import InputError, InsufficientDataError, KeyspaceError, ParameterError
from .harness import (
    PGOOD_COLUMNS,
    QUBO_COLUMNS,
    SEARCH_COLUMNS,
    ExperimentConfig,
    char_accuracy,
    emit_cost_curves,
    run_sweep,
    write_csv,
)
from .landscape import DEFAULT_SAMPLES, DEFAULT_TAUS, estimate_p_good, normalize_score, score_key
from .ngram import DEFAULT_ALPHA, load_model, save_model, train
from .qubo import anneal, build_qubo
from .search import hill_climb, simulated_annealing

log = logging.getLogger("keyspace")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def _add_common(p: argparse.ArgumentParser, *names: str):
    if "seed" in names:
        p.add_argument("--seed", type=int, default=None, help="master random seed")
    if "out" in names:
        p.add_argument("--out", default=None, help="output directory")
    if "alphabet" in names:
        p.add_argument("--alphabet", choices=("historical", "modern"), default=None)
    if "order" in names:
        p.add_argument("--order", type=int, default=None, help="n-gram order (1-3)")
    if "samples" in names:
        p.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
    if "tau" in names:
        p.add_argument("--tau", type=_float_list, default=None, help="comma-separated thresholds")
    if "lengths" in names:
        p.add_argument("--lengths", type=_int_list, default=None, help="comma-separated cipher lengths")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="keyspace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"keyspace {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="normalize a UTF-8 text file")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="write here instead of stdout")
    _add_common(p, "alphabet")

    p = sub.add_parser("train", help="train an n-gram model (JSON)")
    p.add_argument("corpus", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    _add_common(p, "alphabet", "order")

    p = sub.add_parser("encrypt", help="sample and encrypt a plaintext segment")
    p.add_argument("corpus")
    p.add_argument("--length", "-L", type=int, default=STANDARD_LENGTHS[0])
    p.add_argument("-o", "--output", help="cipher instance JSON (stdout if omitted)")
    _add_common(p, "alphabet", "seed")

    p = sub.add_parser("estimate", help="Monte Carlo marked-key fractions")
    p.add_argument("--cipher", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--s-best", type=float, default=None,
                   help="best known score (default: true-key score from the cipher file)")
    p.add_argument("--workers", type=int, default=1)
    _add_common(p, "seed", "out", "samples", "tau")

    p = sub.add_parser("search", help="hill climbing or simulated annealing")
    p.add_argument("--cipher", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--method", choices=("hill_climb", "anneal"), default="hill_climb")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--max-iters", type=int, default=500)
    _add_common(p, "seed", "out")

    p = sub.add_parser("qubo", help="QUBO annealing")
    p.add_argument("--cipher", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--sweeps", type=int, default=500)
    p.add_argument("--lam", type=float, default=None, help="penalty weight")
    p.add_argument("--dump-problem", default=None, help="write QUBO coefficients as JSON")
    _add_common(p, "seed", "out")

    p = sub.add_parser("sweep", help="run a full experiment grid")
    p.add_argument("--config", default=None)
    p.add_argument("--corpus", action="append", default=None, help="corpus file (repeatable)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="record wall-clock runtimes")
    _add_common(p, "seed", "out", "alphabet", "order", "samples", "tau", "lengths")
    return parser


def _alphabet(args):
    return build_alphabet(args.alphabet or "historical")


def _provenance(seed) -> str:
    return f"# keyspace version={__version__} seed={seed}"


def _load_cipher(path) -> CipherInstance:
    return CipherInstance.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _load_pair(args):
    inst = _load_cipher(args.cipher)
    model = load_model(args.model)
    if model.alphabet != inst.alphabet:
        raise InputError("cipher and model use different alphabets")
    return inst, model


def cmd_normalize(args) -> int:
    text = load_text(args.input, _alphabet(args)).render()
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
    return EXIT_OK


def cmd_train(args) -> int:
    a = _alphabet(args)
    text = merge_corpora([load_text(p, a) for p in args.corpus])
    model = train(text, args.order or 3, args.alpha)
    save_model(model, args.output)
    log.info("trained order-%d model on %d symbols", model.order, len(text))
    return EXIT_OK


def cmd_encrypt(args) -> int:
    corpus = load_text(args.corpus, _alphabet(args))
    seed = 0 if args.seed is None else args.seed
    inst = make_instance(corpus, args.length, np.random.default_rng(seed))
    doc = {**inst.to_dict(), "seed": seed}
    blob = json.dumps(doc, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(blob, encoding="utf-8")
    else:
        sys.stdout.write(blob)
    return EXIT_OK


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_estimate(args) -> int:
    inst, model = _load_pair(args)
    seed = 0 if args.seed is None else args.seed
    s_best = args.s_best
    if s_best is None:
        s_best = score_key(inst.true_key, inst.ciphertext, model)
    est = estimate_p_good(inst.ciphertext, model, args.tau or DEFAULT_TAUS,
                          args.samples or DEFAULT_SAMPLES, seed, s_best, workers=args.workers)
    keys = {"corpus": inst.corpus_label, "alphabet": inst.alphabet.mode, "L": inst.length, "seed": seed}
    rows = emit_cost_curves([(keys, est)])
    path = _out_dir(args) / "pgood.csv"
    write_csv(path, PGOOD_COLUMNS, rows, _provenance(seed))
    for r in rows:
        print(f"tau={r['tau']}: marked {r['n_marked']}/{r['n_samples']}, grover {r['grover_calls']}")
    return EXIT_OK


def _search_row(inst, method, seed, key, score, budget, runtime, s_best=None, s_floor=None) -> dict:
    row = {
        "corpus": inst.corpus_label, "alphabet": inst.alphabet.mode, "L": inst.length,
        "method": method, "seed": seed, "budget": budget, "runtime_ms": runtime,
        "best_score": score, "key_accuracy": float(np.mean(key.mapping == inst.true_key.mapping)),
        "char_accuracy": char_accuracy(key, inst), "key": key.to_string(inst.alphabet),
    }
    if s_best is not None:
        row["normalized_score"] = normalize_score(score, s_best, s_floor)
    return row


def cmd_search(args) -> int:
    inst, model = _load_pair(args)
    seed = 0 if args.seed is None else args.seed
    if args.method == "hill_climb":
        tr = hill_climb(inst.ciphertext, model, args.restarts, args.max_iters, rng=seed)
    else:
        tr = simulated_annealing(inst.ciphertext, model, rng=seed)
    row = _search_row(inst, args.method, seed, tr.best_key, tr.best_score, tr.scoring_calls, tr.runtime_ms)
    write_csv(_out_dir(args) / "search_runs.csv", SEARCH_COLUMNS, [row], _provenance(seed))
    print(row["key"])
    return EXIT_OK


def cmd_qubo(args) -> int:
    inst, model = _load_pair(args)
    if model.order < 2:
        raise ParameterError("the qubo command needs a model of order >= 2")
    seed = 0 if args.seed is None else args.seed
    problem = build_qubo(inst.ciphertext, model.with_order(2), args.lam)
    if args.dump_problem:
        problem.dump(args.dump_problem)
    tr = anneal(problem, args.sweeps, rng=seed)
    out = _out_dir(args)
    trace_rows = [dict(zip(("sweep", "temperature", "energy", "best_energy"), r)) for r in tr.records]
    write_csv(out / "qubo_trace.csv", QUBO_COLUMNS[4:8], trace_rows, _provenance(seed))
    score = score_key(tr.key, inst.ciphertext, model)
    row = _search_row(inst, "qubo", seed, tr.key, score, tr.proposals, tr.runtime_ms)
    write_csv(out / "search_runs.csv", SEARCH_COLUMNS, [row], _provenance(seed))
    print(row["key"], "feasible" if tr.feasible else "repaired")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.is_file():
            raise UsageError(f"config file {cfg_path} not found")
        doc = json.loads(cfg_path.read_text(encoding="utf-8"))
        base = cfg_path.parent
    elif args.corpus:
        doc, base = {}, None
    else:
        raise UsageError("sweep needs --config or at least one --corpus")
    if args.corpus:
        doc["corpora"] = [{"path": str(Path(p).resolve()), "label": Path(p).stem} for p in args.corpus]
    overrides = {"seed": args.seed, "out_dir": args.out, "alphabet": args.alphabet, "order": args.order,
                 "n_samples": args.samples, "taus": args.tau, "lengths": args.lengths}
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.timing:
        doc["record_runtime"] = True
    cfg = ExperimentConfig.from_dict(doc, base_dir=base)
    result = run_sweep(cfg, workers=args.workers)
    for corpus, length, reason in result.skipped:
        log.warning("skipped %s L=%d: %s", corpus, length, reason)
    print(f"wrote {len(result.files)} files to {cfg.out_dir} (config {result.config_hash})")
    return EXIT_OK


COMMANDS = {
    "normalize": cmd_normalize,
    "train": cmd_train,
    "encrypt": cmd_encrypt,
    "estimate": cmd_estimate,
    "search": cmd_search,
    "qubo": cmd_qubo,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParameterError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, InsufficientDataError, KeyspaceError, OSError, UnicodeDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``kbspace {ingest,query,bench,grid,microbench,serve}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .config import ConfigError, load_config
from .estimator import SearchSpaceReducer

logger = logging.getLogger("kbspace")


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--bundle", help="index bundle directory")
    p.add_argument("--embeddings", help="word2vec text format vectors")
    p.add_argument("--stopwords", help="stopword file, one per line")
    p.add_argument("--d", type=int, help="lexical candidates per term")
    p.add_argument("--k", help="items per term, or 'auto'")
    p.add_argument("--k-max", type=int, dest="k_max", help="upper bound for automatic k")
    p.add_argument("--p", help="pruning threshold (number or 'inf')")
    p.add_argument("--auto-p-policy", dest="auto_p_policy",
                   choices=["exp5", "exp5-half", "exp4-half"], help="derive p from k")
    p.add_argument("--weights", help="coh,conn,rel,match weights summing to 1")
    p.add_argument("--bm25-top-n", type=int, dest="bm25_top_n", help="keep the n best facts")


def _flag_overrides(args) -> dict:
    out = {}
    for key in ("bundle", "embeddings", "stopwords", "d", "k", "k_max", "p", "weights", "bm25_top_n"):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    if getattr(args, "auto_p_policy", None):
        if "p" in out:
            raise ConfigError("--p and --auto-p-policy are mutually exclusive")
        out["p"] = args.auto_p_policy
    if isinstance(out.get("k"), str) and out["k"] != "auto":
        try:
            out["k"] = int(out["k"])
        except ValueError:
            raise ConfigError(f"--k must be an integer or 'auto', got {out['k']!r}") from None
    return out


def _estimator(args, **extra) -> SearchSpaceReducer:
    cfg = load_config(args.config, overrides=_flag_overrides(args))
    return SearchSpaceReducer(**cfg.estimator_params(), **extra).fit(cfg.bundle)


def _skip_signals(args) -> tuple[str, ...]:
    return tuple(s for s in ("coh", "conn", "rel", "match") if getattr(args, f"no_{s}", False))


# -- subcommands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    from .ingest import ingest

    out = ingest(args.items, args.out, facts_path=args.facts, triples_path=args.triples,
                 fact_prefix=args.fact_prefix)
    print(out)
    return 0


def cmd_query(args) -> int:
    est = _estimator(args)
    terms = args.terms.split("|") if args.terms else None
    sys.stdout.write(est.to_json(args.question, terms, timings=not args.no_timings))
    return 0


def cmd_bench(args) -> int:
    from .evaluator import read_instances, run_benchmark

    est = _estimator(args, skip_signals=_skip_signals(args))
    report = run_benchmark(read_instances(args.instances), est, workers=args.workers)
    report.write(args.out)
    print(json.dumps(report.aggregates()))
    return 0


def cmd_grid(args) -> int:
    from .evaluator import grid_search, read_instances

    with open(args.grid, encoding="utf-8") as fh:
        grid = yaml.safe_load(fh)
    if not isinstance(grid, (dict, list)):
        raise ConfigError(f"{args.grid}: expected a mapping of parameter lists")
    est = _estimator(args)
    result = grid_search(read_instances(args.instances), est, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.best_report.write(out)
    with open(out / "grid.json", "w", encoding="utf-8") as fh:
        json.dump({"best_params": result.best_params,
                   "points": [{"params": p, **agg} for p, agg in result.results]}, fh, indent=2)
    print(json.dumps({"best_params": result.best_params, **result.best_report.aggregates()}))
    return 0


def cmd_microbench(args) -> int:
    from .evaluator import micro_bench, synthetic_kb

    rows = []
    for n in args.sizes:
        kb = synthetic_kb(n, seed=args.seed)
        rows += micro_bench(kb, args.lookups, args.pairs, args.baseline, seed=args.seed)
    text = json.dumps(rows, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    overrides = _flag_overrides(args)
    for key in ("host", "port"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    cfg = load_config(args.config, overrides=overrides)
    est = SearchSpaceReducer(**cfg.estimator_params()).fit(cfg.bundle)
    uvicorn.run(create_app(est), host=cfg.host, port=cfg.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kbspace", description="Question-specific KB search spaces.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build an index bundle")
    p.add_argument("--items", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--facts", help="JSONL facts with qualifiers")
    src.add_argument("--triples", help="TSV reified triples")
    p.add_argument("--fact-prefix", default="fact:", dest="fact_prefix")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="search space for one question, as JSON")
    p.add_argument("question")
    _add_engine_flags(p)
    p.add_argument("--terms", help="'|'-separated terms instead of segmentation")
    p.add_argument("--no-timings", action="store_true", dest="no_timings")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="evaluate a benchmark file")
    _add_engine_flags(p)
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    for s in ("coh", "conn", "rel", "match"):
        p.add_argument(f"--no-{s}", action="store_true", dest=f"no_{s}")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("grid", help="grid search over parameters")
    _add_engine_flags(p)
    p.add_argument("--instances", required=True)
    p.add_argument("--grid", required=True, help="YAML mapping of parameter lists")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("microbench", help="KB interface latency on synthetic KBs")
    p.add_argument("--sizes", type=int, nargs="+", default=[10_000, 1_000_000])
    p.add_argument("--lookups", type=int, default=10_000)
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--baseline", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_microbench)

    p = sub.add_parser("serve", help="run the HTTP service")
    _add_engine_flags(p)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"kbspace: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

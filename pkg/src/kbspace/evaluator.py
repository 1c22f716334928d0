"""Benchmark harness: answer presence, search-space size, runtime, grid search
and KB-interface micro-benchmarks."""

from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sklearn.model_selection import ParameterGrid

from .ingest import FactTable
from .lexical import tokenize
from .scoring import SignalWeights
from .search_space import SearchSpace
from .store import KnowledgeBase
from .types import Distance, ItemKind, ItemRecord

logger = logging.getLogger(__name__)


@dataclass
class BenchmarkInstance:
    question: str
    answers: list[str]
    terms: list[str] | None = None

    def __post_init__(self):
        if not self.answers:
            raise ValueError(f"benchmark question {self.question!r} has no gold answers")


def read_instances(path) -> list[BenchmarkInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            row = json.loads(line)
            try:
                out.append(BenchmarkInstance(row["question"], list(row["answers"]), row.get("terms")))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def _norm(text: str) -> str:
    return " ".join(tokenize(text))


def answer_presence(space: SearchSpace, gold: Sequence[str], kb: KnowledgeBase) -> bool:
    """True if a gold answer occurs in some fact of the space.

    Gold answers are item external ids; strings that are not ids match
    literals by normalized lexical form.
    """
    if not len(space.fact_ids):
        return False
    codes = set(space.item_codes.tolist())
    literal_forms = None
    for answer in gold:
        try:
            if kb.code(answer) in codes:
                return True
        except KeyError:
            pass
        if literal_forms is None:
            literal_forms = {
                _norm(kb.records[c].label) for c in codes if kb.records[c].kind is ItemKind.LITERAL
            }
        if _norm(answer) in literal_forms:
            return True
    return False


@dataclass
class QuestionRow:
    question: str
    answer_present: bool
    space_size: int
    n_facts: int
    elapsed_ms: float


@dataclass
class EvalReport:
    rows: list[QuestionRow] = field(default_factory=list)

    @property
    def answer_presence(self) -> float:
        return 100.0 * sum(r.answer_present for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def mean_space_size(self) -> float:
        return statistics.fmean(r.space_size for r in self.rows) if self.rows else 0.0

    @property
    def mean_runtime_ms(self) -> float:
        return statistics.fmean(r.elapsed_ms for r in self.rows) if self.rows else 0.0

    def aggregates(self) -> dict:
        return {
            "questions": len(self.rows),
            "answer_presence": self.answer_presence,
            "mean_space_size": self.mean_space_size,
            "mean_runtime_ms": self.mean_runtime_ms,
        }

    def to_dict(self) -> dict:
        return {"aggregates": self.aggregates(), "rows": [asdict(r) for r in self.rows]}

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, ensure_ascii=False)
        with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(QuestionRow.__dataclass_fields__))
            writer.writeheader()
            for row in self.rows:
                writer.writerow(asdict(row))
        return out


def run_benchmark(instances: Sequence[BenchmarkInstance], estimator, workers: int = 1) -> EvalReport:
    """Evaluate a fitted ``SearchSpaceReducer`` on every instance.

    Runtime is the per-question answering time (index loading excluded).
    """
    kb = estimator.kb_

    def one(inst: BenchmarkInstance) -> QuestionRow:
        space = estimator.search_space(inst.question, terms=inst.terms)
        return QuestionRow(
            inst.question,
            answer_presence(space, inst.answers, kb),
            int(len(space.items_in_space)),
            int(len(space.fact_ids)),
            space.timings["total"],
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, instances))
    else:
        rows = [one(inst) for inst in instances]
    return EvalReport(rows)


@dataclass
class GridResult:
    best_params: dict
    best_report: EvalReport
    results: list[tuple[dict, dict]]


def _check_grid_weights(points: Sequence[Mapping]) -> None:
    bad = []
    for point in points:
        if "weights" in point:
            try:
                SignalWeights.coerce(point["weights"])
            except ValueError:
                bad.append(point["weights"])
    if bad:
        raise ValueError(f"grid contains weight rows that do not sum to 1: {bad}")


def grid_search(instances: Sequence[BenchmarkInstance], estimator, grid) -> GridResult:
    """Exhaustively evaluate ``grid``; best by answer presence, then smaller mean |S|.

    ``grid`` is a dict of parameter lists or a list of such dicts, as for
    ``sklearn.model_selection.ParameterGrid``. The fitted KB, lexicon and
    embeddings are shared across points.
    """
    points = list(ParameterGrid(grid))
    if not points:
        raise ValueError("empty grid")
    _check_grid_weights(points)
    results = []
    best = None
    for point in points:
        est = estimator.with_params(**point)
        report = run_benchmark(instances, est)
        key = (-report.answer_presence, report.mean_space_size)
        results.append(({**point}, report.aggregates()))
        logger.info("grid point %s -> %s", point, report.aggregates())
        if best is None or key < best[0]:
            best = (key, point, report)
    return GridResult(dict(best[1]), best[2], results)


# ---------------------------------------------------------------------------
# synthetic KBs and micro-benchmarks


def synthetic_kb(
    n_facts: int,
    n_entities: int | None = None,
    n_predicates: int = 50,
    qualifier_rate: float = 0.3,
    seed: int = 0,
) -> KnowledgeBase:
    """Random KB with uniformly drawn subjects/objects; entity count scales with size."""
    rng = np.random.default_rng(seed)
    if n_entities is None:
        n_entities = max(10, n_facts // 5)
    n_items = n_entities + n_predicates
    subj = rng.integers(0, n_entities, n_facts)
    obj = rng.integers(0, n_entities, n_facts)
    pred = rng.integers(n_entities, n_items, n_facts)
    has_q = rng.random(n_facts) < qualifier_rate
    q_counts = has_q.astype(np.int64)
    q_indptr = np.zeros(n_facts + 1, dtype=np.int64)
    np.cumsum(q_counts, out=q_indptr[1:])
    n_q = int(q_indptr[-1])
    q_pred = rng.integers(n_entities, n_items, n_q)
    q_obj = rng.integers(0, n_entities, n_q)
    table = FactTable(subj, pred, obj, q_indptr, q_pred, q_obj)
    records = [ItemRecord(f"e{i}", f"entity {i}") for i in range(n_entities)]
    records += [ItemRecord(f"p{i}", f"predicate {i}", kind=ItemKind.PREDICATE) for i in range(n_predicates)]
    return KnowledgeBase(table, records)


def scan_fact_ids(kb: KnowledgeBase, x: int) -> np.ndarray:
    """Facts mentioning ``x`` by a full pass over the fact table (no index)."""
    t = kb.table
    hit = (t.subj == x) | (t.pred == x) | (t.obj == x)
    q_hit = (t.q_pred == x) | (t.q_obj == x)
    if q_hit.any():
        hit[t.qualifier_fact_ids()[q_hit]] = True
    return np.flatnonzero(hit)


def scan_neighborhood(kb: KnowledgeBase, x: int):
    return kb.facts(scan_fact_ids(kb, x))


def scan_neighbors(kb: KnowledgeBase, x: int) -> np.ndarray:
    t = kb.table
    ids = scan_fact_ids(kb, x)
    parts = [t.subj[ids], t.pred[ids], t.obj[ids]]
    for fid in ids.tolist():
        a, b = t.q_indptr[fid], t.q_indptr[fid + 1]
        parts += [t.q_pred[a:b], t.q_obj[a:b]]
    items = np.unique(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64)
    return items[items != x]


def scan_distance(kb: KnowledgeBase, x1: int, x2: int) -> Distance:
    """Distance decided from neighbor sets recomputed by table scans."""
    if x1 == x2:
        return Distance.HOP1
    n1 = scan_neighbors(kb, x1)
    if x2 in set(n1.tolist()):
        return Distance.HOP1
    n2 = scan_neighbors(kb, x2)
    return Distance.HOP2 if len(np.intersect1d(n1, n2)) else Distance.FAR


def _time_calls(fn, args_list) -> list[float]:
    out = []
    for args in args_list:
        t0 = time.perf_counter()
        fn(*args)
        out.append((time.perf_counter() - t0) * 1e6)
    return out


def micro_bench(
    kb: KnowledgeBase,
    n_lookups: int = 10_000,
    n_pairs: int = 10_000,
    n_baseline: int = 50,
    seed: int = 0,
) -> list[dict]:
    """Latency (microseconds) of neighborhood lookups and distance checks.

    Each row also times the same operation answered by scanning the fact
    table, on ``n_baseline`` of the sampled queries.
    """
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, kb.n_items, n_lookups).tolist()
    pairs = rng.integers(0, kb.n_items, (n_pairs, 2)).tolist()
    rows = []
    for name, fn, naive, args in (
        ("neighborhood", kb.neighborhood, scan_neighborhood, [(x,) for x in xs]),
        ("distance", kb.distance, scan_distance, [tuple(p) for p in pairs]),
    ):
        fast = _time_calls(fn, args)
        base_args = args[:n_baseline]
        slow = _time_calls(lambda *a: naive(kb, *a), base_args) if n_baseline else []
        row = {
            "operation": name,
            "n_facts": len(kb),
            "n_items": kb.n_items,
            "queries": len(fast),
            "median_us": statistics.median(fast),
            "mean_us": statistics.fmean(fast),
        }
        if slow:
            row["baseline_queries"] = len(slow)
            row["baseline_median_us"] = statistics.median(slow)
            row["speedup"] = row["baseline_median_us"] / row["median_us"]
        rows.append(row)
    return rows

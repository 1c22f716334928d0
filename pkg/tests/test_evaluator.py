import csv
import json

import pytest

from kbspace.evaluator import (
    BenchmarkInstance,
    EvalReport,
    QuestionRow,
    answer_presence,
    grid_search,
    micro_bench,
    read_instances,
    run_benchmark,
    scan_distance,
    scan_neighborhood,
    synthetic_kb,
)
from kbspace.search_space import finalize_facts


def test_instance_requires_answers():
    with pytest.raises(ValueError):
        BenchmarkInstance("q", [])


def test_read_instances(worldcup_dir):
    inst = read_instances(worldcup_dir / "questions.jsonl")
    assert len(inst) == 5 and inst[0].answers[:2] == ["pogba", "mbappe"]


def test_answer_presence_cases(reducer, worldcup_kb):
    space = reducer.search_space("What is the capital of Croatia?")
    assert answer_presence(space, ["zagreb"], worldcup_kb)
    assert not answer_presence(space, ["messi"], worldcup_kb)
    empty = reducer.search_space("What is the capital of Croatia?")
    finalize_facts(empty, worldcup_kb, [])
    assert not answer_presence(empty, ["zagreb"], worldcup_kb)


def test_answer_presence_literal_form(reducer, worldcup_kb):
    space = reducer.search_space("Which stadium hosted the 2018 World Cup final?")
    assert answer_presence(space, ["15 july 2018"], worldcup_kb)
    assert answer_presence(space, ['"15 July 2018"'], worldcup_kb)


def test_presence_monotone_under_growth(reducer, worldcup_kb, worldcup_questions):
    for inst in worldcup_questions:
        small = reducer.with_params(k=1, p=10).search_space(inst.question)
        big = reducer.with_params(k=3, p=1000).search_space(inst.question)
        assert set(small.fact_ids.tolist()) <= set(big.fact_ids.tolist())
        if answer_presence(small, inst.answers, worldcup_kb):
            assert answer_presence(big, inst.answers, worldcup_kb)


def test_fixture_benchmark_full_presence(reducer, worldcup_questions, tmp_path):
    report = run_benchmark(worldcup_questions, reducer)
    assert report.answer_presence == 100.0
    report.write(tmp_path)
    data = json.loads((tmp_path / "report.json").read_text())
    rows = list(csv.DictReader(open(tmp_path / "report.csv")))
    assert len(rows) == len(data["rows"]) == 5
    assert data["aggregates"]["answer_presence"] == 100.0


def test_parallel_benchmark_matches_serial(reducer, worldcup_questions):
    a = run_benchmark(worldcup_questions, reducer)
    b = run_benchmark(worldcup_questions, reducer, workers=3)
    assert [(r.question, r.answer_present, r.space_size) for r in a.rows] == [
        (r.question, r.answer_present, r.space_size) for r in b.rows
    ]


def test_aggregates_recompute_from_rows():
    rows = [QuestionRow("a", True, 10, 4, 1.0), QuestionRow("b", False, 20, 6, 3.0)]
    rep = EvalReport(rows)
    assert rep.aggregates() == {"questions": 2, "answer_presence": 50.0, "mean_space_size": 15.0, "mean_runtime_ms": 2.0}


def test_grid_singleton_and_choice(reducer, worldcup_questions):
    single = grid_search(worldcup_questions, reducer, {"k": [2]})
    assert single.best_params == {"k": 2}
    two = grid_search(worldcup_questions, reducer, {"k": [1, "auto"], "p": [0]})
    presences = {str(p["k"]): agg["answer_presence"] for p, agg in two.results}
    best = max(presences.values())
    assert two.best_report.answer_presence == best
    assert str(two.best_params["k"]) in {k for k, v in presences.items() if v == best}


def test_grid_rejects_bad_weights(reducer, worldcup_questions):
    with pytest.raises(ValueError, match="sum to 1"):
        grid_search(worldcup_questions, reducer, {"weights": [(0.1, 0.3, 0.2, 0.4), (0.5, 0.5, 0.5, 0.5)]})


def test_scan_baselines_agree_with_index():
    kb = synthetic_kb(3000, seed=2)
    for x in range(0, kb.n_items, 37):
        assert scan_neighborhood(kb, x) == kb.neighborhood(x)
        assert scan_distance(kb, x, (x * 13) % kb.n_items) is kb.distance(x, (x * 13) % kb.n_items)


def test_micro_bench_schema():
    rows = micro_bench(synthetic_kb(2000, seed=1), n_lookups=50, n_pairs=50, n_baseline=5)
    assert [r["operation"] for r in rows] == ["neighborhood", "distance"]
    for r in rows:
        assert {"median_us", "mean_us", "baseline_median_us", "speedup", "n_facts"} <= set(r)

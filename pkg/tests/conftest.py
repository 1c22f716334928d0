import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kbspace.estimator import SearchSpaceReducer  # noqa: E402
from kbspace.evaluator import read_instances  # noqa: E402
from kbspace.ingest import ingest  # noqa: E402
from kbspace.store import KnowledgeBase  # noqa: E402

WORLDCUP = Path(__file__).parent / "data" / "worldcup"


@pytest.fixture(scope="session")
def worldcup_dir():
    return WORLDCUP


@pytest.fixture(scope="session")
def worldcup_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle") / "worldcup"
    return ingest(WORLDCUP / "items.jsonl", out, facts_path=WORLDCUP / "facts.jsonl")


@pytest.fixture(scope="session")
def worldcup_kb(worldcup_bundle):
    return KnowledgeBase.load(worldcup_bundle)


@pytest.fixture(scope="session")
def worldcup_questions():
    return read_instances(WORLDCUP / "questions.jsonl")


@pytest.fixture(scope="session")
def reducer(worldcup_kb):
    return SearchSpaceReducer(embeddings=str(WORLDCUP / "embeddings.txt")).fit(worldcup_kb)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)

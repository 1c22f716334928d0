"""Reading raw KB dumps, de-reifying qualifier facts and writing index bundles.

Two input paths are supported:

* ``triples.tsv``: tab-separated ``subject  predicate  object`` lines in which
  qualifier-bearing facts are reified through fact-id nodes (identifiers that
  start with a configurable prefix, ``fact:`` by default).
* ``facts.jsonl``: one already-aggregated fact per line,
  ``{"s": ..., "p": ..., "o": ..., "qualifiers": [[qp, qo], ...]}``.

Values wrapped in double quotes (``"15 July 2018"``) are literals. Every other
identifier must be declared in ``items.jsonl``.
"""

from __future__ import annotations

import json
import logging
import os
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .types import ItemKind, ItemRecord, RawFact, RawTriple

logger = logging.getLogger(__name__)

FORMAT_NAME = "kbspace-index"
FORMAT_VERSION = 1
DEFAULT_FACT_PREFIX = "fact:"


class IngestError(ValueError):
    pass


def is_literal(value: str) -> bool:
    return len(value) >= 2 and value[0] == '"' and value[-1] == '"'


def literal_form(value: str) -> str:
    return value[1:-1] if is_literal(value) else value


# ---------------------------------------------------------------------------
# readers


def read_items(path) -> list[ItemRecord]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                items.append(ItemRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise IngestError(f"{path}:{lineno}: bad item record ({exc})") from exc
    return items


def read_triples(path) -> tuple[list[RawTriple], int]:
    """Read a reified triple file. Returns the triples and the number of skipped lines."""
    triples, skipped = [], 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(p.strip() for p in parts):
                logger.warning("%s:%d: malformed triple line skipped", path, lineno)
                skipped += 1
                continue
            triples.append(RawTriple(*(p.strip() for p in parts)))
    return triples, skipped


def read_facts(path) -> tuple[list[RawFact], int]:
    """Read a JSON-lines fact file. Returns the facts and the number of skipped lines."""
    facts, skipped = [], 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                quals = tuple((str(qp), str(qo)) for qp, qo in row.get("qualifiers", ()))
                fact = RawFact(str(row["s"]), str(row["p"]), str(row["o"]), quals)
            except (ValueError, KeyError, TypeError):
                logger.warning("%s:%d: malformed fact line skipped", path, lineno)
                skipped += 1
                continue
            if not all(fact[:3]) or not all(qp and qo for qp, qo in quals):
                logger.warning("%s:%d: fact with empty field skipped", path, lineno)
                skipped += 1
                continue
            facts.append(fact)
    return facts, skipped


# ---------------------------------------------------------------------------
# de-reification


def aggregate_reified(
    triples: Iterable[RawTriple], fact_prefix: str = DEFAULT_FACT_PREFIX
) -> list[RawFact]:
    """Join reified triples into qualifier-bearing facts.

    A reified fact ``f`` consists of a head triple ``<s, p, f>``, the main
    completion ``<f, p, o>`` and any number of qualifier triples ``<f, qp, qo>``.
    Triples that do not touch a fact-id pass through unchanged. Qualifiers keep
    their input order.
    """
    plain: list[tuple[int, RawFact]] = []
    heads: dict[str, tuple[int, str, str]] = {}
    bodies: "OrderedDict[str, list[tuple[str, str]]]" = OrderedDict()
    first_seen: dict[str, int] = {}

    for pos, (s, p, o) in enumerate(triples):
        if not (s and p and o):
            raise IngestError(f"triple with empty field at position {pos}")
        if s.startswith(fact_prefix):
            bodies.setdefault(s, []).append((p, o))
            first_seen.setdefault(s, pos)
        elif o.startswith(fact_prefix):
            if o in heads:
                raise IngestError(f"fact-id {o} has more than one head triple")
            heads[o] = (pos, s, p)
            first_seen.setdefault(o, pos)
        else:
            plain.append((pos, RawFact(s, p, o)))

    orphans = sorted(set(bodies) - set(heads)) + sorted(set(heads) - set(bodies))
    grouped: list[tuple[int, RawFact]] = []
    for fid, (pos, s, p) in heads.items():
        body = bodies.get(fid)
        if body is None:
            continue
        main = next((i for i, (bp, _) in enumerate(body) if bp == p), None)
        if main is None:
            orphans.append(fid)
            continue
        obj = body[main][1]
        quals = tuple(pair for i, pair in enumerate(body) if i != main)
        grouped.append((first_seen[fid], RawFact(s, p, obj, quals)))
    if orphans:
        raise IngestError("fact-id groups without a main triple: " + ", ".join(sorted(orphans)))

    merged = sorted(plain + grouped, key=lambda pair: pair[0])
    return [fact for _, fact in merged]


# ---------------------------------------------------------------------------
# integer coding


class IntegerCoding:
    """Bijection between external identifiers and dense codes ``0..n-1``."""

    def __init__(self, ids: Sequence[str] = ()):
        self.ids: list[str] = []
        self.codes: dict[str, int] = {}
        for ext in ids:
            self.add(ext)

    def add(self, ext: str) -> int:
        code = self.codes.get(ext)
        if code is None:
            code = len(self.ids)
            self.codes[ext] = code
            self.ids.append(ext)
        return code

    def encode(self, ext: str) -> int:
        try:
            return self.codes[ext]
        except KeyError:
            raise KeyError(f"unknown item identifier {ext!r}") from None

    def decode(self, code: int) -> str:
        if not 0 <= code < len(self.ids):
            raise KeyError(f"invalid item code {code}")
        return self.ids[code]

    def __len__(self):
        return len(self.ids)

    def __contains__(self, ext):
        return ext in self.codes


def encode_items(
    items: Sequence[ItemRecord], facts: Sequence[RawFact]
) -> tuple[IntegerCoding, list[ItemRecord]]:
    """Assign codes in first-occurrence order: declared items, then literals as met in facts.

    Returns the coding and the item records aligned with it (literals added).
    """
    coding = IntegerCoding()
    records: list[ItemRecord] = []
    for rec in items:
        if rec.external_id in coding:
            raise IngestError(f"duplicate item identifier {rec.external_id!r}")
        coding.add(rec.external_id)
        records.append(rec)

    for fact in facts:
        values = [fact.subject, fact.predicate, fact.object]
        for qp, qo in fact.qualifiers:
            values += [qp, qo]
        for value in values:
            if value in coding:
                continue
            if not is_literal(value):
                raise IngestError(f"identifier {value!r} used in a fact has no item record")
            coding.add(value)
            records.append(ItemRecord(value, literal_form(value), kind=ItemKind.LITERAL))
    return coding, records


# ---------------------------------------------------------------------------
# index construction


class FactTable:
    """Column-oriented integer fact table with CSR-packed qualifiers."""

    def __init__(self, subj, pred, obj, q_indptr, q_pred, q_obj):
        self.subj = np.asarray(subj, dtype=np.int64)
        self.pred = np.asarray(pred, dtype=np.int64)
        self.obj = np.asarray(obj, dtype=np.int64)
        self.q_indptr = np.asarray(q_indptr, dtype=np.int64)
        self.q_pred = np.asarray(q_pred, dtype=np.int64)
        self.q_obj = np.asarray(q_obj, dtype=np.int64)
        n = len(self.subj)
        if not (len(self.pred) == len(self.obj) == n and len(self.q_indptr) == n + 1):
            raise ValueError("inconsistent fact table columns")

    def __len__(self):
        return len(self.subj)

    @classmethod
    def from_facts(cls, facts: Sequence[RawFact], coding: IntegerCoding) -> "FactTable":
        enc = coding.encode
        subj, pred, obj, q_indptr, q_pred, q_obj = [], [], [], [0], [], []
        for f in facts:
            subj.append(enc(f.subject))
            pred.append(enc(f.predicate))
            obj.append(enc(f.object))
            for qp, qo in f.qualifiers:
                q_pred.append(enc(qp))
                q_obj.append(enc(qo))
            q_indptr.append(len(q_pred))
        return cls(subj, pred, obj, q_indptr, q_pred, q_obj)

    def qualifier_fact_ids(self) -> np.ndarray:
        return np.repeat(np.arange(len(self), dtype=np.int64), np.diff(self.q_indptr))

    def item_fact_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """All (item, fact) occurrences, deduplicated, sorted by item then fact."""
        n = len(self)
        fids = np.arange(n, dtype=np.int64)
        qf = self.qualifier_fact_ids()
        items = np.concatenate([self.subj, self.pred, self.obj, self.q_pred, self.q_obj])
        facts = np.concatenate([fids, fids, fids, qf, qf])
        key = np.unique(items * max(n, 1) + facts)
        return key // max(n, 1), key % max(n, 1)


def _csr(rows: np.ndarray, cols: np.ndarray, n_rows: int) -> tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(rows, minlength=n_rows)
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, cols.astype(np.int64, copy=False)


def compute_neighborhoods(table: FactTable, n_items: int) -> dict[str, np.ndarray]:
    """Build the item->facts (NF) and item->co-occurring items (NI) CSR maps."""
    items, facts = table.item_fact_pairs()
    if len(items) and items.max() >= n_items:
        raise ValueError("fact table references codes outside the coding")
    nf_indptr, nf_ids = _csr(items, facts, n_items)

    # self-join of the (fact, item) incidence within each fact
    order = np.lexsort((items, facts))
    f_sorted, i_sorted = facts[order], items[order]
    group = np.bincount(f_sorted, minlength=len(table))
    start = np.zeros(len(table) + 1, dtype=np.int64)
    np.cumsum(group, out=start[1:])
    reps = group[f_sorted]
    left = np.repeat(i_sorted, reps)
    base = np.repeat(start[f_sorted], reps)
    offs = np.arange(len(left), dtype=np.int64) - np.repeat(np.cumsum(reps) - reps, reps)
    right = i_sorted[base + offs]
    keep = left != right
    key = np.unique(left[keep] * n_items + right[keep])
    ni_indptr, ni_ids = _csr(key // n_items, key % n_items, n_items)
    return {"nf_indptr": nf_indptr, "nf_ids": nf_ids, "ni_indptr": ni_indptr, "ni_ids": ni_ids}


def write_bundle(out_dir, table: FactTable, records: Sequence[ItemRecord], index=None) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if index is None:
            index = compute_neighborhoods(table, len(records))
        np.savez(
            out / "index.npz",
            subj=table.subj,
            pred=table.pred,
            obj=table.obj,
            q_indptr=table.q_indptr,
            q_pred=table.q_pred,
            q_obj=table.q_obj,
            **index,
        )
        with open(out / "items.jsonl", "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
        header = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "n_items": len(records),
            "n_facts": len(table),
        }
        with open(out / "header.json", "w", encoding="utf-8") as fh:
            json.dump(header, fh, indent=2)
    except OSError as exc:
        raise IngestError(f"cannot write index bundle to {out}: {exc}") from exc
    return out


def build_index(
    facts: Sequence[RawFact], coding: IntegerCoding, items: Sequence[ItemRecord], out_dir
) -> Path:
    """Encode facts and write a bundle (fact table, NF, NI, item metadata, header)."""
    if len(items) != len(coding):
        raise IngestError("item records are not aligned with the coding")
    table = FactTable.from_facts(facts, coding)
    return write_bundle(out_dir, table, items)


def ingest(
    items_path,
    out_dir,
    facts_path=None,
    triples_path=None,
    fact_prefix: str = DEFAULT_FACT_PREFIX,
) -> Path:
    """End-to-end ingestion from files on disk; exactly one fact source is required."""
    if (facts_path is None) == (triples_path is None):
        raise IngestError("pass exactly one of facts_path / triples_path")
    items = read_items(items_path)
    if triples_path is not None:
        triples, skipped = read_triples(triples_path)
        facts = aggregate_reified(triples, fact_prefix)
    else:
        facts, skipped = read_facts(facts_path)
    if skipped:
        logger.warning("%d malformed input lines skipped", skipped)
    coding, records = encode_items(items, facts)
    logger.info("encoded %d items, %d facts", len(coding), len(facts))
    return build_index(facts, coding, records, os.fspath(out_dir))

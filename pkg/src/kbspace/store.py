"""Read-only, memory-resident fact-centric knowledge base."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .ingest import FORMAT_NAME, FORMAT_VERSION, FactTable, compute_neighborhoods
from .types import Distance, Fact, FrequencyProfile, ItemKind, ItemRecord, KBItem


_PREDICATE = list(ItemKind).index(ItemKind.PREDICATE)


class BundleError(ValueError):
    pass


class ItemNotFound(KeyError):
    pass


class KnowledgeBase:
    """Facts indexed by item.

    ``NF(x)`` (facts containing ``x``) and ``NI(x)`` (items co-occurring with
    ``x`` in some fact) are stored as CSR arrays, so both are a slice lookup.
    Distances are decided from ``NI`` alone: 1 hop if the items share a fact,
    2 hops if their neighbor sets overlap.
    """

    def __init__(self, table: FactTable, records: Sequence[ItemRecord], index=None):
        self.table = table
        self.records = list(records)
        self.n_items = len(self.records)
        if index is None:
            index = compute_neighborhoods(table, self.n_items)
        self.nf_indptr = index["nf_indptr"]
        self.nf_ids = index["nf_ids"]
        self.ni_indptr = index["ni_indptr"]
        self.ni_ids = index["ni_ids"]
        self._ids = {rec.external_id: code for code, rec in enumerate(self.records)}
        self._kinds = np.array(
            [list(ItemKind).index(rec.kind) for rec in self.records], dtype=np.int8
        )
        self.adjacency = sp.csr_matrix(
            (np.ones(len(self.ni_ids), dtype=np.int32), self.ni_ids, self.ni_indptr),
            shape=(self.n_items, self.n_items),
        )
        self._role_counts = _role_counts(table, self.n_items, np.diff(self.nf_indptr))

    # -- construction -------------------------------------------------------

    @classmethod
    def load(cls, path) -> "KnowledgeBase":
        path = Path(path)
        try:
            header = json.loads((path / "header.json").read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise BundleError(f"no index bundle at {path}") from None
        if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
            raise BundleError(
                f"bundle {path} has format {header.get('format')!r} v{header.get('version')}, "
                f"expected {FORMAT_NAME!r} v{FORMAT_VERSION}"
            )
        with open(path / "items.jsonl", encoding="utf-8") as fh:
            records = [ItemRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
        with np.load(path / "index.npz") as arrays:
            data = {name: arrays[name] for name in arrays.files}
        table = FactTable(
            data["subj"], data["pred"], data["obj"],
            data["q_indptr"], data["q_pred"], data["q_obj"],
        )
        index = {k: data[k] for k in ("nf_indptr", "nf_ids", "ni_indptr", "ni_ids")}
        if len(records) != header["n_items"] or len(table) != header["n_facts"]:
            raise BundleError(f"bundle {path} does not match its header counts")
        return cls(table, records, index)

    # -- item metadata ------------------------------------------------------

    def __len__(self):
        return len(self.table)

    def code(self, external_id: str) -> int:
        try:
            return self._ids[external_id]
        except KeyError:
            raise ItemNotFound(external_id) from None

    def external_id(self, code: int) -> str:
        return self.records[self._check(code)].external_id

    def item(self, code: int) -> KBItem:
        rec = self.records[self._check(code)]
        return KBItem(code, rec.external_id, rec.label, tuple(rec.aliases), rec.description, rec.kind)

    def label(self, code: int) -> str:
        return self.records[self._check(code)].label

    def kind(self, code: int) -> ItemKind:
        return self.records[self._check(code)].kind

    def predicate_mask(self, codes) -> np.ndarray:
        return self._kinds[np.asarray(codes, dtype=np.int64)] == _PREDICATE

    def _check(self, code) -> int:
        code = int(code)
        if not 0 <= code < self.n_items:
            raise ItemNotFound(code)
        return code

    # -- facts --------------------------------------------------------------

    def facts(self, fact_ids: Iterable[int]) -> list[Fact]:
        ids = np.asarray(list(fact_ids) if not isinstance(fact_ids, np.ndarray) else fact_ids,
                         dtype=np.int64)
        t = self.table
        subj = t.subj[ids].tolist()
        pred = t.pred[ids].tolist()
        obj = t.obj[ids].tolist()
        lo = t.q_indptr[ids].tolist()
        hi = t.q_indptr[ids + 1].tolist()
        out = []
        for fid, s, p, o, a, b in zip(ids.tolist(), subj, pred, obj, lo, hi):
            if a == b:
                quals = ()
            else:
                quals = tuple(zip(t.q_pred[a:b].tolist(), t.q_obj[a:b].tolist()))
            out.append(Fact(fid, s, p, o, quals))
        return out

    def fact(self, fact_id: int) -> Fact:
        if not 0 <= fact_id < len(self.table):
            raise KeyError(f"invalid fact id {fact_id}")
        return self.facts([fact_id])[0]

    def neighborhood_ids(self, x: int) -> np.ndarray:
        x = self._check(x)
        return self.nf_ids[self.nf_indptr[x]:self.nf_indptr[x + 1]]

    def neighborhood(self, x: int) -> list[Fact]:
        """NF(x): every fact that mentions ``x`` in any position, by fact id."""
        return self.facts(self.neighborhood_ids(x))

    def neighbors(self, x: int) -> np.ndarray:
        """NI(x): sorted, duplicate-free codes of items sharing a fact with ``x``."""
        x = self._check(x)
        return self.ni_ids[self.ni_indptr[x]:self.ni_indptr[x + 1]]

    def degree(self, x: int) -> int:
        x = self._check(x)
        return int(self.nf_indptr[x + 1] - self.nf_indptr[x])

    # -- distances ----------------------------------------------------------

    def distance(self, x1: int, x2: int) -> Distance:
        x1, x2 = self._check(x1), self._check(x2)
        if x1 == x2:
            return Distance.HOP1
        a, b = self.neighbors(x1), self.neighbors(x2)
        if len(a) > len(b):
            a, b = b, a
            x1, x2 = x2, x1
        if not len(a):
            return Distance.FAR
        pos = np.searchsorted(a, x2)
        if pos < len(a) and a[pos] == x2:
            return Distance.HOP1
        return Distance.HOP2 if _sorted_overlap(a, b) else Distance.FAR

    def connectivity_matrix(self, xs: Sequence[int], ys: Sequence[int]) -> np.ndarray:
        """Pairwise connectivity (1, 0.5 or 0) between two item sequences."""
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        for arr in (xs, ys):
            if len(arr) and (arr.min() < 0 or arr.max() >= self.n_items):
                raise ItemNotFound(int(arr[(arr < 0) | (arr >= self.n_items)][0]))
        adj = self.adjacency
        ax, ay = adj[xs], adj[ys]
        hop1 = ax[:, ys].toarray() > 0
        hop1 |= xs[:, None] == ys[None, :]
        hop2 = (ax @ ay.T).toarray() > 0
        return np.where(hop1, 1.0, np.where(hop2, 0.5, 0.0))

    # -- frequencies --------------------------------------------------------

    def frequency(self, x: int) -> FrequencyProfile:
        x = self._check(x)
        s, o, q, total = self._role_counts
        return FrequencyProfile(int(s[x]), int(o[x]), int(q[x]), int(total[x]))

    def subject_fact_ids(self, x: int) -> np.ndarray:
        ids = self.neighborhood_ids(x)
        return ids[self.table.subj[ids] == x]

    def subject_facts(self, x: int) -> list[Fact]:
        return self.facts(self.subject_fact_ids(x))


def _role_counts(table: FactTable, n_items: int, totals: np.ndarray):
    n = max(len(table), 1)
    qf = table.qualifier_fact_ids()
    if len(qf):
        pairs = np.unique(table.q_obj * n + qf)
        qobj = np.bincount(pairs // n, minlength=n_items)
    else:
        qobj = np.zeros(n_items, dtype=np.int64)
    return (
        np.bincount(table.subj, minlength=n_items),
        np.bincount(table.obj, minlength=n_items),
        qobj,
        totals,
    )


def _sorted_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    """True if two ascending arrays share an element (binary-search the shorter into the longer)."""
    if not len(a) or not len(b) or a[-1] < b[0] or b[-1] < a[0]:
        return False
    pos = np.searchsorted(b, a)
    pos[pos == len(b)] = len(b) - 1
    return bool((b[pos] == a).any())

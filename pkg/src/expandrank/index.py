"""Inverted index with Okapi BM25 scoring.

Determinism rules that the rest of the pipeline leans on:

* internal doc numbering is ascending passage id, so score ties resolve to the
  lexicographically smallest pid;
* vocabulary order is sorted terms;
* only positively scoring documents are returned.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corpus import PassageStore
from .text import Analyzer

MAGIC = b"XRIDX001"


class IndexError_(ValueError):
    pass


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4
    stemming: bool = True
    stopwords: bool = True
    index_titles: bool = False

    def __post_init__(self):
        if self.k1 <= 0:
            raise IndexError_(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise IndexError_(f"b must be in [0, 1], got {self.b}")

    def analyzer(self) -> Analyzer:
        return Analyzer(stemming=self.stemming, stopwords=self.stopwords)


@dataclass
class RankedList:
    """Ordered (pid, score) pairs; the common currency of retrieval and fusion."""

    qid: str
    entries: list[tuple[str, float]] = field(default_factory=list)
    tag: str = "run"

    def __len__(self) -> int:
        return len(self.entries)

    def pids(self) -> list[str]:
        return [pid for pid, _ in self.entries]

    def validate(self) -> None:
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError(f"scores not non-increasing in list {self.qid!r}")
        pids = self.pids()
        if len(set(pids)) != len(pids):
            raise ValueError(f"duplicate pids in list {self.qid!r}")


class Index:
    def __init__(self, pids, vocab, post_offsets, post_docs, post_tfs,
                 doc_lengths, params: Bm25Params):
        self.pids: list[str] = pids
        self.vocab: dict[str, int] = {t: i for i, t in enumerate(vocab)}
        self.terms: list[str] = vocab
        self.post_offsets = post_offsets
        self.post_docs = post_docs
        self.post_tfs = post_tfs
        self.doc_lengths = doc_lengths
        self.params = params
        self.analyzer = params.analyzer()

        self.doc_count = len(pids)
        self.avg_doc_length = float(doc_lengths.mean()) if len(pids) else 0.0
        self._pid_to_doc = {pid: i for i, pid in enumerate(pids)}

        n = float(self.doc_count)
        df = np.diff(post_offsets).astype(np.float64)
        self.idf = np.log(1.0 + (n - df + 0.5) / (df + 0.5))
        avgdl = self.avg_doc_length if self.avg_doc_length > 0 else 1.0
        dl = doc_lengths.astype(np.float64)
        self.len_norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl)
        self._tfs_f64 = post_tfs.astype(np.float64)

    # -- scoring ------------------------------------------------------------

    def _query_terms(self, tokens) -> tuple[np.ndarray, np.ndarray]:
        counts = Counter(t for t in tokens if t in self.vocab)
        items = sorted((self.vocab[t], c) for t, c in counts.items())
        tids = np.array([t for t, _ in items], dtype=np.int64)
        weights = np.array([float(c) for _, c in items], dtype=np.float64)
        return tids, weights

    def score_all(self, tokens) -> np.ndarray:
        """Dense score vector over internal doc ids for an analyzed query."""
        tids, weights = self._query_terms(tokens)
        return kernels.score_query(
            tids, weights, self.post_offsets, self.post_docs, self._tfs_f64,
            self.len_norm, self.params.k1 + 1.0, self.idf, self.doc_count
        )

    def bm25_score(self, tokens, pid: str) -> float:
        """Score of a single passage for an analyzed query."""
        if pid not in self._pid_to_doc:
            raise KeyError(f"unknown passage id {pid!r}")
        doc = self._pid_to_doc[pid]
        k1p1 = self.params.k1 + 1.0
        total = 0.0
        for tid, weight in zip(*self._query_terms(tokens)):
            start, end = self.post_offsets[tid], self.post_offsets[tid + 1]
            pos = np.searchsorted(self.post_docs[start:end], doc)
            if pos < end - start and self.post_docs[start + pos] == doc:
                tf = self._tfs_f64[start + pos]
                total += weight * self.idf[tid] * (
                    (tf * k1p1) / (tf + self.len_norm[doc])
                )
        return float(total)

    def search(self, query_text: str, k: int, qid: str = "q",
               tag: str = "run") -> RankedList:
        if k < 1:
            raise ValueError("k must be >= 1")
        scores = self.score_all(self.analyzer(query_text))
        pos = np.flatnonzero(scores > 0.0)
        order = np.lexsort((pos, -scores[pos]))[:k]
        entries = [(self.pids[pos[i]], float(scores[pos[i]])) for i in order]
        return RankedList(qid=qid, entries=entries, tag=tag)

    def batch_search(self, queries, k: int, tag: str = "run") -> list[RankedList]:
        """Sequential-equivalent search over (qid, query_text) pairs."""
        return [self.search(text, k, qid=qid, tag=tag) for qid, text in queries]

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        header = {
            "params": {
                "k1": self.params.k1, "b": self.params.b,
                "stemming": self.params.stemming,
                "stopwords": self.params.stopwords,
                "index_titles": self.params.index_titles,
            },
            "pids": self.pids,
            "terms": self.terms,
            "postings": int(len(self.post_docs)),
        }
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            fh.write(self.post_offsets.astype("<i8").tobytes())
            fh.write(self.post_docs.astype("<i4").tobytes())
            fh.write(self.post_tfs.astype("<i4").tobytes())
            fh.write(self.doc_lengths.astype("<i4").tobytes())

    @classmethod
    def load(cls, path) -> "Index":
        with open(path, "rb") as fh:
            if fh.read(len(MAGIC)) != MAGIC:
                raise IndexError_(f"{path}: not an index file (bad magic)")
            (hlen,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(hlen))
            n_terms = len(header["terms"])
            n_docs = len(header["pids"])
            n_post = header["postings"]
            offsets = np.frombuffer(fh.read(8 * (n_terms + 1)), dtype="<i8")
            docs = np.frombuffer(fh.read(4 * n_post), dtype="<i4")
            tfs = np.frombuffer(fh.read(4 * n_post), dtype="<i4")
            dls = np.frombuffer(fh.read(4 * n_docs), dtype="<i4")
        params = Bm25Params(**header["params"])
        return cls(header["pids"], header["terms"], offsets.astype(np.int64),
                   docs.astype(np.int32), tfs.astype(np.int32),
                   dls.astype(np.int32), params)


def build_index(store: PassageStore, params: Bm25Params | None = None) -> Index:
    if len(store) == 0:
        raise IndexError_("cannot index an empty store")
    params = params or Bm25Params()
    analyzer = params.analyzer()

    pids = sorted(p.id for p in store)
    doc_lengths = np.zeros(len(pids), dtype=np.int32)
    term_postings: dict[str, list[tuple[int, int]]] = {}
    for doc, pid in enumerate(pids):
        p = store.get(pid)
        body = f"{p.title} {p.text}" if params.index_titles and p.title else p.text
        tokens = analyzer(body)
        doc_lengths[doc] = len(tokens)
        for term, tf in sorted(Counter(tokens).items()):
            term_postings.setdefault(term, []).append((doc, tf))

    terms = sorted(term_postings)
    offsets = np.zeros(len(terms) + 1, dtype=np.int64)
    docs, tfs = [], []
    for i, term in enumerate(terms):
        plist = term_postings[term]  # doc ids already ascending by construction
        offsets[i + 1] = offsets[i] + len(plist)
        docs.extend(d for d, _ in plist)
        tfs.extend(t for _, t in plist)
    return Index(pids, terms, offsets,
                 np.array(docs, dtype=np.int32), np.array(tfs, dtype=np.int32),
                 doc_lengths, params)

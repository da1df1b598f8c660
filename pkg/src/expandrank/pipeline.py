"""End-to-end retrieval strategies and ranked-list fusion."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .corpus import PassageStore, QAExample
from .expansion import (CandidateSet, ConstructionConfig, concat_query, dedup,
                        expanded_query, label_candidates, truncate)
from .index import Index, RankedList
from .passage_reranker import PassageScorer, rerank_passages
from .reranker import Featurizer, ScorerModel, select_best

log = logging.getLogger(__name__)

STRATEGY_KINDS = ("bm25", "greedy", "concat", "oracle", "ear_ri", "ear_rd")


@dataclass
class StrategySpec:
    kind: str
    n_samples: int = 50
    cap_n: int | None = None
    k_retrieve: int = 100
    pr_depth: int = 100
    fuse_order: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.cap_n is not None and self.cap_n > self.n_samples:
            raise ValueError("cap_n cannot exceed n_samples")


def _prepare(cs: CandidateSet | None, spec: StrategySpec) -> CandidateSet | None:
    if cs is None:
        return None
    cs = dedup(cs)
    if spec.cap_n is not None:
        cs = truncate(cs, spec.cap_n)
    return cs


def _single_list(spec: StrategySpec, index: Index, store: PassageStore,
                 qa: QAExample, cs: CandidateSet | None,
                 model: ScorerModel | None,
                 featurizer: Featurizer | None) -> RankedList:
    k = spec.k_retrieve
    q = qa.question
    if spec.kind == "bm25" or (spec.kind == "concat" and not cs):
        return index.search(q, k, qid=qa.qid, tag=spec.kind)
    if cs is None or not cs.candidates:
        raise ValueError(f"strategy {spec.kind} needs candidates for {qa.qid}")
    if spec.kind == "greedy":
        return index.search(expanded_query(q, cs.candidates[0].text), k,
                            qid=qa.qid, tag=spec.kind)
    if spec.kind == "concat":
        return index.search(concat_query(q, cs.candidates), k,
                            qid=qa.qid, tag=spec.kind)
    if spec.kind == "oracle":
        if not qa.answers:
            raise ValueError("oracle strategy needs answer labels")
        cfg = ConstructionConfig(k_retrieve=k, max_rank=k + 1)
        labels, _ = label_candidates(index, store, qa, cs, cfg)
        best = min(labels, key=lambda l: (l.r, l.index))
        return index.search(
            expanded_query(q, cs.candidates[best.index].text), k,
            qid=qa.qid, tag=spec.kind,
        )
    # ear_ri / ear_rd
    if model is None or featurizer is None:
        raise ValueError(f"strategy {spec.kind} needs a trained model")
    chosen = select_best(model, q, cs, featurizer)
    return index.search(expanded_query(q, chosen.text), k,
                        qid=qa.qid, tag=spec.kind)


def run_strategy(spec: StrategySpec, index: Index, store: PassageStore,
                 qa: QAExample, candidates: CandidateSet | dict | None = None,
                 model: ScorerModel | dict | None = None,
                 featurizer: Featurizer | None = None,
                 passage_scorer: PassageScorer | None = None) -> RankedList:
    """One question through one strategy, optional fusion and reranking.

    With ``spec.fuse_order`` set, ``candidates`` is a mapping tag ->
    CandidateSet and ``model`` may be a mapping tag -> ScorerModel; per-tag
    lists are retrieved independently and fused in the given order.
    """
    if spec.fuse_order:
        lists = []
        for tag in spec.fuse_order:
            cs = candidates.get(tag) if isinstance(candidates, dict) else candidates
            m = model.get(tag) if isinstance(model, dict) else model
            lists.append(_single_list(spec, index, store, qa,
                                      _prepare(cs, spec), m, featurizer))
        rl = fuse(lists, spec.k_retrieve)
        rl.qid = qa.qid
    else:
        rl = _single_list(spec, index, store, qa, _prepare(candidates, spec),
                          model, featurizer)
    if passage_scorer is not None:
        rl = rerank_passages(passage_scorer, index, store, qa.question, rl,
                             spec.pr_depth)
    return rl


def fuse(lists, k: int) -> RankedList:
    """Positional round-robin interleave, skipping already-emitted passages.

    Source scores are incomparable across lists, so emitted scores are the
    synthetic 1/position sequence.
    """
    if not lists:
        raise ValueError("fuse needs at least one list")
    if k < 1:
        raise ValueError("k must be >= 1")
    seen: set[str] = set()
    out: list[tuple[str, float]] = []
    cursors = [0] * len(lists)
    while len(out) < k and any(
        cursors[li] < len(rl.entries) for li, rl in enumerate(lists)
    ):
        for li, rl in enumerate(lists):
            if len(out) >= k:
                break
            i = cursors[li]
            if i >= len(rl.entries):
                continue
            cursors[li] = i + 1
            pid = rl.entries[i][0]
            # a duplicate costs this donor its turn in the round
            if pid not in seen:
                seen.add(pid)
                out.append((pid, 1.0 / (len(out) + 1)))
    return RankedList(qid=lists[0].qid, entries=out, tag="fusion")


def run_dataset(spec: StrategySpec, index: Index, store: PassageStore,
                qa_list, candidates_map=None, model=None,
                featurizer: Featurizer | None = None,
                passage_scorer: PassageScorer | None = None,
                ) -> dict[str, RankedList]:
    """Per-question results in input order; per-question failures are logged
    and the run continues."""
    runs: dict[str, RankedList] = {}
    errors = 0
    for qa in qa_list:
        if spec.fuse_order:
            cands = candidates_map.get(qa.qid, {}) if candidates_map else {}
        else:
            cands = candidates_map.get(qa.qid) if candidates_map else None
        try:
            runs[qa.qid] = run_strategy(spec, index, store, qa, cands, model,
                                        featurizer, passage_scorer)
        except Exception as exc:
            errors += 1
            log.error("question %s failed: %s", qa.qid, exc)
    if errors:
        log.error("%d/%d questions failed", errors, len(qa_list))
    return runs

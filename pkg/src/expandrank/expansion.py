"""Expansion candidate sets and rank-labeled training data.

A candidate expansion is judged by the rank the answer passage reaches when
"question + expansion" is issued to the retriever; misses inside the top
``k_retrieve`` get the ``max_rank`` sentinel.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace

from .corpus import PassageStore, QAExample, contains_answer
from .index import Index
from .text import normalize

log = logging.getLogger(__name__)

GENERATOR_TAGS = ("answer", "sentence", "title", "stub", "external")


@dataclass(frozen=True)
class ExpansionCandidate:
    text: str
    generator_tag: str = "stub"
    sample_seed: int = 0

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("expansion text is empty after trimming")
        if self.generator_tag not in GENERATOR_TAGS:
            raise ValueError(f"unknown generator_tag {self.generator_tag!r}")


@dataclass
class CandidateSet:
    qid: str
    candidates: list[ExpansionCandidate]
    requested_n: int = 0
    cap_n: int | None = None

    def __post_init__(self):
        if not self.requested_n:
            self.requested_n = len(self.candidates)

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class RankLabel:
    index: int
    r: int
    hit: bool

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("rank labels are 1-based")


@dataclass
class TrainingExample:
    qid: str
    question: str
    candidates: CandidateSet
    labels: list[RankLabel]
    top1: list[str | None] | None = None


@dataclass(frozen=True)
class ConstructionConfig:
    n_samples: int = 50
    k_retrieve: int = 100
    max_rank: int = 101
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.max_rank <= self.k_retrieve:
            raise ValueError(
                f"max_rank ({self.max_rank}) must exceed k_retrieve "
                f"({self.k_retrieve})"
            )
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


def expanded_query(question: str, expansion_text: str) -> str:
    """Concatenate question and expansion with a single space."""
    return f"{question} {expansion_text}"


def concat_query(question: str, candidates) -> str:
    parts = [question] + [c.text for c in candidates]
    return " ".join(parts)


def _norm_key(text: str) -> str:
    return " ".join(normalize(text))


def dedup(cs: CandidateSet) -> CandidateSet:
    seen = set()
    kept = []
    for c in cs.candidates:
        key = _norm_key(c.text)
        if key not in seen:
            seen.add(key)
            kept.append(c)
    return replace(cs, candidates=kept)


def truncate(cs: CandidateSet, n: int) -> CandidateSet:
    if n < 1:
        raise ValueError("truncation size must be >= 1")
    return replace(cs, candidates=cs.candidates[:n], cap_n=n)


def sample_expansions_stub(question: str, n: int, seed: int,
                           index: Index, store: PassageStore) -> CandidateSet:
    """Deterministic offline sampler: compose corpus terms co-occurring with
    the question plus distractor vocabulary terms."""
    if n < 1:
        raise ValueError("n must be >= 1")
    digest = hashlib.sha256(f"{question}\x00{n}\x00{seed}".encode()).digest()
    state = int.from_bytes(digest[:8], "big")

    def next_int(bound: int) -> int:
        nonlocal state
        state = (state * 6364136223846793005 + 1442695040888963407) % (1 << 64)
        return (state >> 17) % bound

    # Terms from passages that match the question, as the co-occurrence pool.
    pool: list[str] = []
    head = index.search(question, k=5, qid="stub")
    for pid, _ in head.entries:
        pool.extend(normalize(store.get(pid).text))
    vocab = index.terms
    seen_keys: set[str] = set()
    candidates = []
    while len(candidates) < n:
        length = 2 + next_int(3)
        words = []
        for _ in range(length):
            if pool and next_int(2) == 0:
                words.append(pool[next_int(len(pool))])
            else:
                words.append(vocab[next_int(len(vocab))])
        text = " ".join(words)
        key = _norm_key(text)
        if key and key not in seen_keys:
            seen_keys.add(key)
            candidates.append(ExpansionCandidate(text=text, generator_tag="stub",
                                                 sample_seed=seed))
    qid = hashlib.sha256(question.encode()).hexdigest()[:12]
    return CandidateSet(qid=qid, candidates=candidates, requested_n=n)


def load_expansions(path, known_qids=None) -> dict[str, CandidateSet]:
    """Load expansions JSONL of {qid, generator_tag, text}; grouped by qid."""
    groups: dict[str, list[ExpansionCandidate]] = {}
    warned: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            qid = str(obj["qid"])
            tag = str(obj.get("generator_tag", "external"))
            if tag not in GENERATOR_TAGS:
                raise ValueError(f"{path}:{lineno}: unknown generator_tag {tag!r}")
            if known_qids is not None and qid not in known_qids and qid not in warned:
                log.warning("%s:%d: qid %s not in QA set; keeping row",
                            path, lineno, qid)
                warned.add(qid)
            groups.setdefault(qid, []).append(
                ExpansionCandidate(text=str(obj["text"]), generator_tag=tag)
            )
    return {qid: CandidateSet(qid=qid, candidates=cands)
            for qid, cands in groups.items()}


def label_candidates(index: Index, store: PassageStore, qa: QAExample,
                     cs: CandidateSet, cfg: ConstructionConfig,
                     ) -> tuple[list[RankLabel], list[str | None]]:
    """Rank label and top-1 pid for every candidate of one question."""
    if not cs.candidates:
        raise ValueError(f"empty candidate set for {qa.qid}")
    labels: list[RankLabel] = []
    top1: list[str | None] = []
    for i, cand in enumerate(cs.candidates):
        rl = index.search(expanded_query(qa.question, cand.text),
                          k=cfg.k_retrieve, qid=qa.qid)
        r = cfg.max_rank
        for rank, (pid, _) in enumerate(rl.entries, start=1):
            if contains_answer(store.get(pid), qa.answers):
                r = rank
                break
        labels.append(RankLabel(index=i, r=r, hit=r != cfg.max_rank))
        top1.append(rl.entries[0][0] if rl.entries else None)
    return labels, top1


def assign_folds(qids, folds: int, seed: int) -> dict[str, int]:
    """Balanced deterministic fold split, stable under dataset reordering."""
    salted = sorted(
        qids, key=lambda q: hashlib.sha256(f"{seed}:{q}".encode()).hexdigest()
    )
    per_fold = -(-len(salted) // folds)
    return {qid: i // per_fold for i, qid in enumerate(salted)}


def build_training_set(store: PassageStore, index: Index, qa_train,
                       cfg: ConstructionConfig, generator) -> list[TrainingExample]:
    """Label generator-produced candidates for every training question.

    ``generator(qa, fold)`` returns the CandidateSet for a question; the fold
    argument lets callers plug per-fold generators.
    """
    if len(qa_train) < cfg.folds:
        raise ValueError(
            f"{len(qa_train)} questions cannot fill {cfg.folds} folds"
        )
    fold_of = assign_folds([qa.qid for qa in qa_train], cfg.folds, cfg.seed)
    out = []
    for qa in qa_train:
        cs = dedup(generator(qa, fold_of[qa.qid]))
        labels, top1 = label_candidates(index, store, qa, cs, cfg)
        out.append(TrainingExample(qid=qa.qid, question=qa.question,
                                   candidates=cs, labels=labels, top1=top1))
    return out


def save_training_set(examples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            obj = {
                "qid": ex.qid,
                "question": ex.question,
                "candidates": [
                    {"text": c.text, "generator_tag": c.generator_tag,
                     "sample_seed": c.sample_seed}
                    for c in ex.candidates.candidates
                ],
                "labels": [{"index": l.index, "r": l.r, "hit": l.hit}
                           for l in ex.labels],
                "top1": ex.top1,
            }
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def load_training_set(path) -> list[TrainingExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            cands = [ExpansionCandidate(**c) for c in obj["candidates"]]
            labels = [RankLabel(**l) for l in obj["labels"]]
            out.append(TrainingExample(
                qid=obj["qid"], question=obj["question"],
                candidates=CandidateSet(qid=obj["qid"], candidates=cands),
                labels=labels, top1=obj.get("top1"),
            ))
    return out

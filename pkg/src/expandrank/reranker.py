"""Expansion scoring models: pairwise hinge ranking loss, RI and RD variants.

Polarity is fixed throughout: a LOWER score means a better expansion, and
selection is argmin.  The loss for one question with ranks r and scores s is

    sum over pairs (i, j) with r_i < r_j of  max(0, s_i - s_j + (r_j - r_i) * alpha)

so training pushes expansions with better (smaller) ranks toward smaller
scores, with a rank-gap-proportional margin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .corpus import PassageStore, QAExample
from .expansion import CandidateSet, ExpansionCandidate, RankLabel, expanded_query
from .index import Index, RankedList
from .text import normalize

RI_SCHEMA = "ri-v1"   # 9 features
RD_SCHEMA = "rd-v1"   # RI block + 5 retrieval-dependent features
SCHEMA_DIMS = {RI_SCHEMA: 9, RD_SCHEMA: 14}


def _char3(tokens) -> set[str]:
    grams = set()
    for t in tokens:
        if len(t) < 3:
            grams.add(t)
        else:
            grams.update(t[i : i + 3] for i in range(len(t) - 2))
    return grams


class Featurizer:
    """Builds feature vectors for (question, expansion[, top-1 passage])."""

    def __init__(self, index: Index, store: PassageStore):
        self.index = index
        self.store = store
        n = index.doc_count
        self._unseen_idf = math.log(1.0 + (n + 0.5) / 0.5)

    def _idf(self, token: str) -> float:
        stemmed = self.index.analyzer(token)
        if not stemmed:
            return 0.0
        tid = self.index.vocab.get(stemmed[0])
        return self._unseen_idf if tid is None else float(self.index.idf[tid])

    def ri(self, question: str, expansion: str) -> np.ndarray:
        qt = set(normalize(question))
        et = normalize(expansion)
        et_set = set(et)
        overlap = len(et_set & qt) / len(et_set) if et_set else 0.0
        novel = sorted(et_set - qt)
        novel_idfs = [self._idf(t) for t in novel]
        qg, eg = _char3(normalize(question)), _char3(et)
        union = len(qg | eg)
        return np.array([
            float(len(et)),
            overlap,
            1.0 - overlap if et_set else 0.0,
            max(novel_idfs) if novel_idfs else 0.0,
            sum(novel_idfs) / len(novel_idfs) if novel_idfs else 0.0,
            float(sum(t.isdigit() for t in et)),
            float(sum(w[:1].isupper() for w in expansion.split())),
            len(qg & eg) / union if union else 0.0,
            1.0,
        ])

    def rd(self, question: str, expansion: str, rl: RankedList) -> np.ndarray:
        base = self.ri(question, expansion)
        if not rl.entries:
            return np.concatenate([base, np.zeros(5)])
        pid, top_score = rl.entries[0]
        dt = set(normalize(self.store.get(pid).text))
        qt = set(normalize(question))
        et_set = set(normalize(expansion))
        novel = et_set - qt
        novel_overlap = len(novel & dt) / len(novel) if novel else 0.0
        q_overlap = len(qt & dt) / len(qt) if qt else 0.0
        if len(rl.entries) > 1:
            margin_pos = 1.0 if top_score - rl.entries[1][1] > 0 else 0.0
        else:
            margin_pos = 1.0
        return np.concatenate([base, [
            top_score,
            novel_overlap,
            q_overlap,
            float(len(normalize(self.store.get(pid).text))),
            margin_pos,
        ]])

    def features(self, variant: str, question: str, cand: ExpansionCandidate,
                 rl: RankedList | None = None) -> np.ndarray:
        if variant == "RI":
            return self.ri(question, cand.text)
        if rl is None:
            rl = self.index.search(expanded_query(question, cand.text), k=2)
        return self.rd(question, cand.text, rl)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.01
    epochs: int | None = None  # None -> 2 for RI, 3 for RD
    group_batch: int = 8
    learning_rate: float = 0.5
    hidden_width: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def epochs_for(self, variant: str) -> int:
        if self.epochs is not None:
            return self.epochs
        return 2 if variant == "RI" else 3


class ScorerModel:
    def __init__(self, variant: str, schema_id: str, weights: np.ndarray,
                 feature_mean: np.ndarray, feature_std: np.ndarray,
                 hidden: tuple[np.ndarray, np.ndarray] | None = None,
                 generator_tag: str = "stub"):
        if variant not in ("RI", "RD"):
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant
        self.schema_id = schema_id
        self.weights = np.asarray(weights, dtype=np.float64)
        self.feature_mean = np.asarray(feature_mean, dtype=np.float64)
        self.feature_std = np.asarray(feature_std, dtype=np.float64)
        self.hidden = hidden
        self.generator_tag = generator_tag
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite model weights")

    def _standardize(self, f: np.ndarray) -> np.ndarray:
        return (f - self.feature_mean) / self.feature_std

    def score(self, f: np.ndarray) -> float:
        if f.shape[0] != SCHEMA_DIMS[self.schema_id]:
            raise ValueError(
                f"feature length {f.shape[0]} does not match schema "
                f"{self.schema_id}"
            )
        z = self._standardize(np.asarray(f, dtype=np.float64))
        if self.hidden is None:
            return float(self.weights @ z)
        w1, b1 = self.hidden
        return float(self.weights @ np.tanh(w1 @ z + b1))

    def save(self, path) -> None:
        doc = {
            "format_version": 1,
            "kind": "expansion_scorer",
            "variant": self.variant,
            "schema_id": self.schema_id,
            "generator_tag": self.generator_tag,
            "weights": self.weights.tolist(),
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "hidden": None if self.hidden is None else {
                "w": self.hidden[0].tolist(), "b": self.hidden[1].tolist(),
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ScorerModel":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("kind") != "expansion_scorer":
            raise ValueError(f"{path}: not an expansion scorer model")
        hidden = None
        if doc.get("hidden"):
            hidden = (np.array(doc["hidden"]["w"]), np.array(doc["hidden"]["b"]))
        return cls(doc["variant"], doc["schema_id"], np.array(doc["weights"]),
                   np.array(doc["feature_mean"]), np.array(doc["feature_std"]),
                   hidden=hidden, generator_tag=doc.get("generator_tag", "stub"))


def rank_loss(scores, labels, alpha: float) -> tuple[float, np.ndarray]:
    """Pairwise hinge loss and its (sub)gradient with respect to the scores.

    Subgradient at the hinge kink is 0.
    """
    s = np.asarray(scores, dtype=np.float64)
    ranks = np.array([l.r for l in labels], dtype=np.float64)
    if s.shape[0] != ranks.shape[0]:
        raise ValueError("scores and labels must align")
    loss = 0.0
    grad = np.zeros_like(s)
    n = s.shape[0]
    for i in range(n):
        for j in range(n):
            if ranks[i] < ranks[j]:
                h = s[i] - s[j] + (ranks[j] - ranks[i]) * alpha
                if h > 0:
                    loss += h
                    grad[i] += 1.0
                    grad[j] -= 1.0
    return loss, grad


def _standardizer(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    constant = std < 1e-12
    mean[constant] = 0.0
    std[constant] = 1.0
    return mean, std


def train(examples, cfg: TrainConfig, variant: str,
          featurizer: Featurizer) -> ScorerModel:
    """Mini-batch subgradient descent on the pairwise ranking loss.

    A batch is ``group_batch`` whole questions; each contributes its complete
    candidate group to the loss.
    """
    if variant not in ("RI", "RD"):
        raise ValueError(f"unknown variant {variant!r}")
    schema = RI_SCHEMA if variant == "RI" else RD_SCHEMA
    groups = []
    for ex in examples:
        if len(ex.candidates) < 2:
            raise ValueError(f"question {ex.qid} has fewer than 2 candidates")
        if variant == "RD" and not ex.top1:
            raise ValueError(f"RD training needs top-1 passages ({ex.qid})")
        feats = np.stack([
            featurizer.features(variant, ex.question, cand)
            for cand in ex.candidates.candidates
        ])
        groups.append((feats, ex.labels))

    all_feats = np.concatenate([f for f, _ in groups])
    mean, std = _standardizer(all_feats)
    dim = SCHEMA_DIMS[schema]
    rng = np.random.default_rng(cfg.seed)

    use_hidden = cfg.hidden_width > 0
    if use_hidden:
        w1 = rng.normal(scale=0.3, size=(cfg.hidden_width, dim))
        b1 = np.zeros(cfg.hidden_width)
        w = rng.normal(scale=0.3, size=cfg.hidden_width)
    else:
        w = np.zeros(dim)

    def group_score_and_grads(feats):
        z = (feats - mean) / std
        if not use_hidden:
            return z @ w, z, None
        pre = z @ w1.T + b1
        hid = np.tanh(pre)
        return hid @ w, z, (pre, hid)

    epochs = cfg.epochs_for(variant)
    for epoch in range(epochs):
        order = rng.permutation(len(groups))
        lr = cfg.learning_rate / (1.0 + epoch)
        for start in range(0, len(order), cfg.group_batch):
            batch = order[start : start + cfg.group_batch]
            gw = np.zeros_like(w)
            gw1 = np.zeros_like(w1) if use_hidden else None
            gb1 = np.zeros_like(b1) if use_hidden else None
            pairs = 0
            for gi in batch:
                feats, labels = groups[gi]
                scores, z, cache = group_score_and_grads(feats)
                _, gscores = rank_loss(scores, labels, cfg.alpha)
                pairs += max(1, len(labels) * (len(labels) - 1) // 2)
                if not use_hidden:
                    gw += gscores @ z
                else:
                    pre, hid = cache
                    gw += gscores @ hid
                    dhid = np.outer(gscores, w) * (1.0 - hid**2)
                    gw1 += dhid.T @ z
                    gb1 += dhid.sum(axis=0)
            scale = lr / pairs
            w -= scale * gw
            if use_hidden:
                w1 -= scale * gw1
                b1 -= scale * gb1

    hidden = (w1, b1) if use_hidden else None
    tags = {c.generator_tag for ex in examples for c in ex.candidates.candidates}
    tag = tags.pop() if len(tags) == 1 else "external"
    return ScorerModel(variant, schema, w, mean, std, hidden=hidden,
                       generator_tag=tag)


def training_loss(model: ScorerModel, examples, featurizer: Featurizer,
                  alpha: float) -> float:
    total = 0.0
    for ex in examples:
        scores = [
            model.score(featurizer.features(model.variant, ex.question, c))
            for c in ex.candidates.candidates
        ]
        total += rank_loss(scores, ex.labels, alpha)[0]
    return total


def select_best(model: ScorerModel, question: str, cs: CandidateSet,
                featurizer: Featurizer) -> ExpansionCandidate:
    """Argmin-score candidate; ties go to the earliest index."""
    if not cs.candidates:
        raise ValueError("cannot select from an empty candidate set")
    if model.variant == "RD":
        lists = featurizer.index.batch_search(
            [(cs.qid, expanded_query(question, c.text)) for c in cs.candidates],
            k=2,
        )
    else:
        lists = [None] * len(cs.candidates)
    best_i, best_score = 0, math.inf
    for i, (cand, rl) in enumerate(zip(cs.candidates, lists)):
        s = model.score(featurizer.features(model.variant, question, cand, rl))
        if s < best_score:
            best_i, best_score = i, s
    return cs.candidates[best_i]

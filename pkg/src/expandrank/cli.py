"""Command-line entry point wiring the modules into reproducible experiments.

Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from collections import Counter

from . import evalbench, expansion, pipeline, synth
from .corpus import CorpusError, load_corpus, load_questions
from .evalbench import DEFAULT_KS
from .index import Bm25Params, Index, build_index
from .passage_reranker import PassageScorer, PRTrainConfig, train_passage_reranker
from .pipeline import STRATEGY_KINDS, StrategySpec
from .reranker import Featurizer, ScorerModel, TrainConfig, train


class UsageError(Exception):
    pass


def _print_config(args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print("config:", json.dumps(cfg, sort_keys=True, default=str))


def _require_file(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise UsageError(f"{what} not found: {path}")
    return path


def _bm25_params(args) -> Bm25Params:
    return Bm25Params(k1=args.k1, b=args.b, stemming=not args.no_stemming,
                      stopwords=not args.no_stopwords,
                      index_titles=args.index_titles)


def _load_candidates(args, index, store, questions):
    if args.expansions:
        _require_file(args.expansions, "expansions file")
        return expansion.load_expansions(
            args.expansions, known_qids={qa.qid for qa in questions}
        )
    return {
        qa.qid: expansion.sample_expansions_stub(
            qa.question, args.n_samples, args.seed, index, store
        )
        for qa in questions
    }


# -- subcommands ------------------------------------------------------------

def cmd_index(args) -> int:
    _require_file(args.corpus, "corpus")
    store = load_corpus(args.corpus)
    t0 = time.perf_counter()
    index = build_index(store, _bm25_params(args))
    build_s = time.perf_counter() - t0
    index.save(args.out)
    print(f"documents: {index.doc_count}")
    print(f"build_seconds: {build_s:.3f}")
    print(f"index_bytes: {os.path.getsize(args.out)}")
    return 0


def cmd_make_train(args) -> int:
    _require_file(args.index, "index")
    _require_file(args.corpus, "corpus")
    _require_file(args.questions, "questions")
    try:
        cfg = expansion.ConstructionConfig(
            n_samples=args.n_samples, k_retrieve=args.k_retrieve,
            max_rank=args.max_rank, folds=args.folds, seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    store = load_corpus(args.corpus)
    index = Index.load(args.index)
    questions = load_questions(args.questions)
    if len(questions) < cfg.folds:
        raise UsageError(
            f"{len(questions)} questions cannot fill {cfg.folds} folds"
        )
    loaded = _load_candidates(args, index, store, questions)

    def generator(qa, fold):
        cs = loaded.get(qa.qid)
        if cs is None:
            raise CorpusError(f"no expansions for qid {qa.qid}")
        return cs

    examples = expansion.build_training_set(store, index, questions, cfg,
                                            generator)
    expansion.save_training_set(examples, args.out)
    hist = Counter(l.r for ex in examples for l in ex.labels)
    print("rank histogram (r: count):")
    for r in sorted(hist):
        print(f"  {r}: {hist[r]}")
    print(f"examples: {len(examples)}")
    return 0


def cmd_train(args) -> int:
    _require_file(args.train, "training set")
    _require_file(args.index, "index")
    _require_file(args.corpus, "corpus")
    examples = expansion.load_training_set(args.train)
    store = load_corpus(args.corpus)
    index = Index.load(args.index)
    cfg = TrainConfig(alpha=args.alpha, epochs=args.epochs,
                      group_batch=args.group_batch,
                      learning_rate=args.learning_rate,
                      hidden_width=args.hidden_width, seed=args.seed)
    model = train(examples, cfg, args.variant, Featurizer(index, store))
    model.save(args.out)
    print(f"trained {args.variant} model on {len(examples)} questions -> {args.out}")
    return 0


def cmd_train_pr(args) -> int:
    _require_file(args.index, "index")
    _require_file(args.corpus, "corpus")
    _require_file(args.questions, "questions")
    store = load_corpus(args.corpus)
    index = Index.load(args.index)
    questions = load_questions(args.questions)
    cfg = PRTrainConfig(train_depth=args.train_depth, epochs=args.epochs,
                        learning_rate=args.learning_rate, seed=args.seed)
    scorer = train_passage_reranker(index, store, questions, cfg)
    scorer.save(args.out)
    print(f"trained passage scorer on {len(questions)} questions -> {args.out}")
    return 0


def cmd_retrieve(args) -> int:
    _require_file(args.index, "index")
    _require_file(args.corpus, "corpus")
    _require_file(args.questions, "questions")
    store = load_corpus(args.corpus)
    index = Index.load(args.index)
    questions = load_questions(args.questions, require_answers=False)
    if args.strategy == "oracle" and any(not qa.answers for qa in questions):
        raise UsageError("oracle strategy needs questions with answers")
    spec = StrategySpec(kind=args.strategy, n_samples=args.n_samples,
                        cap_n=args.cap_n, k_retrieve=args.k,
                        pr_depth=args.pr_depth)
    model = featurizer = scorer = None
    if args.strategy in ("ear_ri", "ear_rd"):
        if not args.model:
            raise UsageError(f"strategy {args.strategy} needs --model")
        model = ScorerModel.load(_require_file(args.model, "model"))
        featurizer = Featurizer(index, store)
    if args.pr_model:
        scorer = PassageScorer.load(_require_file(args.pr_model, "pr model"))
    candidates = None
    if args.strategy != "bm25":
        candidates = _load_candidates(args, index, store, questions)
    runs = pipeline.run_dataset(spec, index, store, questions, candidates,
                                model, featurizer, scorer)
    evalbench.write_run(runs, args.out)
    print(f"wrote {sum(len(rl) for rl in runs.values())} entries for "
          f"{len(runs)} questions -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    _require_file(args.run, "run file")
    _require_file(args.questions, "questions")
    _require_file(args.corpus, "corpus")
    store = load_corpus(args.corpus)
    questions = load_questions(args.questions)
    runs = evalbench.read_run(args.run)
    ks = tuple(int(k) for k in args.ks.split(","))
    report = evalbench.topk_accuracy(runs, questions, store, ks=ks,
                                     tag=os.path.basename(args.run))
    print(report.format_text())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def cmd_bench(args) -> int:
    _require_file(args.corpus, "corpus")
    _require_file(args.questions, "questions")
    store = load_corpus(args.corpus)
    questions = load_questions(args.questions, require_answers=False)
    spec = StrategySpec(kind=args.strategy, n_samples=args.n_samples,
                        k_retrieve=args.k)
    model = None
    if args.strategy in ("ear_ri", "ear_rd"):
        if not args.model:
            raise UsageError(f"strategy {args.strategy} needs --model")
        model = ScorerModel.load(_require_file(args.model, "model"))
    report = evalbench.bench_latency(store, _bm25_params(args), spec, questions,
                                     repetitions=args.repetitions, model=model,
                                     stub_seed=args.seed)
    print(json.dumps(report.as_dict(), sort_keys=True, indent=2))
    return 0


def cmd_ablate(args) -> int:
    _require_file(args.index, "index")
    _require_file(args.corpus, "corpus")
    _require_file(args.questions, "questions")
    store = load_corpus(args.corpus)
    index = Index.load(args.index)
    questions = load_questions(args.questions)
    ns = sorted(int(n) for n in args.ns.split(","))
    spec = StrategySpec(kind=args.strategy, n_samples=args.n_samples,
                        k_retrieve=args.k)
    model = featurizer = None
    if args.strategy in ("ear_ri", "ear_rd"):
        if not args.model:
            raise UsageError(f"strategy {args.strategy} needs --model")
        model = ScorerModel.load(_require_file(args.model, "model"))
        featurizer = Featurizer(index, store)
    candidates = _load_candidates(args, index, store, questions)
    reports = evalbench.ablate_candidate_size(spec, index, store, questions,
                                              candidates, ns, model, featurizer)
    csv_text = evalbench.report_csv(reports)
    print(csv_text, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    return 0


def cmd_fuse(args) -> int:
    loaded = [evalbench.read_run(_require_file(p, "run file"))
              for p in args.runs]
    qids = list(loaded[0])
    fused = {}
    for qid in qids:
        lists = [runs[qid] for runs in loaded if qid in runs]
        fused[qid] = pipeline.fuse(lists, args.k)
    evalbench.write_run(fused, args.out)
    print(f"fused {len(args.runs)} runs over {len(fused)} questions -> {args.out}")
    return 0


# -- parser -----------------------------------------------------------------

def _add_bm25_flags(p):
    p.add_argument("--k1", type=float, default=0.9, help="BM25 k1 (default 0.9)")
    p.add_argument("--b", type=float, default=0.4, help="BM25 b (default 0.4)")
    p.add_argument("--no-stemming", action="store_true",
                   help="disable Porter stemming")
    p.add_argument("--no-stopwords", action="store_true",
                   help="disable stopword removal")
    p.add_argument("--index-titles", action="store_true",
                   help="concatenate titles into the indexed body")


def _add_candidate_flags(p):
    p.add_argument("--expansions", default=None,
                   help="expansions JSONL {qid, generator_tag, text}; "
                        "stub sampler is used when omitted")
    p.add_argument("--n-samples", type=int, default=50,
                   help="stub candidates per question (default 50)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expandrank",
        description="BM25 retrieval with reranked query expansions",
    )
    parser.add_argument("--workers", type=int, default=1,
                        help="worker processes (default 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and persist a BM25 index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    _add_bm25_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("make-train", help="build the rank-labeled training set")
    p.add_argument("--index", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--out", required=True)
    _add_candidate_flags(p)
    p.add_argument("--k-retrieve", type=int, default=100)
    p.add_argument("--max-rank", type=int, default=101)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_train)

    p = sub.add_parser("train", help="train an expansion scorer")
    p.add_argument("--train", required=True, help="training JSONL")
    p.add_argument("--index", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=("RI", "RD"), default="RD")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=None,
                   help="default 2 for RI, 3 for RD")
    p.add_argument("--group-batch", type=int, default=8)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--hidden-width", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-pr", help="train the passage reranker")
    p.add_argument("--index", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train-depth", type=int, default=10)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_pr)

    p = sub.add_parser("retrieve", help="run a retrieval strategy, write TREC run")
    p.add_argument("--index", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", choices=STRATEGY_KINDS, default="bm25")
    _add_candidate_flags(p)
    p.add_argument("--model", default=None)
    p.add_argument("--pr-model", default=None)
    p.add_argument("--pr-depth", type=int, default=100)
    p.add_argument("--cap-n", type=int, default=None)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", help="top-k accuracy of a TREC run")
    p.add_argument("--run", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--ks", default=",".join(str(k) for k in DEFAULT_KS))
    p.add_argument("--out", default=None, help="JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="per-stage latency benchmark")
    p.add_argument("--corpus", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--strategy", choices=STRATEGY_KINDS, default="bm25")
    p.add_argument("--model", default=None)
    p.add_argument("--n-samples", type=int, default=50)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    _add_bm25_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", help="accuracy vs candidate cap N")
    p.add_argument("--index", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--strategy", choices=STRATEGY_KINDS, default="oracle")
    p.add_argument("--ns", default="1,5,10,20,30,50",
                   help="comma-separated candidate caps")
    p.add_argument("--model", default=None)
    p.add_argument("--k", type=int, default=100)
    _add_candidate_flags(p)
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("fuse", help="round-robin fuse TREC runs")
    p.add_argument("--runs", nargs="+", required=True,
                   help="run files in fusion order")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _print_config(args)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

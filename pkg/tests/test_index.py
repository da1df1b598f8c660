import numpy as np
import pytest

from expandrank import kernels
from expandrank.corpus import Passage, PassageStore
from expandrank.index import Bm25Params, Index, IndexError_, RankedList, build_index
from expandrank.synth import make_random_corpus, make_random_queries
from oracles import brute_bm25_scores, brute_search, brute_term_counts

PARAMS = Bm25Params()


@pytest.fixture(scope="module")
def small_corpus():
    passages = make_random_corpus(100, seed=7, vocab_size=300, doc_len=30)
    store = PassageStore(passages)
    return store, build_index(store, PARAMS)


class TestParams:
    def test_invalid(self):
        with pytest.raises(IndexError_):
            Bm25Params(k1=0.0)
        with pytest.raises(IndexError_):
            Bm25Params(b=1.5)


class TestBuild:
    def test_counts_and_avgdl(self):
        store = PassageStore([
            Passage(id="a", title="", text="red green blue"),
            Passage(id="b", title="", text="red red"),
            Passage(id="c", title="", text="blue"),
        ])
        index = build_index(store, Bm25Params(stemming=False, stopwords=False))
        assert index.doc_count == 3
        assert index.avg_doc_length == pytest.approx((3 + 2 + 1) / 3)

    def test_all_stopword_doc(self):
        store = PassageStore([
            Passage(id="a", title="", text="the of and"),
            Passage(id="b", title="", text="red green"),
        ])
        index = build_index(store, PARAMS)
        assert index.doc_lengths[index.pids.index("a")] == 0

    def test_empty_store_rejected(self):
        with pytest.raises(IndexError_):
            build_index(PassageStore([]), PARAMS)

    def test_postings_match_brute_counts(self, small_corpus):
        store, index = small_corpus
        expected = brute_term_counts(store, PARAMS)
        assert set(index.vocab) == set(expected)
        for term, by_pid in expected.items():
            tid = index.vocab[term]
            s, e = index.post_offsets[tid], index.post_offsets[tid + 1]
            got = {
                index.pids[d]: tf
                for d, tf in zip(index.post_docs[s:e], index.post_tfs[s:e])
            }
            assert got == by_pid

    def test_title_indexing_flag(self):
        store = PassageStore([
            Passage(id="a", title="zebra facts", text="striped animal"),
            Passage(id="b", title="", text="plain animal"),
        ])
        plain = build_index(store, PARAMS)
        titled = build_index(store, Bm25Params(index_titles=True))
        assert "zebra" not in plain.vocab
        assert "zebra" in titled.vocab


class TestScore:
    def test_no_overlap_is_zero(self, small_corpus):
        store, index = small_corpus
        assert index.bm25_score(["notaterm"], index.pids[0]) == 0.0

    def test_single_doc_hand_formula(self):
        store = PassageStore([Passage(id="a", title="", text="red red green")])
        params = Bm25Params(k1=1.2, b=0.75, stemming=False, stopwords=False)
        index = build_index(store, params)
        # df=1, N=1 -> idf = ln(1 + 0.5/1.5); dl = avgdl -> len part = k1
        idf = np.log(1 + 0.5 / 1.5)
        expected = idf * (2 * 2.2) / (2 + 1.2) + idf * (1 * 2.2) / (1 + 1.2)
        got = index.bm25_score(["red", "green"], "a")
        assert got == pytest.approx(expected, abs=1e-12)

    def test_matches_brute_force(self, small_corpus):
        store, index = small_corpus
        queries = make_random_queries(20, list(store), seed=3)
        for q in queries:
            expected = brute_bm25_scores(store, PARAMS, q)
            for pid in index.pids[::7]:
                assert index.bm25_score(index.analyzer(q), pid) == pytest.approx(
                    expected[pid], abs=1e-9
                )

    def test_unknown_pid(self, small_corpus):
        _, index = small_corpus
        with pytest.raises(KeyError):
            index.bm25_score(["red"], "nope")

    def test_monotone_tf(self):
        base = "alpha beta " + "pad " * 10
        store = PassageStore([
            Passage(id="a", title="", text=base),
            Passage(id="b", title="", text=base + " alpha"),
        ])
        index = build_index(store, Bm25Params(stemming=False, stopwords=False))
        assert index.bm25_score(["alpha"], "b") > index.bm25_score(["alpha"], "a")


class TestSearch:
    def test_k_larger_than_corpus(self, small_corpus):
        store, index = small_corpus
        q = make_random_queries(1, list(store), seed=1)[0]
        rl = index.search(q, k=10_000)
        scores = brute_bm25_scores(store, PARAMS, q)
        assert len(rl) == sum(1 for s in scores.values() if s > 0)

    def test_unique_match_ranks_first(self, tiny_store):
        index = build_index(tiny_store, PARAMS)
        rl = index.search("grow hops oregon", k=3)
        assert rl.entries[0][0] == "p1"
        assert brute_search(tiny_store, PARAMS, "grow hops oregon", 3)[0][0] == "p1"

    def test_prefix_property(self, small_corpus):
        store, index = small_corpus
        for q in make_random_queries(5, list(store), seed=2):
            head = index.search(q, k=1).entries
            full = index.search(q, k=10).entries
            assert full[:1] == head

    def test_matches_brute_order_and_scores(self, small_corpus):
        store, index = small_corpus
        for q in make_random_queries(20, list(store), seed=5):
            got = index.search(q, k=100)
            want = brute_search(store, PARAMS, q, 100)
            assert got.pids() == [pid for pid, _ in want]
            for (gp, gs), (wp, ws) in zip(got.entries, want):
                assert gs == pytest.approx(ws, abs=1e-9)

    def test_k_validation(self, small_corpus):
        _, index = small_corpus
        with pytest.raises(ValueError):
            index.search("red", k=0)

    def test_determinism(self, small_corpus):
        store, index = small_corpus
        q = make_random_queries(1, list(store), seed=9)[0]
        again = build_index(store, PARAMS)
        assert index.search(q, 50).entries == again.search(q, 50).entries


class TestBatchSearch:
    def test_singleton_equals_search(self, small_corpus):
        store, index = small_corpus
        q = make_random_queries(1, list(store), seed=4)[0]
        assert index.batch_search([("q0", q)], 10)[0].entries == \
            index.search(q, 10, qid="q0").entries

    def test_matches_sequential(self, small_corpus):
        store, index = small_corpus
        queries = [(f"q{i}", q) for i, q in
                   enumerate(make_random_queries(50, list(store), seed=6))]
        batch = index.batch_search(queries, 20)
        for (qid, q), rl in zip(queries, batch):
            assert rl.entries == index.search(q, 20, qid=qid).entries

    def test_empty_batch(self, small_corpus):
        _, index = small_corpus
        assert index.batch_search([], 10) == []


class TestPersistence:
    def test_round_trip(self, small_corpus, tmp_path):
        store, index = small_corpus
        path = tmp_path / "idx.bin"
        index.save(path)
        loaded = Index.load(path)
        q = make_random_queries(1, list(store), seed=8)[0]
        assert loaded.search(q, 50).entries == index.search(q, 50).entries

    def test_byte_identical_rebuild(self, small_corpus, tmp_path):
        store, _ = small_corpus
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        build_index(store, PARAMS).save(p1)
        build_index(store, PARAMS).save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"nonsense")
        with pytest.raises(IndexError_):
            Index.load(path)


class TestKernelParity:
    def test_numpy_fallback_matches_active_kernel(self, small_corpus):
        store, index = small_corpus
        for q in make_random_queries(10, list(store), seed=11):
            tokens = index.analyzer(q)
            tids, weights = index._query_terms(tokens)
            fast = index.score_all(tokens)
            slow = np.zeros(index.doc_count)
            if len(tids):
                kernels._accumulate_np(
                    tids, weights, index.post_offsets, index.post_docs,
                    index._tfs_f64, index.len_norm, index.params.k1 + 1.0,
                    index.idf, slow,
                )
            np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-12)


class TestRankedList:
    def test_validate(self):
        RankedList(qid="q", entries=[("a", 2.0), ("b", 1.0)]).validate()
        with pytest.raises(ValueError):
            RankedList(qid="q", entries=[("a", 1.0), ("b", 2.0)]).validate()
        with pytest.raises(ValueError):
            RankedList(qid="q", entries=[("a", 2.0), ("a", 1.0)]).validate()

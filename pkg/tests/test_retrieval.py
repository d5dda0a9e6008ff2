"""Typed document store, hybrid two-channel ranking, diverse re-ranking,
join queries over document links, and retrieval metrics.

Oracles here are written independently of the package: plain-float cosine
and objective transcriptions, exhaustive subset enumeration, and hand-traced
link expansions. Frozen values were worked out on paper first.
"""

import http.server
import json
import math
import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtlopt.errors import EmptyPath
from rtlopt.retrieval import (
    SEMANTIC_DIM,
    CorpusStats,
    Database,
    Document,
    EmbeddingPair,
    HashedNgramEmbedder,
    HttpEmbedder,
    RankedHit,
    embed,
    eval_metrics,
    evaluate_retrieval,
    exact_stage2,
    greedy_stage2,
    join_query,
    keyword_vector,
    rank_stage1,
    rank_stage2,
    retrieve,
    semantic_vector,
    similarity,
    stage2_objective,
    tokenize,
)

# ---------------------------------------------------------------------------
# oracles (independent transcriptions, plain floats)


def cos_sparse(a, b):
    common = sorted(set(a) & set(b))
    dot = sum(a[t] * b[t] for t in common)
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def cos_dense(a, b):
    dot = sum(float(x) * float(y) for x, y in zip(a, b))
    na = math.sqrt(sum(float(x) * float(x) for x in a))
    nb = math.sqrt(sum(float(y) * float(y) for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def oracle_similarity(a, b, lam):
    return lam * cos_sparse(a.keyword, b.keyword) + (1 - lam) * cos_dense(
        a.semantic, b.semantic) + 1.0


def oracle_objective(chosen, qsims, pair, k):
    rel = sum(qsims[i] for i in chosen)
    div = 0.0
    for i in chosen:
        gaps = [2.0 - pair[i][j] for j in chosen if j != i]
        div += min(gaps) if gaps else 0.0
    return rel + div / k


def oracle_best_subset(qsims, pair, k):
    """Exhaustive max over every k-subset, first-lexicographic on ties."""
    import itertools
    best = None
    best_obj = -math.inf
    for combo in itertools.combinations(range(len(qsims)), k):
        obj = oracle_objective(combo, qsims, pair, k)
        if obj > best_obj:
            best, best_obj = combo, obj
    return list(best), best_obj


VOCAB = ["add", "mul", "shift", "register", "wire", "case", "mux", "state",
         "clock", "reset", "carry", "opcode"]


def random_text(rng, lo=3, hi=8):
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(lo, hi)))


def random_db(rng, n_docs, doc_type="code"):
    db = Database()
    for i in range(n_docs):
        db.add(Document(id=f"c{i:02d}", doc_type=doc_type,
                        text=random_text(rng), category=f"g{i % 3}"))
    return db


def random_matrices(rng, n):
    """qsims in [0,2] plus a symmetric pairwise-sim matrix in [0,2]."""
    qsims = [rng.uniform(0.0, 2.0) for _ in range(n)]
    pair = [[2.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            pair[i][j] = pair[j][i] = rng.uniform(0.0, 2.0)
    return qsims, pair


# ---------------------------------------------------------------------------
# embedding


def test_identical_texts_embed_identically():
    stats = CorpusStats.from_texts(["assign y = a + b;", "always @(posedge clk)"])
    a = embed("assign y = a + b;", stats)
    b = embed("assign y = a + b;", stats)
    assert a.keyword == b.keyword
    assert list(a.semantic) == list(b.semantic)


def test_empty_text_gives_zero_vectors():
    stats = CorpusStats.from_texts(["x"])
    pair = embed("", stats)
    assert pair.keyword == {}
    assert not any(pair.semantic)
    assert len(pair.semantic) == SEMANTIC_DIM


def test_disjoint_texts_are_orthogonal_on_both_channels():
    # single-word texts with non-colliding trigram buckets (checked by support)
    stats = CorpusStats.from_texts(["zzzz", "qqqq"])
    a = embed("zzzz", stats)
    b = embed("qqqq", stats)
    assert set(a.keyword) & set(b.keyword) == set()
    sup_a = {i for i, v in enumerate(a.semantic) if v}
    sup_b = {i for i, v in enumerate(b.semantic) if v}
    assert sup_a and sup_b and not (sup_a & sup_b)
    assert similarity(a, b, 0.5) == 1.0
    assert similarity(a, b, 0.0) == 1.0


def test_semantic_vectors_are_unit_length():
    for text in ["assign y = a + b;", "case (sel)", "q <= d;"]:
        vec = semantic_vector(text)
        assert len(vec) == SEMANTIC_DIM
        assert math.sqrt(sum(float(x) ** 2 for x in vec)) == pytest.approx(1.0, abs=1e-12)


def test_keyword_weights_follow_tf_idf():
    stats = CorpusStats.from_texts(["a b", "a c", "d"])
    assert stats.n_docs == 3
    assert stats.df["a"] == 2 and stats.df["b"] == 1
    kw = keyword_vector("a a b", stats)
    assert kw["a"] == 2 * math.log(4 / 3)
    assert kw["b"] == 1 * math.log(4 / 2)
    # token never seen by the corpus still gets a (maximal) idf
    kw2 = keyword_vector("q", stats)
    assert kw2["q"] == 1 * math.log(4 / 1)


def test_tokenizer_splits_code_punctuation():
    toks = tokenize("assign y = a + b;")
    for t in ["assign", "y", "=", "a", "+", "b", ";"]:
        assert t in toks
    assert tokenize("") == []
    assert tokenize("Foo foo") == ["foo", "foo"]


# ---------------------------------------------------------------------------
# similarity


def unit_pair(token, axis):
    sem = [0.0] * SEMANTIC_DIM
    sem[axis] = 1.0
    return EmbeddingPair(keyword={token: 1.0}, semantic=sem)


def test_identical_pairs_score_two():
    p = unit_pair("t", 0)
    for lam in (0.0, 0.5, 1.0):
        assert similarity(p, p, lam) == 2.0
    assert similarity(p, p, 0.3) == pytest.approx(2.0, abs=1e-12)


def test_orthogonal_pairs_score_one():
    assert similarity(unit_pair("t", 0), unit_pair("u", 1), 0.5) == 1.0


def test_half_lambda_mixed_channels_scores_one_point_five():
    # keyword channels identical (cos 1), semantic orthogonal (cos 0)
    a = unit_pair("t", 0)
    b = unit_pair("t", 1)
    assert similarity(a, b, 0.5) == 1.5


def test_zero_vector_cosine_convention():
    stats = CorpusStats.from_texts(["x y z"])
    empty = embed("", stats)
    full = embed("x y z", stats)
    assert similarity(empty, full, 0.5) == 1.0
    assert similarity(empty, empty, 0.5) == 1.0


@settings(max_examples=60, deadline=None)
@given(
    wa=st.lists(st.sampled_from(VOCAB), max_size=6),
    wb=st.lists(st.sampled_from(VOCAB), max_size=6),
    lam=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
)
def test_similarity_symmetric_and_bounded(wa, wb, lam):
    stats = CorpusStats.from_texts([" ".join(wa), " ".join(wb)])
    a = embed(" ".join(wa), stats)
    b = embed(" ".join(wb), stats)
    assert similarity(a, b, lam) == similarity(b, a, lam)
    assert 0.0 <= similarity(a, b, lam) <= 2.0


# ---------------------------------------------------------------------------
# stage 1: relevance ranking


def small_code_db():
    db = Database()
    texts = {
        "c00": "assign y = a + b;",
        "c01": "assign y = a + b + c;",
        "c02": "assign y = a * b;",
        "c03": "always @(posedge clk) q <= d;",
        "c04": "case (sel) 2'd0: y = a; endcase",
    }
    for i, (did, text) in enumerate(sorted(texts.items())):
        db.add(Document(id=did, doc_type="code", text=text, category=f"g{i}"))
    return db


def test_stage1_matches_brute_force_on_five_docs():
    db = small_code_db()
    query = "assign y = a + b;"
    hits = rank_stage1(db, query, "code", lam=0.5, n=5)
    stats = db.stats()
    q = embed(query, stats)
    scored = sorted(
        ((-oracle_similarity(q, embed(d.text, stats), 0.5), d.id)
         for d in db.by_type("code")))
    assert [h.doc_id for h in hits] == [did for _, did in scored]
    for h, (neg, _) in zip(hits, scored):
        assert h.score == pytest.approx(-neg, abs=1e-12)


def test_stage1_ties_break_by_lowest_id():
    db = Database()
    db.add(Document(id="c9", doc_type="code", text="same text", category="g"))
    db.add(Document(id="c1", doc_type="code", text="same text", category="g"))
    hits = rank_stage1(db, "same text", "code", lam=0.5, n=2)
    assert [h.doc_id for h in hits] == ["c1", "c9"]


def test_stage1_full_ordering_when_n_equals_size():
    db = small_code_db()
    hits = rank_stage1(db, "assign", "code", lam=0.5, n=5)
    assert len(hits) == 5
    assert [h.rank for h in hits] == [1, 2, 3, 4, 5]
    default = rank_stage1(db, "assign", "code", lam=0.5)
    assert [h.doc_id for h in default] == [h.doc_id for h in hits]


def test_self_retrieval_rank_one():
    db = small_code_db()
    hits = rank_stage1(db, "assign y = a * b;", "code", lam=0.5, n=5)
    assert hits[0].doc_id == "c02" and hits[0].rank == 1
    assert hits[0].score == pytest.approx(2.0, abs=1e-12)


def test_stage1_scores_non_increasing():
    rng = random.Random(7)
    db = random_db(rng, 8)
    hits = rank_stage1(db, random_text(rng), "code", lam=0.5, n=8)
    for prev, cur in zip(hits, hits[1:]):
        assert prev.score >= cur.score


def test_stage1_rejects_unknown_type():
    with pytest.raises(ValueError):
        rank_stage1(small_code_db(), "x", "poem", lam=0.5)


# ---------------------------------------------------------------------------
# stage 2: diverse re-ranking


def test_stage2_exact_matches_exhaustive_oracle_n8_k3():
    rng = random.Random(42)
    qsims, pair = random_matrices(rng, 8)
    chosen, obj, mode = rank_stage2(qsims, pair, 3)
    oracle_set, oracle_obj = oracle_best_subset(qsims, pair, 3)
    assert mode == "exact"
    assert obj == oracle_obj
    assert chosen == oracle_set
    assert stage2_objective(chosen, qsims, pair, 3) == obj


def test_stage2_k_equals_n_returns_everything():
    rng = random.Random(5)
    qsims, pair = random_matrices(rng, 5)
    chosen, obj, mode = rank_stage2(qsims, pair, 5)
    assert chosen == [0, 1, 2, 3, 4]
    assert obj == oracle_objective(chosen, qsims, pair, 5)


def test_stage2_k1_picks_top_relevance():
    # dis over a singleton is 0, so k=1 reduces to pure relevance
    qsims = [0.5, 1.7, 1.7, 0.2]
    pair = [[2.0] * 4 for _ in range(4)]
    chosen, obj, mode = rank_stage2(qsims, pair, 1)
    assert chosen == [1]
    assert obj == 1.7


def test_stage2_switches_to_greedy_above_enumeration_budget():
    rng = random.Random(3)
    qsims, pair = random_matrices(rng, 25)
    assert math.comb(25, 5) > 10_000
    chosen, obj, mode = rank_stage2(qsims, pair, 5)
    assert mode == "greedy"
    assert len(chosen) == 5 and chosen == sorted(chosen)
    assert obj == stage2_objective(chosen, qsims, pair, 5)


def test_greedy_never_beats_exact():
    for seed in range(10):
        rng = random.Random(seed)
        qsims, pair = random_matrices(rng, 9)
        _, exact_obj = exact_stage2(qsims, pair, 3)
        _, greedy_obj = greedy_stage2(qsims, pair, 3)
        assert greedy_obj <= exact_obj + 1e-12


def test_stage2_objective_empty_set_is_zero():
    assert stage2_objective([], [1.0], [[2.0]], 1) == 0.0


# ---------------------------------------------------------------------------
# retrieve: both stages end to end


def test_retrieve_reports_ranked_hits_and_objective():
    db = small_code_db()
    result = retrieve(db, "assign y = a + b;", "code", k=2, lam=0.5)
    assert len(result.hits) == 2
    assert [h.rank for h in result.hits] == [1, 2]
    assert result.hits[0].score >= result.hits[1].score
    assert result.mode == "exact"
    # objective is the exhaustive max over the candidate pair matrix
    stats = db.stats()
    q = embed("assign y = a + b;", stats)
    docs = db.by_type("code")
    pairs = [embed(d.text, stats) for d in docs]
    qsims = [oracle_similarity(q, p, 0.5) for p in pairs]
    mat = [[oracle_similarity(a, b, 0.5) for b in pairs] for a in pairs]
    _, oracle_obj = oracle_best_subset(qsims, mat, 2)
    assert result.objective == pytest.approx(oracle_obj, abs=1e-9)


def test_random_corpora_agree_with_oracles():
    for seed in range(10):
        rng = random.Random(seed)
        n = rng.randint(4, 10)
        k = rng.randint(1, min(4, n))
        lam = rng.choice([0.0, 0.25, 0.5, 1.0])
        db = random_db(rng, n)
        query = random_text(rng)
        stats = db.stats()
        q = embed(query, stats)
        docs = db.by_type("code")
        order = sorted(
            ((-oracle_similarity(q, embed(d.text, stats), lam), d.id) for d in docs))
        hits = rank_stage1(db, query, "code", lam=lam, n=n)
        assert [h.doc_id for h in hits] == [did for _, did in order]
        result = retrieve(db, query, "code", k=k, lam=lam, n=n)
        pairs = {d.id: embed(d.text, stats) for d in docs}
        cand = [did for _, did in order]
        qsims = [oracle_similarity(q, pairs[d], lam) for d in cand]
        mat = [[oracle_similarity(pairs[a], pairs[b], lam) for b in cand]
               for a in cand]
        _, oracle_obj = oracle_best_subset(qsims, mat, k)
        assert result.objective == pytest.approx(oracle_obj, abs=1e-9)
        assert len(result.hits) == k


# ---------------------------------------------------------------------------
# join queries


def linked_db():
    """Six documents: two instructions fanning out to algorithms via links."""
    db = Database()
    db.add(Document(id="i1", doc_type="instruction", text="share the adder",
                    category="share", links=["a1"]))
    db.add(Document(id="i2", doc_type="instruction", text="fold constants",
                    category="fold", links=["a1", "a2"]))
    db.add(Document(id="c1", doc_type="code", text="assign y = a + b;",
                    category="share", links=["a1"]))
    db.add(Document(id="c2", doc_type="code", text="assign y = b + a;",
                    category="share", links=["a1"]))
    db.add(Document(id="a1", doc_type="algorithm", text="balanced adder tree",
                    category="share"))
    db.add(Document(id="a2", doc_type="algorithm", text="constant lattice",
                    category="fold"))
    return db


def test_join_follows_links_over_six_docs():
    db = linked_db()
    # query is exactly i1's text: i1 ranks first (score 2), i2 lower.
    # i1 -> {a1}, i2 -> {a1, a2}; a1 keeps i1's higher score.
    hits = join_query(db, "share the adder", ["instruction", "algorithm"], lam=0.5)
    assert [h.doc_id for h in hits] == ["a1", "a2"]
    assert hits[0].score == pytest.approx(2.0, abs=1e-12)
    assert hits[0].score > hits[1].score
    assert [h.rank for h in hits] == [1, 2]


def test_join_deduplicates_targets_keeping_max_score():
    db = linked_db()
    hits = join_query(db, "assign y = a + b;", ["code", "algorithm"], lam=0.5)
    assert [h.doc_id for h in hits] == ["a1"]
    # a1 is reachable from both c1 and c2; the reported score is c1's (exact match)
    assert hits[0].score == pytest.approx(2.0, abs=1e-12)


def test_join_single_link_trivial():
    db = Database()
    db.add(Document(id="d1", doc_type="diagram", text="adder tree sketch",
                    category="share", links=["i1"]))
    db.add(Document(id="i1", doc_type="instruction", text="share the adder",
                    category="share"))
    hits = join_query(db, "adder tree sketch", ["diagram", "instruction"])
    assert [h.doc_id for h in hits] == ["i1"]


def test_join_rejects_short_path():
    db = linked_db()
    with pytest.raises(EmptyPath):
        join_query(db, "x", [])
    with pytest.raises(EmptyPath):
        join_query(db, "x", ["code"])


def test_join_unknown_type_raises():
    with pytest.raises(ValueError):
        join_query(linked_db(), "x", ["code", "poem"])


def test_join_respects_k_truncation():
    db = linked_db()
    hits = join_query(db, "fold constants", ["instruction", "algorithm"], k=1)
    assert len(hits) == 1 and hits[0].rank == 1


# ---------------------------------------------------------------------------
# metrics


def test_metrics_pattern_one_zero_one():
    h, m = eval_metrics([("g", ["g", "x", "g"])], 3)
    assert h == pytest.approx(2 / 3, abs=1e-12)
    assert m == pytest.approx(5 / 9, abs=1e-12)


def test_metrics_all_correct_is_perfect():
    h, m = eval_metrics([("g", ["g", "g", "g"]), ("y", ["y", "y", "y"])], 3)
    assert h == 1.0 and m == 1.0


def test_metrics_none_correct_is_zero():
    h, m = eval_metrics([("g", ["x", "x", "x"])], 3)
    assert h == 0.0 and m == 0.0


def test_metrics_requires_k_hits():
    with pytest.raises(ValueError):
        eval_metrics([("g", ["g"])], 3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.booleans(), min_size=4, max_size=4),
                min_size=1, max_size=5))
def test_metrics_bounded(rows_flags):
    rows = [("g", ["g" if f else "x" for f in flags]) for flags in rows_flags]
    h, m = eval_metrics(rows, 4)
    assert 0.0 <= h <= 1.0
    assert 0.0 <= m <= 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=4))
def test_metrics_prefix_of_correct_hits_makes_map_equal_hit_ratio(prefix):
    flags = [True] * prefix + [False] * (4 - prefix)
    rows = [("g", ["g" if f else "x" for f in flags])]
    h, m = eval_metrics(rows, 4)
    assert m == pytest.approx(h, abs=1e-12)


def test_evaluate_retrieval_self_queries_are_perfect_at_one():
    db = small_code_db()
    queries = [{"text": d.text, "doc_type": "code", "category": d.category}
               for d in db.by_type("code")]
    report = evaluate_retrieval(db, queries, k=1)
    assert report["h_at_k"] == 1.0
    assert report["map_at_k"] == 1.0
    assert report["queries"] == 5


# ---------------------------------------------------------------------------
# database persistence


def test_database_roundtrip(tmp_path):
    db = linked_db()
    db.save(tmp_path)
    assert (tmp_path / "instruction.jsonl").exists()
    assert (tmp_path / "code.jsonl").exists()
    assert (tmp_path / "algorithm.jsonl").exists()
    assert (tmp_path / "links.jsonl").exists()
    back = Database.load(tmp_path)
    assert len(back) == len(db)
    for doc in db.all_docs():
        twin = back.get(doc.id)
        assert (twin.doc_type, twin.text, twin.category, twin.links) == (
            doc.doc_type, doc.text, doc.category, doc.links)


def test_save_is_deterministic(tmp_path):
    db = linked_db()
    a = tmp_path / "a"
    b = tmp_path / "b"
    db.save(a)
    db.save(b)
    for name in ["instruction.jsonl", "code.jsonl", "algorithm.jsonl", "links.jsonl"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_dangling_link_rejected(tmp_path):
    db = Database()
    db.add(Document(id="c1", doc_type="code", text="x", category="g",
                    links=["ghost"]))
    with pytest.raises(ValueError):
        db.build_index()
    with pytest.raises(ValueError):
        db.save(tmp_path)


def test_unknown_doc_type_rejected():
    with pytest.raises(ValueError):
        Document(id="d", doc_type="poem", text="x", category="g")


def test_duplicate_id_rejected():
    db = Database()
    db.add(Document(id="c1", doc_type="code", text="x", category="g"))
    with pytest.raises(ValueError):
        db.add(Document(id="c1", doc_type="code", text="y", category="g"))


def test_cyclic_links_allowed():
    db = Database()
    db.add(Document(id="c1", doc_type="code", text="x", category="g",
                    links=["i1"]))
    db.add(Document(id="i1", doc_type="instruction", text="y", category="g",
                    links=["c1"]))
    db.build_index()


# ---------------------------------------------------------------------------
# external embedding service


class _CannedVectors(http.server.BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).last_body = body
        # deterministic per-text vector: [len, 1, 0, 0]
        vec = [float(len(body["text"])), 1.0, 0.0, 0.0]
        out = json.dumps({"vector": vec}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(out)))
        self.end_headers()
        self.wfile.write(out)

    def log_message(self, *args):
        pass


@pytest.fixture
def vector_service():
    server = http.server.HTTPServer(("127.0.0.1", 0), _CannedVectors)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/embed"
    server.shutdown()


def test_http_embedder_posts_text_and_normalizes(vector_service):
    emb = HttpEmbedder(vector_service)
    vec = emb.encode("abc")
    assert _CannedVectors.last_body == {"text": "abc"}
    assert list(vec) == [0.6, 0.8, 0.0, 0.0]


def test_http_embedder_drives_database_index(vector_service):
    db = small_code_db()
    db.build_index(embedder=HttpEmbedder(vector_service))
    hits = rank_stage1(db, "assign y = a * b;", "code", lam=0.5, n=5)
    assert hits[0].doc_id == "c02"
    assert hits[0].score == pytest.approx(2.0, abs=1e-12)


# ---------------------------------------------------------------------------
# hits as JSON (CLI surface)


def test_ranked_hit_serializes():
    hit = RankedHit(doc_id="c1", score=1.5, rank=1)
    assert hit.to_json() == {"id": "c1", "score": 1.5, "rank": 1}

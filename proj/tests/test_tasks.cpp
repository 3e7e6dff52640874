#include <random>

#include <gtest/gtest.h>

#include <relemb/tasks.hpp>

#include "support.hpp"

using namespace relemb;
using relemb::fixtures::make_record;
using relemb::fixtures::tiny_corpus;

namespace {

struct Tiny {
    Corpus corpus = tiny_corpus();
    Vocabulary vocab = build_vocabulary(corpus);
    InvertedIndex index = build_index(corpus, vocab);

    /// Deterministic 3-d embedding: row t = (t + 1, 2t mod 5, 1).
    EmbeddingMatrix wordemb() const {
        EmbeddingMatrix e(vocab.size(), 3, EmbeddingKind::WordEmb, vocab.fingerprint());
        for (std::size_t t = 0; t < vocab.size(); ++t) {
            e.set_row(t, std::vector<double>{double(t + 1), double((2 * t) % 5), 1.0});
        }
        return e;
    }
};

std::vector<std::string> strs(std::initializer_list<char const*> l) { return {l.begin(), l.end()}; }

}  // namespace

TEST(Embedding, SaveLoadAndFingerprint) {
    fixtures::TempDir dir;
    Tiny t;
    auto e = t.wordemb();
    EXPECT_DOUBLE_EQ(e.norm(0), std::sqrt(1.0 + 0.0 + 1.0));
    save_embedding(e, dir / "w.relemb");
    auto back = load_embedding(dir / "w.relemb", EmbeddingKind::WordEmb);
    EXPECT_TRUE(back == e);
    EXPECT_EQ(back.norm(3), e.norm(3));
    Vocabulary other(strs({"aa", "bb"}));
    EXPECT_THROW(require_fingerprint(back.vocab_fingerprint(), other.fingerprint(), "w"), Error);
    EmbeddingMatrix misaligned(t.vocab.size(), 3, EmbeddingKind::WordEmb, other.fingerprint());
    EXPECT_THROW(embed_apps(t.corpus, t.vocab, misaligned, EmbeddingKind::RelEmb), Error);
}

TEST(AppEmbedding, MeanOfTokenRows) {
    Tiny t;
    auto e = t.wordemb();
    auto one = make_record("x", "guitar", "M");
    auto r = app_embedding(one, t.vocab, e);
    auto g = e.row(t.vocab.id("guitar"));
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(r[j], g[j]);
    }
    auto twice = make_record("y", "music music piano", "M");
    auto m = app_embedding(twice, t.vocab, e);
    auto mu = e.row(t.vocab.id("music"));
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(m[j], mu[j]);
    }
    auto a = app_embedding(make_record("a", "music player stream music", "M"), t.vocab, e);
    auto b = app_embedding(make_record("b", "stream music music player", "M"), t.vocab, e);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(a[j], b[j], 1e-15);
    }
    auto none = app_embedding(make_record("z", "violin 42", "M"), t.vocab, e);
    EXPECT_EQ(none, std::vector<double>(3, 0.0));
}

TEST(AppEmbedding, EmbedAppsShape) {
    Tiny t;
    auto set = embed_apps(t.corpus, t.vocab, t.wordemb(), EmbeddingKind::RelEmb);
    EXPECT_EQ(set.app_ids, strs({"D1", "D2", "D3"}));
    EXPECT_EQ(set.matrix.rows(), 3u);
    EXPECT_EQ(set.matrix.kind(), EmbeddingKind::RelEmb);
    EXPECT_EQ(*set.find("D3"), 2u);
}

TEST(QueryVector, MeanAndErrors) {
    Tiny t;
    auto e = t.wordemb();
    auto qv = query_vector(strs({"guitar", "airplay"}), t.vocab, e);
    EXPECT_EQ(qv.source_terms, std::vector<TermId>{t.vocab.id("guitar")});
    auto g = e.row(t.vocab.id("guitar"));
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(qv.vector[j], g[j]);
    }
    try {
        (void)query_vector(strs({"airplay", "violin"}), t.vocab, e);
        FAIL();
    } catch (Error const& err) {
        EXPECT_NE(std::string(err.what()).find("airplay"), std::string::npos);
        EXPECT_NE(std::string(err.what()).find("violin"), std::string::npos);
    }
    EmbeddingMatrix same(t.vocab.size(), 2, EmbeddingKind::WordEmb, t.vocab.fingerprint());
    same.set_row(1, std::vector<double>{0.5, 2.0});
    same.set_row(3, std::vector<double>{0.5, 2.0});
    auto q2 = query_vector(strs({"guitar", "music"}), t.vocab, same);
    EXPECT_EQ(q2.vector, (std::vector<double>{0.5, 2.0}));
}

TEST(ExpandQuery, BasicCases) {
    Tiny t;
    auto e = t.wordemb();
    auto qv = query_vector(strs({"list"}), t.vocab, e);
    EXPECT_TRUE(expand_query(qv, e, {0, 0.5, true}).empty());
    auto self = expand_query(qv, e, {1, 0.5, false});
    ASSERT_EQ(self.size(), 1u);
    EXPECT_EQ(self[0].term, t.vocab.id("list"));
    EXPECT_NEAR(self[0].similarity, 1.0, 1e-12);
    auto excl = expand_query(qv, e, {3, 0.5, true});
    ASSERT_EQ(excl.size(), 3u);
    for (auto const& x : excl) {
        EXPECT_NE(x.term, t.vocab.id("list"));
    }
    EXPECT_GE(excl[0].similarity, excl[1].similarity);
    auto all = expand_query(qv, e, {100, 0.5, true});
    EXPECT_EQ(all.size(), 6u);
}

TEST(ExpandQuery, TiesByTermIdAndZeroRowsSkipped) {
    Vocabulary v(strs({"aa", "bb", "cc", "dd"}));
    EmbeddingMatrix e(4, 2, EmbeddingKind::WordEmb, v.fingerprint());
    e.set_row(0, std::vector<double>{1, 0});
    e.set_row(2, std::vector<double>{2, 0});
    e.set_row(3, std::vector<double>{3, 0});
    auto qv = query_vector(strs({"aa"}), v, e);
    auto out = expand_query(qv, e, {5, 0.5, true});
    ASSERT_EQ(out.size(), 2u);  // bb has a zero row
    EXPECT_EQ(out[0].term, 2u);
    EXPECT_EQ(out[1].term, 3u);
}

TEST(ExpandQuery, RankingInvariantToRowRescaling) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> s(0.1, 10);
    Vocabulary v(strs({"aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh"}));
    EmbeddingMatrix e(8, 4, EmbeddingKind::WordEmb, v.fingerprint());
    EmbeddingMatrix scaled = e;
    for (std::size_t i = 0; i < 8; ++i) {
        std::vector<double> r(4);
        for (auto& x : r) {
            x = g(rng);
        }
        e.set_row(i, r);
        double k = s(rng);
        for (auto& x : r) {
            x *= k;
        }
        scaled.set_row(i, r);
    }
    auto qv = query_vector(strs({"cc"}), v, e);
    auto a = expand_query(qv, e, {7, 0.5, true});
    auto b = expand_query(qv, scaled, {7, 0.5, true});
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].term, b[i].term);
    }
}

TEST(ExpandedSearch, TinyGuitarWithMusic) {
    Tiny t;
    TermId q[] = {t.vocab.id("guitar")};
    TermId x[] = {t.vocab.id("music")};
    auto hits = expanded_search(t.index, {}, q, x, 1.0, 3);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].doc, 1u);
    EXPECT_EQ(hits[1].doc, 0u);
    Corpus const& c = t.corpus;
    EXPECT_NEAR(hits[0].score,
                fixtures::brute_bm25(c, {"guitar"}, 1, 1.2, 0.75) +
                    fixtures::brute_bm25(c, {"music"}, 1, 1.2, 0.75),
                1e-12);
}

TEST(ExpandedSearch, ReducesToPlainSearch) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = fixtures::random_corpus(rng, 60, 20);
        auto v = build_vocabulary(c);
        auto idx = build_index(c, v);
        std::vector<TermId> q{static_cast<TermId>(rng() % v.size()),
                              static_cast<TermId>(rng() % v.size())};
        std::vector<TermId> x{static_cast<TermId>(rng() % v.size())};
        auto plain = search(idx, {}, q, 10);
        for (auto const& hits : {expanded_search(idx, {}, q, x, 0.0, 10),
                                 expanded_search(idx, {}, q, {}, 0.7, 10)}) {
            ASSERT_EQ(hits.size(), plain.size());
            for (std::size_t i = 0; i < hits.size(); ++i) {
                EXPECT_EQ(hits[i].doc, plain[i].doc);
                EXPECT_EQ(hits[i].score, plain[i].score);
            }
        }
    }
    Tiny t;
    EXPECT_THROW(expanded_search(t.index, {}, {}, {}, 0.5, 0), Error);
}

TEST(Ndcg, Fixtures) {
    std::unordered_map<std::string, double> judged{{"a", 2}, {"b", 0}, {"c", 1}};
    auto ranking = strs({"a", "b", "c"});
    EXPECT_NEAR(ndcg(ranking, judged, 3), 0.950234, 1e-6);
    // Independent evaluation of the same case.
    double dcg = 2.0 / std::log2(2.0) + 0.0 / std::log2(3.0) + 1.0 / std::log2(4.0);
    double idcg = 2.0 / std::log2(2.0) + 1.0 / std::log2(3.0);
    EXPECT_NEAR(ndcg(ranking, judged, 3), dcg / idcg, 1e-15);
    EXPECT_DOUBLE_EQ(ndcg(strs({"a", "c", "b"}), judged, 3), 1.0);
    std::unordered_map<std::string, double> zeros{{"a", 0}, {"b", 0}};
    EXPECT_EQ(ndcg(ranking, zeros, 3), 0.0);
    EXPECT_EQ(ndcg(strs({"zz", "a"}), judged, 1), 0.0);
    EXPECT_THROW(ndcg(ranking, judged, 0), Error);
    double exp_dcg = 3.0 + 0.0 + 1.0 / 2.0;
    double exp_idcg = 3.0 + 1.0 / std::log2(3.0);
    EXPECT_NEAR(ndcg(ranking, judged, 3, Gain::Exponential), exp_dcg / exp_idcg, 1e-15);
}

TEST(Ndcg, BoundedAndMonotoneUnderImprovingSwaps) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> rel(0.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::unordered_map<std::string, double> judged;
        std::vector<std::string> ranking;
        for (int i = 0; i < 12; ++i) {
            auto id = "d" + std::to_string(i);
            ranking.push_back(id);
            if (rng() % 3) {
                judged[id] = rel(rng);
            }
        }
        std::shuffle(ranking.begin(), ranking.end(), rng);
        for (std::size_t n : {3u, 5u, 10u}) {
            double base = ndcg(ranking, judged, n);
            EXPECT_GE(base, 0.0);
            EXPECT_LE(base, 1.0 + 1e-12);
            std::size_t i = rng() % 11, j = i + 1 + rng() % (11 - i);
            auto r = [&](std::string const& id) {
                auto it = judged.find(id);
                return it == judged.end() ? 0.0 : it->second;
            };
            auto swapped = ranking;
            if (r(swapped[j]) > r(swapped[i])) {
                std::swap(swapped[i], swapped[j]);
                EXPECT_GE(ndcg(swapped, judged, n), base - 1e-12);
            }
        }
    }
}

TEST(GroupJudgments, FirstAppearanceOrder) {
    std::vector<QueryJudgment> js{{"q2", "b", "x", 1}, {"q1", "a", "x", 2}, {"q2", "b", "y", 0}};
    auto g = group_judgments(js);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g[0].query_id, "q2");
    EXPECT_EQ(g[0].judged.size(), 2u);
    EXPECT_EQ(g[1].query_text, "a");
}

TEST(EvalQueryExpansion, BaselineOnTiny) {
    Tiny t;
    std::vector<QueryJudgment> js{{"q", "music", "D1", 2}, {"q", "music", "D2", 1},
                                  {"q", "music", "D3", 0}, {"o", "violin", "D3", 2}};
    RetrievalContext ctx{t.corpus, t.vocab, t.index, {}};
    auto m = eval_query_expansion(ctx, js, nullptr, {});
    EXPECT_EQ(m.queries, 2u);
    // q is ranked ideally; the all-OOV query scores nothing.
    EXPECT_DOUBLE_EQ(m.ndcg3, 0.5);
    auto e = t.wordemb();
    auto x = eval_query_expansion(ctx, js, &e, {2, 0.5, true});
    EXPECT_EQ(x.queries, 2u);
    EXPECT_GE(x.ndcg10, 0.0);
    EXPECT_LE(x.ndcg10, 1.0);
}

TEST(NearestApps, DuplicatesAndLimits) {
    Tiny t;
    Corpus c = t.corpus;
    c.records.push_back(make_record("D1copy", "music stream player music", "Music"));
    c.records.push_back(make_record("Empty", "1234", "Music"));
    auto apps = embed_apps(c, t.vocab, t.wordemb(), EmbeddingKind::RelEmb);
    auto nn = nearest_apps("D1", apps, 10);
    ASSERT_EQ(nn.size(), 3u);  // self and zero row excluded
    EXPECT_EQ(nn[0].app_id, "D1copy");
    EXPECT_NEAR(nn[0].similarity, 1.0, 1e-9);
    EXPECT_EQ(nearest_apps("D1", apps, 1).size(), 1u);
    EXPECT_THROW(nearest_apps("Empty", apps, 3), Error);
    EXPECT_THROW(nearest_apps("nope", apps, 3), Error);
}

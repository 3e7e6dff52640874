#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "embedding.hpp"
#include "error.hpp"
#include "index.hpp"

namespace relemb {

struct AppEmbeddingSet {
    std::vector<std::string> app_ids;
    EmbeddingMatrix matrix;

    [[nodiscard]] std::optional<std::size_t> find(std::string const& app_id) const {
        auto it = std::find(app_ids.begin(), app_ids.end(), app_id);
        if (it == app_ids.end()) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - app_ids.begin());
    }
};

/// Mean of the embedding rows of every in-vocabulary token occurrence.
inline std::vector<double> app_embedding(AppRecord const& record, Vocabulary const& vocab,
                                         EmbeddingMatrix const& wordemb) {
    std::vector<double> out(wordemb.cols(), 0.0);
    std::size_t count = 0;
    for (auto const& tok : record.description_tokens) {
        auto id = vocab.find(tok);
        if (!id) {
            continue;
        }
        auto row = wordemb.row(*id);
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] += static_cast<double>(row[j]);
        }
        ++count;
    }
    if (count > 0) {
        for (auto& v : out) {
            v /= static_cast<double>(count);
        }
    }
    return out;
}

inline AppEmbeddingSet embed_apps(Corpus const& corpus, Vocabulary const& vocab,
                                  EmbeddingMatrix const& wordemb, EmbeddingKind kind) {
    require_fingerprint(wordemb.vocab_fingerprint(), vocab.fingerprint(), "word embedding");
    if (wordemb.rows() != vocab.size()) {
        throw Error("word embedding row count does not match the vocabulary");
    }
    AppEmbeddingSet set;
    set.matrix = EmbeddingMatrix(corpus.total_docs(), wordemb.cols(), kind, vocab.fingerprint());
    for (std::size_t i = 0; i < corpus.total_docs(); ++i) {
        set.app_ids.push_back(corpus.records[i].app_id);
        set.matrix.set_row(i, app_embedding(corpus.records[i], vocab, wordemb));
    }
    return set;
}

struct ExpansionConfig {
    std::size_t k = 5;
    double gamma = 0.5;
    bool exclude_query_terms = true;
};

struct QueryVector {
    std::vector<double> vector;
    std::vector<TermId> source_terms;
};

inline QueryVector query_vector(std::span<std::string const> query_terms, Vocabulary const& vocab,
                                EmbeddingMatrix const& wordemb) {
    QueryVector qv;
    qv.vector.assign(wordemb.cols(), 0.0);
    for (auto const& term : query_terms) {
        if (auto id = vocab.find(term)) {
            qv.source_terms.push_back(*id);
            auto row = wordemb.row(*id);
            for (std::size_t j = 0; j < qv.vector.size(); ++j) {
                qv.vector[j] += static_cast<double>(row[j]);
            }
        }
    }
    if (qv.source_terms.empty()) {
        std::string names;
        for (auto const& t : query_terms) {
            names += (names.empty() ? "" : ", ") + t;
        }
        throw Error("no query term is in the vocabulary: [" + names + "]");
    }
    for (auto& v : qv.vector) {
        v /= static_cast<double>(qv.source_terms.size());
    }
    return qv;
}

struct ExpansionTerm {
    TermId term;
    double similarity;
};

/// Top-k vocabulary terms by cosine similarity to the query vector; ties go to
/// the lexicographically smaller term (i.e. the lower term id).
inline std::vector<ExpansionTerm> expand_query(QueryVector const& qv, EmbeddingMatrix const& wordemb,
                                               ExpansionConfig const& config) {
    if (config.k == 0) {
        return {};
    }
    double qn = std::sqrt(dot(qv.vector, qv.vector));
    if (qn == 0.0) {
        throw Error("expand_query: zero query vector");
    }
    std::vector<ExpansionTerm> cands;
    for (std::size_t t = 0; t < wordemb.rows(); ++t) {
        if (wordemb.norm(t) == 0.0) {
            continue;
        }
        if (config.exclude_query_terms &&
            std::find(qv.source_terms.begin(), qv.source_terms.end(), t) != qv.source_terms.end()) {
            continue;
        }
        double sim = dot(qv.vector, wordemb.row(t)) / (qn * wordemb.norm(t));
        cands.push_back({static_cast<TermId>(t), sim});
    }
    auto cmp = [](ExpansionTerm const& a, ExpansionTerm const& b) {
        return a.similarity != b.similarity ? a.similarity > b.similarity : a.term < b.term;
    };
    auto k = std::min(config.k, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(),
                      cmp);
    cands.resize(k);
    return cands;
}

/// Two-part score: BM25(original) + gamma * BM25(expansion terms).
inline std::vector<ScoredDoc> expanded_search(InvertedIndex const& index, Bm25Params const& params,
                                              std::span<TermId const> query_terms,
                                              std::span<TermId const> expansion_terms,
                                              double gamma, std::size_t topk) {
    if (topk == 0) {
        throw Error("expanded_search: topk must be >= 1");
    }
    std::vector<double> combined(index.total_docs(), 0.0);
    for (auto const& sd : score_all(index, params, query_terms)) {
        combined[sd.doc] = sd.score;
    }
    if (!expansion_terms.empty()) {
        for (auto const& sd : score_all(index, params, expansion_terms)) {
            combined[sd.doc] += gamma * sd.score;
        }
    }
    std::vector<ScoredDoc> out;
    for (DocId d = 0; d < combined.size(); ++d) {
        if (combined[d] > 0.0) {
            out.push_back({d, combined[d]});
        }
    }
    rank_and_truncate(out, topk);
    return out;
}

enum class Gain { Linear, Exponential };

inline double gain_value(double rel, Gain g) {
    return g == Gain::Linear ? rel : std::exp2(rel) - 1.0;
}

/// NDCG@n of `ranking` (app ids, best first) against the query's judgments.
inline double ndcg(std::span<std::string const> ranking,
                   std::unordered_map<std::string, double> const& judged, std::size_t n,
                   Gain gain = Gain::Linear) {
    if (n == 0) {
        throw Error("ndcg: cutoff must be >= 1");
    }
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(n, ranking.size()); ++i) {
        auto it = judged.find(ranking[i]);
        double rel = it == judged.end() ? 0.0 : it->second;
        dcg += gain_value(rel, gain) / std::log2(static_cast<double>(i) + 2.0);
    }
    std::vector<double> ideal;
    for (auto const& [_, rel] : judged) {
        ideal.push_back(rel);
    }
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(n, ideal.size()); ++i) {
        idcg += gain_value(ideal[i], gain) / std::log2(static_cast<double>(i) + 2.0);
    }
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}

struct QueryGroup {
    std::string query_id;
    std::string query_text;
    std::unordered_map<std::string, double> judged;
};

/// Judgments grouped by query id, in order of first appearance.
inline std::vector<QueryGroup> group_judgments(std::span<QueryJudgment const> judgments) {
    std::vector<QueryGroup> groups;
    std::unordered_map<std::string, std::size_t> pos;
    for (auto const& j : judgments) {
        auto [it, fresh] = pos.emplace(j.query_id, groups.size());
        if (fresh) {
            groups.push_back({j.query_id, j.query_text, {}});
        }
        groups[it->second].judged[j.app_id] = j.relevance;
    }
    return groups;
}

struct QeMetrics {
    double ndcg3 = 0.0;
    double ndcg5 = 0.0;
    double ndcg10 = 0.0;
    std::size_t queries = 0;
};

struct RetrievalContext {
    Corpus const& corpus;
    Vocabulary const& vocab;
    InvertedIndex const& index;
    Bm25Params params;
};

/// Mean NDCG@{3,5,10} over all judged queries. `wordemb == nullptr` is the
/// plain BM25 baseline; otherwise each query is expanded with `config`.
inline QeMetrics eval_query_expansion(RetrievalContext const& ctx,
                                      std::span<QueryJudgment const> judgments,
                                      EmbeddingMatrix const* wordemb, ExpansionConfig const& config,
                                      Gain gain = Gain::Linear) {
    if (wordemb) {
        require_fingerprint(wordemb->vocab_fingerprint(), ctx.vocab.fingerprint(), "embedding");
    }
    constexpr std::size_t depth = 10;
    QeMetrics m;
    for (auto const& q : group_judgments(judgments)) {
        auto tokens = tokenize(q.query_text);
        auto ids = to_term_ids(ctx.vocab, tokens);
        std::vector<ScoredDoc> ranked;
        if (wordemb && !ids.empty()) {
            auto qv = query_vector(tokens, ctx.vocab, *wordemb);
            std::vector<TermId> exp;
            if (std::any_of(qv.vector.begin(), qv.vector.end(), [](double v) { return v != 0.0; })) {
                for (auto const& e : expand_query(qv, *wordemb, config)) {
                    exp.push_back(e.term);
                }
            }
            ranked = expanded_search(ctx.index, ctx.params, ids, exp, config.gamma, depth);
        } else {
            if (wordemb) {
                warn("query '" + q.query_id + "' has no in-vocabulary terms; scored with plain BM25");
            }
            if (!ids.empty()) {
                ranked = search(ctx.index, ctx.params, ids, depth);
            }
        }
        std::vector<std::string> apps;
        for (auto const& sd : ranked) {
            apps.push_back(ctx.corpus.records[sd.doc].app_id);
        }
        m.ndcg3 += ndcg(apps, q.judged, 3, gain);
        m.ndcg5 += ndcg(apps, q.judged, 5, gain);
        m.ndcg10 += ndcg(apps, q.judged, 10, gain);
        ++m.queries;
    }
    if (m.queries > 0) {
        auto n = static_cast<double>(m.queries);
        m.ndcg3 /= n;
        m.ndcg5 /= n;
        m.ndcg10 /= n;
    }
    return m;
}

struct Neighbor {
    std::string app_id;
    double similarity;
};

/// Cosine nearest neighbours of `app_id` among the other nonzero rows.
inline std::vector<Neighbor> nearest_apps(std::string const& app_id, AppEmbeddingSet const& apps,
                                          std::size_t k) {
    auto q = apps.find(app_id);
    if (!q) {
        throw Error("unknown app id: " + app_id);
    }
    auto const& m = apps.matrix;
    if (m.norm(*q) == 0.0) {
        throw Error("app '" + app_id + "' has a zero embedding");
    }
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (i == *q || m.norm(i) == 0.0) {
            continue;
        }
        out.push_back({apps.app_ids[i], dot(m.row(*q), m.row(i)) / (m.norm(*q) * m.norm(i))});
    }
    auto cmp = [](Neighbor const& a, Neighbor const& b) {
        return a.similarity != b.similarity ? a.similarity > b.similarity : a.app_id < b.app_id;
    };
    auto kk = std::min(k, out.size());
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(kk), out.end(), cmp);
    out.resize(kk);
    return out;
}

}  // namespace relemb

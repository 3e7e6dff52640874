#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "binary_io.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "sparse.hpp"

namespace relemb {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    DocId doc;
    std::uint32_t tf;
};

struct ScoredDoc {
    DocId doc;
    double score;

    bool operator==(ScoredDoc const&) const = default;
};

/// Immutable postings + statistics for tf-idf and BM25 scoring.
/// Postings are stored CSR-style: term t owns [offsets[t], offsets[t+1]).
class InvertedIndex {
  public:
    InvertedIndex() = default;

    InvertedIndex(std::vector<std::uint32_t> doc_len, std::vector<std::uint64_t> offsets,
                  std::vector<Posting> flat_postings, Fingerprint vocab_fp)
        : m_doc_len(std::move(doc_len)),
          m_offsets(std::move(offsets)),
          m_postings(std::move(flat_postings)),
          m_vocab_fp(vocab_fp) {
        if (m_doc_len.empty()) {
            throw Error("index must contain at least one document");
        }
        if (m_offsets.empty() || m_offsets.front() != 0 || m_offsets.back() != m_postings.size()) {
            throw Error("index offsets inconsistent with postings");
        }
        std::uint64_t total = 0;
        for (auto len : m_doc_len) {
            total += len;
        }
        m_avgdl = static_cast<double>(total) / static_cast<double>(m_doc_len.size());
        for (TermId t = 0; t < num_terms(); ++t) {
            auto ps = postings(t);
            for (std::size_t i = 0; i < ps.size(); ++i) {
                if (ps[i].doc >= m_doc_len.size() || ps[i].tf == 0 ||
                    (i > 0 && ps[i].doc <= ps[i - 1].doc)) {
                    throw Error("index postings malformed for term " + std::to_string(t));
                }
            }
        }
    }

    [[nodiscard]] std::size_t total_docs() const { return m_doc_len.size(); }
    [[nodiscard]] std::size_t num_terms() const { return m_offsets.size() - 1; }
    [[nodiscard]] double avgdl() const { return m_avgdl; }
    [[nodiscard]] std::uint32_t doc_len(DocId d) const { return m_doc_len.at(d); }
    [[nodiscard]] std::span<std::uint32_t const> doc_lengths() const { return m_doc_len; }
    [[nodiscard]] Fingerprint const& vocab_fingerprint() const { return m_vocab_fp; }

    [[nodiscard]] std::span<Posting const> postings(TermId t) const {
        check_term(t);
        return std::span<Posting const>(m_postings).subspan(
            m_offsets[t], m_offsets[t + 1] - m_offsets[t]);
    }

    [[nodiscard]] std::uint32_t df(TermId t) const {
        check_term(t);
        return static_cast<std::uint32_t>(m_offsets[t + 1] - m_offsets[t]);
    }

    [[nodiscard]] std::uint32_t tf(TermId t, DocId d) const {
        auto ps = postings(t);
        auto it = std::lower_bound(ps.begin(), ps.end(), d,
                                   [](Posting const& p, DocId doc) { return p.doc < doc; });
        return (it != ps.end() && it->doc == d) ? it->tf : 0;
    }

    [[nodiscard]] std::span<std::uint64_t const> offsets() const { return m_offsets; }
    [[nodiscard]] std::span<Posting const> all_postings() const { return m_postings; }

  private:
    void check_term(TermId t) const {
        if (t >= num_terms()) {
            throw Error("term id " + std::to_string(t) + " out of range");
        }
    }

    std::vector<std::uint32_t> m_doc_len;
    std::vector<std::uint64_t> m_offsets{0};
    std::vector<Posting> m_postings;
    Fingerprint m_vocab_fp{};
    double m_avgdl = 0.0;
};

inline InvertedIndex build_index(Corpus const& corpus, Vocabulary const& vocab) {
    std::size_t const n_terms = vocab.size();
    std::vector<std::vector<Posting>> lists(n_terms);
    std::vector<std::uint32_t> doc_len;
    doc_len.reserve(corpus.total_docs());
    std::vector<TermId> ids;
    for (DocId d = 0; d < corpus.total_docs(); ++d) {
        auto const& toks = corpus.records[d].description_tokens;
        doc_len.push_back(static_cast<std::uint32_t>(toks.size()));
        ids.clear();
        for (auto const& tok : toks) {
            auto id = vocab.find(tok);
            if (!id) {
                throw Error("token '" + tok + "' of app '" + corpus.records[d].app_id +
                            "' is not in the vocabulary");
            }
            ids.push_back(*id);
        }
        std::sort(ids.begin(), ids.end());
        for (std::size_t i = 0; i < ids.size();) {
            std::size_t j = i;
            while (j < ids.size() && ids[j] == ids[i]) {
                ++j;
            }
            lists[ids[i]].push_back({d, static_cast<std::uint32_t>(j - i)});
            i = j;
        }
    }
    std::vector<std::uint64_t> offsets(n_terms + 1, 0);
    for (std::size_t t = 0; t < n_terms; ++t) {
        offsets[t + 1] = offsets[t] + lists[t].size();
    }
    std::vector<Posting> flat;
    flat.reserve(offsets.back());
    for (auto& l : lists) {
        flat.insert(flat.end(), l.begin(), l.end());
    }
    return InvertedIndex(std::move(doc_len), std::move(offsets), std::move(flat),
                         vocab.fingerprint());
}

/// ln(TotalDocs / df); 0 when the term occurs nowhere.
inline double idf(InvertedIndex const& index, TermId t) {
    auto df = index.df(t);
    if (df == 0) {
        return 0.0;
    }
    return std::log(static_cast<double>(index.total_docs()) / static_cast<double>(df));
}

/// tf-idf vector of document `d`. Walks every posting list, so this is meant
/// for one-off use; bulk callers should use DocVectors.
inline SparseVector vsm_vector(InvertedIndex const& index, DocId d) {
    SparseVector v;
    for (TermId t = 0; t < index.num_terms(); ++t) {
        auto tf = index.tf(t, d);
        if (tf == 0) {
            continue;
        }
        double w = static_cast<double>(tf) * idf(index, t);
        if (w != 0.0) {
            v.push_back(t, w);
        }
    }
    return v;
}

/// All document tf-idf vectors, precomputed by transposing the postings.
class DocVectors {
  public:
    explicit DocVectors(InvertedIndex const& index)
        : m_rows(index.total_docs()), m_dim(index.num_terms()) {
        for (TermId t = 0; t < index.num_terms(); ++t) {
            double w_idf = idf(index, t);
            if (w_idf == 0.0) {
                continue;
            }
            for (auto const& p : index.postings(t)) {
                m_rows[p.doc].push_back(t, static_cast<double>(p.tf) * w_idf);
            }
        }
    }

    [[nodiscard]] SparseVector const& operator[](DocId d) const { return m_rows.at(d); }
    [[nodiscard]] std::size_t size() const { return m_rows.size(); }
    [[nodiscard]] std::size_t dim() const { return m_dim; }

  private:
    std::vector<SparseVector> m_rows;
    std::size_t m_dim;
};

namespace detail {

inline double bm25_term(InvertedIndex const& index, Bm25Params const& p, double term_idf,
                        std::uint32_t tf, DocId d) {
    if (tf == 0) {
        return 0.0;
    }
    double f = static_cast<double>(tf);
    double norm = 1.0 - p.b + p.b * static_cast<double>(index.doc_len(d)) / index.avgdl();
    return term_idf * (f * (p.k1 + 1.0)) / (f + p.k1 * norm);
}

}  // namespace detail

/// Okapi BM25 of `d` for `query` (repeated terms count once per occurrence).
inline double bm25(InvertedIndex const& index, Bm25Params const& params,
                   std::span<TermId const> query, DocId d) {
    double score = 0.0;
    for (TermId t : query) {
        score += detail::bm25_term(index, params, idf(index, t), index.tf(t, d), d);
    }
    return score;
}

/// Sort by score descending, doc ordinal ascending; keep the first `topk`.
inline void rank_and_truncate(std::vector<ScoredDoc>& docs, std::size_t topk) {
    auto cmp = [](ScoredDoc const& a, ScoredDoc const& b) {
        return a.score != b.score ? a.score > b.score : a.doc < b.doc;
    };
    if (docs.size() > topk) {
        std::partial_sort(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(topk),
                          docs.end(), cmp);
        docs.resize(topk);
    } else {
        std::sort(docs.begin(), docs.end(), cmp);
    }
}

/// Score of every document with a positive BM25 score for `query`. Scores are
/// accumulated term by term in query order, so they equal bm25() bit for bit.
inline std::vector<ScoredDoc> score_all(InvertedIndex const& index, Bm25Params const& params,
                                        std::span<TermId const> query) {
    std::vector<double> acc(index.total_docs(), 0.0);
    std::vector<char> touched(index.total_docs(), 0);
    for (TermId t : query) {
        double w_idf = idf(index, t);
        for (auto const& p : index.postings(t)) {
            acc[p.doc] += detail::bm25_term(index, params, w_idf, p.tf, p.doc);
            touched[p.doc] = 1;
        }
    }
    std::vector<ScoredDoc> out;
    for (DocId d = 0; d < acc.size(); ++d) {
        if (touched[d] && acc[d] > 0.0) {
            out.push_back({d, acc[d]});
        }
    }
    return out;
}

inline std::vector<ScoredDoc> search(InvertedIndex const& index, Bm25Params const& params,
                                     std::span<TermId const> query, std::size_t topk) {
    if (topk == 0) {
        throw Error("search: topk must be >= 1");
    }
    auto docs = score_all(index, params, query);
    rank_and_truncate(docs, topk);
    return docs;
}

/// Map raw tokens onto term ids, dropping out-of-vocabulary tokens.
inline std::vector<TermId> to_term_ids(Vocabulary const& vocab,
                                       std::span<std::string const> tokens) {
    std::vector<TermId> ids;
    for (auto const& tok : tokens) {
        if (auto id = vocab.find(tok)) {
            ids.push_back(*id);
        }
    }
    return ids;
}

// On-disk layout (little-endian):
//   "RELIDX01"
//   u32 num_docs, u32 num_terms, u64 num_postings
//   u32 doc_len[num_docs]
//   u64 offsets[num_terms + 1]
//   u32 posting_doc[num_postings]
//   u32 posting_tf[num_postings]
//   16-byte vocabulary fingerprint
inline void save_index(InvertedIndex const& index, std::filesystem::path const& path) {
    io::BinaryWriter w(path);
    w.put_bytes("RELIDX01");
    w.put(static_cast<std::uint32_t>(index.total_docs()));
    w.put(static_cast<std::uint32_t>(index.num_terms()));
    w.put(static_cast<std::uint64_t>(index.all_postings().size()));
    w.put_array(index.doc_lengths());
    w.put_array(index.offsets());
    std::vector<std::uint32_t> docs, tfs;
    for (auto const& p : index.all_postings()) {
        docs.push_back(p.doc);
        tfs.push_back(p.tf);
    }
    w.put_array(std::span<std::uint32_t const>(docs));
    w.put_array(std::span<std::uint32_t const>(tfs));
    w.put_fingerprint(index.vocab_fingerprint());
    w.commit();
}

inline InvertedIndex load_index(std::filesystem::path const& path) {
    io::BinaryReader r(path);
    r.expect_magic("RELIDX01");
    auto n_docs = r.get<std::uint32_t>();
    auto n_terms = r.get<std::uint32_t>();
    auto n_post = r.get<std::uint64_t>();
    auto doc_len = r.get_array<std::uint32_t>(n_docs);
    auto offsets = r.get_array<std::uint64_t>(std::size_t{n_terms} + 1);
    auto docs = r.get_array<std::uint32_t>(n_post);
    auto tfs = r.get_array<std::uint32_t>(n_post);
    auto fp = r.get_fingerprint();
    r.expect_end();
    std::vector<Posting> postings(n_post);
    for (std::size_t i = 0; i < n_post; ++i) {
        postings[i] = {docs[i], tfs[i]};
    }
    return InvertedIndex(std::move(doc_len), std::move(offsets), std::move(postings), fp);
}

}  // namespace relemb

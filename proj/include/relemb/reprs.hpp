#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <span>
#include <thread>
#include <vector>

#include "binary_io.hpp"
#include "index.hpp"
#include "sparse.hpp"

namespace relemb {

struct ReprConfig {
    std::size_t len_topdocs = 10;
};

/// One sparse relevance-feedback representation per vocabulary term.
struct WordReprMatrix {
    std::vector<SparseVector> rows;
    std::uint32_t cols = 0;
    Fingerprint vocab_fingerprint{};

    [[nodiscard]] std::size_t num_rows() const { return rows.size(); }

    [[nodiscard]] std::uint64_t nnz() const {
        std::uint64_t n = 0;
        for (auto const& r : rows) {
            n += r.nnz();
        }
        return n;
    }
};

namespace detail {

/// Dense accumulator that remembers which slots it touched.
class SparseAccumulator {
  public:
    explicit SparseAccumulator(std::size_t dim) : m_acc(dim, 0.0), m_seen(dim, 0) {}

    void add(std::uint32_t i, double v) {
        if (!m_seen[i]) {
            m_seen[i] = 1;
            m_touched.push_back(i);
        }
        m_acc[i] += v;
    }

    /// Emit (index, acc / denom) in ascending index order and reset.
    SparseVector drain(double denom) {
        std::sort(m_touched.begin(), m_touched.end());
        SparseVector out;
        for (auto i : m_touched) {
            double v = m_acc[i] / denom;
            if (v != 0.0) {
                out.indices.push_back(i);
                out.values.push_back(v);
            }
            m_acc[i] = 0.0;
            m_seen[i] = 0;
        }
        m_touched.clear();
        return out;
    }

  private:
    std::vector<double> m_acc;
    std::vector<char> m_seen;
    std::vector<std::uint32_t> m_touched;
};

/// Score-weighted average of the vectors of `top`; empty when the weights sum to 0.
inline SparseVector feedback_average(DocVectors const& docs, std::span<ScoredDoc const> top,
                                     SparseAccumulator& acc) {
    double weight_sum = 0.0;
    for (auto const& sd : top) {
        weight_sum += sd.score;
    }
    if (top.empty() || weight_sum == 0.0) {
        return {};
    }
    for (auto const& sd : top) {
        auto const& v = docs[sd.doc];
        for (std::size_t i = 0; i < v.nnz(); ++i) {
            acc.add(v.indices[i], sd.score * v.values[i]);
        }
    }
    return acc.drain(weight_sum);
}

inline SparseVector word_repr_with(InvertedIndex const& index, DocVectors const& docs,
                                   Bm25Params const& params, ReprConfig const& config,
                                   TermId term, SparseAccumulator& acc) {
    if (config.len_topdocs == 0) {
        throw Error("len_topdocs must be >= 1");
    }
    TermId const query[] = {term};
    auto top = search(index, params, query, config.len_topdocs);
    return feedback_average(docs, top, acc);
}

}  // namespace detail

inline SparseVector feedback_average(DocVectors const& docs, std::span<ScoredDoc const> top) {
    detail::SparseAccumulator acc(docs.dim());
    return detail::feedback_average(docs, top, acc);
}

/// BM25-weighted average of the tf-idf vectors of the top documents
/// retrieved for `term` alone. Empty when nothing scores above zero.
inline SparseVector word_repr(InvertedIndex const& index, DocVectors const& docs,
                              Bm25Params const& params, ReprConfig const& config, TermId term) {
    detail::SparseAccumulator acc(index.num_terms());
    return detail::word_repr_with(index, docs, params, config, term, acc);
}

inline SparseVector word_repr(InvertedIndex const& index, Bm25Params const& params,
                              ReprConfig const& config, TermId term) {
    DocVectors docs(index);
    return word_repr(index, docs, params, config, term);
}

/// Representations for every term. Terms are handed out to `threads` workers
/// (0 = hardware concurrency); each row depends only on the frozen index, so
/// the result does not depend on the thread count.
inline WordReprMatrix build_all_reprs(InvertedIndex const& index, Bm25Params const& params,
                                      ReprConfig const& config, unsigned threads = 0) {
    DocVectors docs(index);
    WordReprMatrix m;
    m.cols = static_cast<std::uint32_t>(index.num_terms());
    m.vocab_fingerprint = index.vocab_fingerprint();
    m.rows.resize(index.num_terms());
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        detail::SparseAccumulator acc(index.num_terms());
        for (std::size_t t = next++; t < m.rows.size(); t = next++) {
            m.rows[t] = detail::word_repr_with(index, docs, params, config,
                                               static_cast<TermId>(t), acc);
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) {
            pool.emplace_back(worker);
        }
    }
    return m;
}

// CSR layout: "RELSPR01", u32 rows, u32 cols, u64 nnz, u64 row_offsets[rows+1],
// u32 col_indices[nnz], f32 values[nnz], 16-byte vocabulary fingerprint.
inline void save_reprs(WordReprMatrix const& m, std::filesystem::path const& path) {
    io::BinaryWriter w(path);
    w.put_bytes("RELSPR01");
    w.put(static_cast<std::uint32_t>(m.num_rows()));
    w.put(m.cols);
    w.put(m.nnz());
    std::vector<std::uint64_t> offsets{0};
    std::vector<std::uint32_t> cols;
    std::vector<float> vals;
    for (auto const& r : m.rows) {
        offsets.push_back(offsets.back() + r.nnz());
        cols.insert(cols.end(), r.indices.begin(), r.indices.end());
        for (double v : r.values) {
            vals.push_back(static_cast<float>(v));
        }
    }
    w.put_array(std::span<std::uint64_t const>(offsets));
    w.put_array(std::span<std::uint32_t const>(cols));
    w.put_array(std::span<float const>(vals));
    w.put_fingerprint(m.vocab_fingerprint);
    w.commit();
}

inline WordReprMatrix load_reprs(std::filesystem::path const& path) {
    io::BinaryReader r(path);
    r.expect_magic("RELSPR01");
    auto rows = r.get<std::uint32_t>();
    WordReprMatrix m;
    m.cols = r.get<std::uint32_t>();
    auto nnz = r.get<std::uint64_t>();
    auto offsets = r.get_array<std::uint64_t>(std::size_t{rows} + 1);
    auto cols = r.get_array<std::uint32_t>(nnz);
    auto vals = r.get_array<float>(nnz);
    m.vocab_fingerprint = r.get_fingerprint();
    r.expect_end();
    if (offsets.front() != 0 || offsets.back() != nnz) {
        throw Error(path.string() + ": inconsistent row offsets");
    }
    m.rows.resize(rows);
    for (std::uint32_t i = 0; i < rows; ++i) {
        auto& row = m.rows[i];
        for (auto k = offsets[i]; k < offsets[i + 1]; ++k) {
            if (cols[k] >= m.cols) {
                throw Error(path.string() + ": column index out of range");
            }
            row.push_back(cols[k], static_cast<double>(vals[k]));
        }
    }
    return m;
}

}  // namespace relemb

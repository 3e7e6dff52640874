#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <relemb/corpus.hpp>
#include <relemb/index.hpp>

namespace relemb::fixtures {

inline AppRecord make_record(std::string id, std::string description, std::string category) {
    AppRecord r;
    r.app_id = std::move(id);
    r.title = r.app_id;
    r.description_raw = std::move(description);
    r.description_tokens = tokenize(r.description_raw);
    r.category = std::move(category);
    return r;
}

/// D1 "music player stream music", D2 "music guitar", D3 "shopping list coupons".
inline Corpus tiny_corpus() {
    Corpus c;
    c.records.push_back(make_record("D1", "music player stream music", "Music"));
    c.records.push_back(make_record("D2", "music guitar", "Music"));
    c.records.push_back(make_record("D3", "shopping list coupons", "Shopping"));
    return c;
}

/// Corpus with `docs` documents over a `terms`-word alphabet; some docs may be empty.
inline Corpus random_corpus(std::mt19937_64& rng, std::size_t docs, std::size_t terms) {
    std::uniform_int_distribution<std::size_t> len(0, 12);
    std::uniform_int_distribution<std::size_t> word(0, terms - 1);
    Corpus c;
    for (std::size_t d = 0; d < docs; ++d) {
        std::string text;
        std::size_t n = len(rng);
        for (std::size_t i = 0; i < n; ++i) {
            auto w = word(rng);
            text += "t" + std::string(1, static_cast<char>('a' + w / 26)) +
                    std::string(1, static_cast<char>('a' + w % 26)) + " ";
        }
        c.records.push_back(make_record("d" + std::to_string(d), text, "c"));
    }
    // Guarantee a non-empty vocabulary.
    c.records[0].description_raw += " taa";
    c.records[0].description_tokens.push_back("taa");
    return c;
}

/// Okapi BM25 recomputed from the raw token lists, one symbol at a time.
inline double brute_bm25(Corpus const& corpus, std::vector<std::string> const& query,
                         std::size_t doc, double k1, double b) {
    double total_docs = static_cast<double>(corpus.total_docs());
    double total_len = 0.0;
    for (auto const& r : corpus.records) {
        total_len += static_cast<double>(r.description_tokens.size());
    }
    double avgdl = total_len / total_docs;
    auto const& tokens = corpus.records[doc].description_tokens;
    double score = 0.0;
    for (auto const& q : query) {
        double df = 0.0;
        for (auto const& r : corpus.records) {
            for (auto const& t : r.description_tokens) {
                if (t == q) {
                    df += 1.0;
                    break;
                }
            }
        }
        double f = 0.0;
        for (auto const& t : tokens) {
            f += t == q ? 1.0 : 0.0;
        }
        double w = df == 0.0 ? 0.0 : std::log(total_docs / df);
        double len = static_cast<double>(tokens.size());
        score += w * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * len / avgdl));
    }
    return score;
}

struct BruteHit {
    std::size_t doc;
    double score;
};

/// Every document scored by brute_bm25, positive scores only, sorted by score
/// descending then document ascending, truncated to `topk`.
inline std::vector<BruteHit> brute_search(Corpus const& corpus, std::vector<std::string> const& query,
                                          std::size_t topk, double k1, double b) {
    std::vector<BruteHit> hits;
    for (std::size_t d = 0; d < corpus.total_docs(); ++d) {
        double s = brute_bm25(corpus, query, d, k1, b);
        if (s > 0.0) {
            hits.push_back({d, s});
        }
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](BruteHit const& a, BruteHit const& c) { return a.score > c.score; });
    if (hits.size() > topk) {
        hits.resize(topk);
    }
    return hits;
}

/// tf * ln(N/df) per distinct token, from the raw token lists.
inline std::map<std::string, double> brute_vsm(Corpus const& corpus, std::size_t doc) {
    std::map<std::string, double> tf;
    for (auto const& t : corpus.records[doc].description_tokens) {
        tf[t] += 1.0;
    }
    std::map<std::string, double> out;
    for (auto const& [t, f] : tf) {
        double df = 0.0;
        for (auto const& r : corpus.records) {
            for (auto const& u : r.description_tokens) {
                if (u == t) {
                    df += 1.0;
                    break;
                }
            }
        }
        double w = f * std::log(static_cast<double>(corpus.total_docs()) / df);
        if (w != 0.0) {
            out[t] = w;
        }
    }
    return out;
}

class TempDir {
  public:
    TempDir() {
        std::random_device rd;
        m_path = std::filesystem::temp_directory_path() /
                 ("relemb_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(m_path, ec);
    }
    TempDir(TempDir const&) = delete;
    TempDir& operator=(TempDir const&) = delete;

    [[nodiscard]] std::filesystem::path const& path() const { return m_path; }
    [[nodiscard]] std::filesystem::path operator/(std::string const& name) const {
        return m_path / name;
    }

  private:
    std::filesystem::path m_path;
};

}  // namespace relemb::fixtures

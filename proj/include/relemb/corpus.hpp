#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "binary_io.hpp"
#include "error.hpp"

namespace relemb {

using TermId = std::uint32_t;
using DocId = std::uint32_t;

struct AppRecord {
    std::string app_id;
    std::string title;
    std::string description_raw;
    std::vector<std::string> description_tokens;
    std::string category;
    std::optional<std::string> package;
};

struct Corpus {
    std::vector<AppRecord> records;

    [[nodiscard]] std::size_t total_docs() const { return records.size(); }
};

struct QueryJudgment {
    std::string query_id;
    std::string query_text;
    std::string app_id;
    double relevance = 0.0;
};

/// Lowercased ASCII-alphabetic fragments of length >= 2, in input order.
/// Every other byte (digits, punctuation, any byte of a multi-byte UTF-8
/// sequence) acts as a separator.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= 2) {
            out.push_back(cur);
        }
        cur.clear();
    };
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (c >= 'A' && c <= 'Z') {
            cur.push_back(static_cast<char>(c - 'A' + 'a'));
        } else if (c >= 'a' && c <= 'z') {
            cur.push_back(static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

class Vocabulary {
  public:
    Vocabulary() = default;

    /// `terms` must be unique; they are sorted here.
    explicit Vocabulary(std::vector<std::string> terms) : m_terms(std::move(terms)) {
        std::sort(m_terms.begin(), m_terms.end());
        m_index.reserve(m_terms.size());
        for (std::size_t i = 0; i < m_terms.size(); ++i) {
            if (i > 0 && m_terms[i] == m_terms[i - 1]) {
                throw Error("duplicate vocabulary term: " + m_terms[i]);
            }
            m_index.emplace(m_terms[i], static_cast<TermId>(i));
        }
    }

    [[nodiscard]] std::size_t size() const { return m_terms.size(); }
    [[nodiscard]] std::vector<std::string> const& terms() const { return m_terms; }
    [[nodiscard]] std::string const& term(TermId id) const { return m_terms.at(id); }

    [[nodiscard]] std::optional<TermId> find(std::string_view term) const {
        auto it = m_index.find(std::string(term));
        if (it == m_index.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    [[nodiscard]] TermId id(std::string_view term) const {
        auto found = find(term);
        if (!found) {
            throw Error("term not in vocabulary: " + std::string(term));
        }
        return *found;
    }

    /// 128-bit FNV-1a over the newline-terminated term list.
    [[nodiscard]] Fingerprint fingerprint() const {
        using u128 = unsigned __int128;
        constexpr u128 prime = (u128{0x0000000001000000ULL} << 64) | 0x000000000000013BULL;
        u128 h = (u128{0x6c62272e07bb0142ULL} << 64) | 0x62b821756295c58dULL;
        auto mix = [&](unsigned char c) {
            h ^= c;
            h *= prime;
        };
        for (auto const& t : m_terms) {
            for (char c : t) {
                mix(static_cast<unsigned char>(c));
            }
            mix('\n');
        }
        Fingerprint fp{};
        for (int i = 0; i < 16; ++i) {
            fp[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(h >> (8 * i));
        }
        return fp;
    }

    bool operator==(Vocabulary const& other) const { return m_terms == other.m_terms; }

  private:
    std::vector<std::string> m_terms;
    std::unordered_map<std::string, TermId> m_index;
};

inline Corpus parse_corpus(std::istream& in, std::string const& origin = "<stream>") {
    Corpus corpus;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        auto where = origin + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (nlohmann::json::exception const& e) {
            throw Error(where + ": malformed record: " + e.what());
        }
        auto str = [&](char const* key, bool required) -> std::optional<std::string> {
            auto it = j.find(key);
            if (it == j.end() || it->is_null()) {
                if (required) {
                    throw Error(where + ": missing key '" + key + "'");
                }
                return std::nullopt;
            }
            if (!it->is_string()) {
                throw Error(where + ": key '" + key + "' must be a string");
            }
            return it->get<std::string>();
        };
        if (!j.is_object()) {
            throw Error(where + ": malformed record: not a JSON object");
        }
        AppRecord rec;
        rec.app_id = *str("id", true);
        rec.title = str("title", false).value_or("");
        rec.description_raw = *str("description", true);
        rec.category = *str("category", true);
        rec.package = str("package", false);
        if (rec.category.empty()) {
            throw Error(where + ": empty category");
        }
        if (!seen.insert(rec.app_id).second) {
            throw Error(where + ": duplicate app id '" + rec.app_id + "'");
        }
        rec.description_tokens = tokenize(rec.description_raw);
        corpus.records.push_back(std::move(rec));
    }
    if (corpus.records.empty()) {
        throw Error(origin + ": corpus is empty");
    }
    return corpus;
}

inline Corpus load_corpus(std::filesystem::path const& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open corpus " + path.string());
    }
    return parse_corpus(in, path.string());
}

inline nlohmann::json record_to_json(AppRecord const& r) {
    nlohmann::json j = {{"id", r.app_id},
                        {"title", r.title},
                        {"description", r.description_raw},
                        {"category", r.category}};
    if (r.package) {
        j["package"] = *r.package;
    }
    return j;
}

inline Vocabulary build_vocabulary(Corpus const& corpus) {
    std::set<std::string> terms;
    for (auto const& r : corpus.records) {
        terms.insert(r.description_tokens.begin(), r.description_tokens.end());
    }
    if (terms.empty()) {
        throw Error("corpus contains no tokens; cannot build a vocabulary");
    }
    return Vocabulary(std::vector<std::string>(terms.begin(), terms.end()));
}

inline std::vector<QueryJudgment> parse_judgments(std::istream& in,
                                                  std::string const& origin = "<stream>",
                                                  Corpus const* corpus = nullptr) {
    std::unordered_set<std::string> known;
    if (corpus) {
        for (auto const& r : corpus->records) {
            known.insert(r.app_id);
        }
    }
    std::vector<QueryJudgment> out;
    std::set<std::pair<std::string, std::string>> pairs;
    std::size_t unknown = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto where = origin + ":" + std::to_string(lineno);
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            auto tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) {
                break;
            }
            start = tab + 1;
        }
        if (cols.size() != 4) {
            throw Error(where + ": expected 4 tab-separated columns, got " +
                        std::to_string(cols.size()));
        }
        QueryJudgment qj{cols[0], cols[1], cols[2], 0.0};
        char const* first = cols[3].data();
        char const* last = first + cols[3].size();
        auto [ptr, ec] = std::from_chars(first, last, qj.relevance);
        if (ec != std::errc{} || ptr != last) {
            throw Error(where + ": bad relevance '" + cols[3] + "'");
        }
        if (!(qj.relevance >= 0.0 && qj.relevance <= 2.0)) {
            throw Error(where + ": relevance " + cols[3] + " outside [0, 2]");
        }
        if (!pairs.emplace(qj.query_id, qj.app_id).second) {
            throw Error(where + ": duplicate judgment for (" + qj.query_id + ", " + qj.app_id +
                        ")");
        }
        if (corpus && !known.contains(qj.app_id)) {
            ++unknown;
        }
        out.push_back(std::move(qj));
    }
    if (unknown > 0) {
        warn(origin + ": " + std::to_string(unknown) + " judgment(s) reference unknown app ids");
    }
    return out;
}

inline std::vector<QueryJudgment> load_judgments(std::filesystem::path const& path,
                                                 Corpus const* corpus = nullptr) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open judgments " + path.string());
    }
    return parse_judgments(in, path.string(), corpus);
}

inline void save_vocabulary(Vocabulary const& vocab, std::filesystem::path const& path) {
    std::string text;
    for (auto const& t : vocab.terms()) {
        text += t;
        text += '\n';
    }
    io::atomic_write(path, text);
}

inline Vocabulary load_vocabulary(std::filesystem::path const& path) {
    std::istringstream in(io::read_text(path));
    std::vector<std::string> terms;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            terms.push_back(line);
        }
    }
    if (!std::is_sorted(terms.begin(), terms.end())) {
        throw Error(path.string() + ": vocabulary file is not sorted");
    }
    return Vocabulary(std::move(terms));
}

}  // namespace relemb

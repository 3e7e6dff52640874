#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "binary_io.hpp"
#include "corpus.hpp"
#include "error.hpp"

namespace relemb::synth {

/// Topic-structured corpus. Topic vocabularies are consecutive windows on one
/// global word list, so topic i shares exactly `overlap_words()` words with
/// topic i+1 and nothing with any other topic.
struct SyntheticSpec {
    std::size_t topics = 3;
    std::size_t docs_per_topic = 60;
    std::size_t vocab_per_topic = 40;
    double overlap = 0.1;
    std::uint64_t seed = 42;
    std::size_t min_doc_len = 8;
    std::size_t max_doc_len = 16;
    std::size_t query_len = 2;

    [[nodiscard]] std::size_t overlap_words() const {
        return static_cast<std::size_t>(std::lround(overlap * static_cast<double>(vocab_per_topic)));
    }
    [[nodiscard]] std::size_t stride() const { return vocab_per_topic - overlap_words(); }
};

inline void validate(SyntheticSpec const& s) {
    if (s.topics == 0 || s.docs_per_topic == 0 || s.vocab_per_topic < 2 || s.min_doc_len == 0 ||
        s.max_doc_len < s.min_doc_len || s.query_len == 0) {
        throw Error("invalid synthetic settings: counts must be positive");
    }
    if (!(s.overlap >= 0.0 && s.overlap < 0.5)) {
        throw Error("invalid synthetic settings: overlap must be in [0, 0.5)");
    }
    if (s.query_len > s.vocab_per_topic - 2 * s.overlap_words()) {
        throw Error("invalid synthetic settings: not enough topic-exclusive words for the query");
    }
}

/// Alphabetic name for global word `g` ("wa", "wb", ... then longer).
inline std::string word_name(std::size_t g) {
    std::string suffix;
    do {
        suffix.insert(suffix.begin(), static_cast<char>('a' + g % 26));
        g /= 26;
    } while (g > 0);
    return "w" + suffix;
}

inline std::string topic_name(std::size_t t) { return "topic" + word_name(t).substr(1); }

/// Global word ids of topic `t` (shared words included).
inline std::vector<std::size_t> topic_words(SyntheticSpec const& s, std::size_t t) {
    std::vector<std::size_t> out(s.vocab_per_topic);
    for (std::size_t i = 0; i < s.vocab_per_topic; ++i) {
        out[i] = t * s.stride() + i;
    }
    return out;
}

/// Words of topic `t` that no other topic uses.
inline std::vector<std::size_t> exclusive_words(SyntheticSpec const& s, std::size_t t) {
    auto ov = s.overlap_words();
    std::size_t lo = t > 0 ? ov : 0;
    std::size_t hi = s.vocab_per_topic - (t + 1 < s.topics ? ov : 0);
    std::vector<std::size_t> out;
    for (std::size_t i = lo; i < hi; ++i) {
        out.push_back(t * s.stride() + i);
    }
    return out;
}

struct SyntheticData {
    Corpus corpus;
    std::vector<QueryJudgment> judgments;
    std::vector<std::size_t> doc_topic;
};

inline SyntheticData generate_synthetic(SyntheticSpec const& s) {
    validate(s);
    std::mt19937_64 rng(s.seed);
    SyntheticData out;
    std::uniform_int_distribution<std::size_t> len_dist(s.min_doc_len, s.max_doc_len);
    std::uniform_int_distribution<std::size_t> word_dist(0, s.vocab_per_topic - 1);
    for (std::size_t t = 0; t < s.topics; ++t) {
        auto words = topic_words(s, t);
        for (std::size_t d = 0; d < s.docs_per_topic; ++d) {
            AppRecord rec;
            rec.app_id = "app-" + std::to_string(t) + "-" + std::to_string(d);
            rec.title = topic_name(t) + " app " + std::to_string(d);
            rec.category = topic_name(t);
            std::size_t len = len_dist(rng);
            for (std::size_t i = 0; i < len; ++i) {
                if (i > 0) {
                    rec.description_raw += ' ';
                }
                rec.description_raw += word_name(words[word_dist(rng)]);
            }
            rec.description_tokens = tokenize(rec.description_raw);
            out.corpus.records.push_back(std::move(rec));
            out.doc_topic.push_back(t);
        }
    }
    bool shares = s.overlap_words() > 0;
    for (std::size_t t = 0; t < s.topics; ++t) {
        auto pool = exclusive_words(s, t);
        std::shuffle(pool.begin(), pool.end(), rng);
        std::string text;
        for (std::size_t i = 0; i < s.query_len; ++i) {
            text += (i ? " " : "") + word_name(pool[i]);
        }
        for (std::size_t d = 0; d < out.corpus.total_docs(); ++d) {
            auto dt = out.doc_topic[d];
            double rel = dt == t ? 2.0 : (shares && (dt + 1 == t || t + 1 == dt)) ? 1.0 : 0.0;
            out.judgments.push_back(
                {"q" + std::to_string(t), text, out.corpus.records[d].app_id, rel});
        }
    }
    return out;
}

inline std::string corpus_jsonl(Corpus const& corpus) {
    std::string text;
    for (auto const& r : corpus.records) {
        text += record_to_json(r).dump();
        text += '\n';
    }
    return text;
}

inline std::string judgments_tsv(std::vector<QueryJudgment> const& js) {
    std::string text;
    char buf[32];
    for (auto const& j : js) {
        std::snprintf(buf, sizeof buf, "%g", j.relevance);
        text += j.query_id + '\t' + j.query_text + '\t' + j.app_id + '\t' + buf + '\n';
    }
    return text;
}

inline void write_synthetic(SyntheticData const& data, std::filesystem::path const& corpus_path,
                            std::filesystem::path const& judgments_path) {
    io::atomic_write(corpus_path, corpus_jsonl(data.corpus));
    io::atomic_write(judgments_path, judgments_tsv(data.judgments));
}

}  // namespace relemb::synth

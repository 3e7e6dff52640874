#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "error.hpp"

namespace relemb {

enum class EmbeddingKind { WordEmb, WordEmbAE, RelEmb, RelEmbAE, SVD, PCA };

inline std::string to_string(EmbeddingKind k) {
    switch (k) {
        case EmbeddingKind::WordEmb: return "WordEmb";
        case EmbeddingKind::WordEmbAE: return "WordEmbAE";
        case EmbeddingKind::RelEmb: return "RelEmb";
        case EmbeddingKind::RelEmbAE: return "RelEmbAE";
        case EmbeddingKind::SVD: return "SVD";
        case EmbeddingKind::PCA: return "PCA";
    }
    return "?";
}

/// Dense row-major V x d matrix of f32 values with cached row norms.
class EmbeddingMatrix {
  public:
    EmbeddingMatrix() = default;

    EmbeddingMatrix(std::size_t rows, std::size_t cols, EmbeddingKind kind,
                    Fingerprint vocab_fp = {})
        : m_rows(rows), m_cols(cols), m_data(rows * cols, 0.0F), m_norms(rows, 0.0),
          m_kind(kind), m_fp(vocab_fp) {}

    EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> data,
                    EmbeddingKind kind, Fingerprint vocab_fp = {})
        : m_rows(rows), m_cols(cols), m_data(std::move(data)), m_norms(rows, 0.0),
          m_kind(kind), m_fp(vocab_fp) {
        if (m_data.size() != rows * cols) {
            throw Error("embedding data size does not match shape");
        }
        for (std::size_t i = 0; i < rows; ++i) {
            refresh_norm(i);
        }
    }

    [[nodiscard]] std::size_t rows() const { return m_rows; }
    [[nodiscard]] std::size_t cols() const { return m_cols; }
    [[nodiscard]] EmbeddingKind kind() const { return m_kind; }
    [[nodiscard]] Fingerprint const& vocab_fingerprint() const { return m_fp; }
    [[nodiscard]] std::span<float const> data() const { return m_data; }

    [[nodiscard]] std::span<float const> row(std::size_t i) const {
        return std::span<float const>(m_data).subspan(i * m_cols, m_cols);
    }

    [[nodiscard]] double norm(std::size_t i) const { return m_norms.at(i); }

    template <typename Range>
    void set_row(std::size_t i, Range const& values) {
        if (i >= m_rows || std::size(values) != m_cols) {
            throw Error("set_row: shape mismatch");
        }
        std::size_t j = 0;
        for (auto v : values) {
            m_data[i * m_cols + j++] = static_cast<float>(v);
        }
        refresh_norm(i);
    }

    bool operator==(EmbeddingMatrix const& o) const {
        return m_rows == o.m_rows && m_cols == o.m_cols && m_data == o.m_data && m_fp == o.m_fp;
    }

  private:
    void refresh_norm(std::size_t i) {
        double s = 0.0;
        for (float v : row(i)) {
            s += static_cast<double>(v) * static_cast<double>(v);
        }
        m_norms[i] = std::sqrt(s);
    }

    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<float> m_data;
    std::vector<double> m_norms;
    EmbeddingKind m_kind = EmbeddingKind::WordEmb;
    Fingerprint m_fp{};
};

template <typename A, typename B>
double dot(A const& a, B const& b) {
    double s = 0.0;
    auto ib = std::begin(b);
    for (auto x : a) {
        s += static_cast<double>(x) * static_cast<double>(*ib++);
    }
    return s;
}

/// Cosine of two dense vectors; 0 when either is the zero vector.
template <typename A, typename B>
double cosine_similarity(A const& a, B const& b) {
    double na = std::sqrt(dot(a, a));
    double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot(a, b) / (na * nb);
}

// "RELEMB01", u32 rows, u32 cols, f32 data[rows*cols] row-major, 16-byte fingerprint.
inline void save_embedding(EmbeddingMatrix const& m, std::filesystem::path const& path) {
    io::BinaryWriter w(path);
    w.put_bytes("RELEMB01");
    w.put(static_cast<std::uint32_t>(m.rows()));
    w.put(static_cast<std::uint32_t>(m.cols()));
    w.put_array(m.data());
    w.put_fingerprint(m.vocab_fingerprint());
    w.commit();
}

inline EmbeddingMatrix load_embedding(std::filesystem::path const& path, EmbeddingKind kind) {
    io::BinaryReader r(path);
    r.expect_magic("RELEMB01");
    auto rows = r.get<std::uint32_t>();
    auto cols = r.get<std::uint32_t>();
    auto data = r.get_array<float>(std::size_t{rows} * cols);
    auto fp = r.get_fingerprint();
    r.expect_end();
    return EmbeddingMatrix(rows, cols, std::move(data), kind, fp);
}

/// Throws unless `actual` matches `expected`; `what` names the artifact.
inline void require_fingerprint(Fingerprint const& actual, Fingerprint const& expected,
                                std::string const& what) {
    if (actual != expected) {
        throw Error(what + " was built against a different vocabulary (fingerprint mismatch)");
    }
}

}  // namespace relemb

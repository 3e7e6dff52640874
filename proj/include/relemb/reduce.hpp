#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/Sparse>

#include "embedding.hpp"
#include "error.hpp"
#include "reprs.hpp"

namespace relemb::reduce {

struct ReduceConfig {
    std::size_t target_dim = 300;
    std::size_t oversampling = 8;
    std::size_t power_iterations = 4;
    std::uint64_t seed = 42;
};

struct Decomposition {
    Eigen::MatrixXd scores;            // rows x d, equal to U_d * Sigma_d
    Eigen::VectorXd singular_values;   // non-increasing, length d
    Eigen::MatrixXd components;        // cols x d, orthonormal columns (right singular vectors)
    Eigen::VectorXd explained_variance;  // sigma^2 / (rows - 1); PCA only
};

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline SparseRowMatrix to_sparse(WordReprMatrix const& m) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(m.nnz());
    for (std::size_t i = 0; i < m.num_rows(); ++i) {
        auto const& r = m.rows[i];
        for (std::size_t k = 0; k < r.nnz(); ++k) {
            trips.emplace_back(static_cast<int>(i), static_cast<int>(r.indices[k]), r.values[k]);
        }
    }
    SparseRowMatrix a(static_cast<Eigen::Index>(m.num_rows()), static_cast<Eigen::Index>(m.cols));
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

/// Linear operator view of A, optionally with its column means subtracted
/// implicitly (A - 1 mu^T) so that centering never densifies the matrix.
template <typename Mat>
class Operator {
  public:
    explicit Operator(Mat const& a) : m_a(a) {}
    Operator(Mat const& a, Eigen::VectorXd mean) : m_a(a), m_mean(std::move(mean)) {}

    [[nodiscard]] Eigen::Index rows() const { return m_a.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return m_a.cols(); }

    [[nodiscard]] Eigen::MatrixXd apply(Eigen::MatrixXd const& x) const {
        Eigen::MatrixXd y = m_a * x;
        if (m_mean.size() > 0) {
            y.rowwise() -= (m_mean.transpose() * x);
        }
        return y;
    }

    [[nodiscard]] Eigen::MatrixXd apply_transpose(Eigen::MatrixXd const& y) const {
        Eigen::MatrixXd x = m_a.transpose() * y;
        if (m_mean.size() > 0) {
            x -= m_mean * y.colwise().sum();
        }
        return x;
    }

  private:
    Mat const& m_a;
    Eigen::VectorXd m_mean;
};

inline Eigen::MatrixXd orthonormal_basis(Eigen::MatrixXd const& y) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

/// Randomized range finder + power iterations, then an exact SVD of the
/// projected (d + oversampling) x cols matrix.
template <typename Mat>
Decomposition randomized_svd(Operator<Mat> const& op, ReduceConfig const& config) {
    auto const m = op.rows();
    auto const n = op.cols();
    auto const d = static_cast<Eigen::Index>(config.target_dim);
    auto const l = static_cast<Eigen::Index>(config.target_dim + config.oversampling);
    if (d < 1) {
        throw Error("target dimension must be >= 1");
    }
    if (l > std::min(m, n)) {
        throw Error("target_dim + oversampling (" + std::to_string(l) +
                    ") exceeds the smaller matrix dimension (" +
                    std::to_string(std::min(m, n)) + ")");
    }
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd omega(n, l);
    for (Eigen::Index j = 0; j < l; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            omega(i, j) = gauss(rng);
        }
    }
    Eigen::MatrixXd q = orthonormal_basis(op.apply(omega));
    for (std::size_t it = 0; it < config.power_iterations; ++it) {
        Eigen::MatrixXd z = orthonormal_basis(op.apply_transpose(q));
        q = orthonormal_basis(op.apply(z));
    }
    // B^T = A^T Q is cols x l; its thin SVD gives B = V' S U'^T.
    Eigen::MatrixXd bt = op.apply_transpose(q);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(bt, Eigen::ComputeThinU | Eigen::ComputeThinV);

    Decomposition out;
    out.singular_values = svd.singularValues().head(d);
    out.components = svd.matrixU().leftCols(d);
    Eigen::MatrixXd u = q * svd.matrixV().leftCols(d);
    // Deterministic sign: the largest-magnitude entry of each component is positive.
    for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::Index arg = 0;
        out.components.col(j).cwiseAbs().maxCoeff(&arg);
        if (out.components(arg, j) < 0.0) {
            out.components.col(j) *= -1.0;
            u.col(j) *= -1.0;
        }
    }
    out.scores = u * out.singular_values.asDiagonal();
    return out;
}

inline EmbeddingMatrix to_embedding(Eigen::MatrixXd const& scores, EmbeddingKind kind,
                                    Fingerprint const& fp) {
    EmbeddingMatrix e(static_cast<std::size_t>(scores.rows()),
                      static_cast<std::size_t>(scores.cols()), kind, fp);
    std::vector<double> row(static_cast<std::size_t>(scores.cols()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        for (Eigen::Index j = 0; j < scores.cols(); ++j) {
            row[static_cast<std::size_t>(j)] = scores(i, j);
        }
        e.set_row(static_cast<std::size_t>(i), row);
    }
    return e;
}

template <typename Mat>
Decomposition truncated_svd(Mat const& a, ReduceConfig const& config) {
    if (a.rows() == 0 || a.cols() == 0) {
        throw Error("truncated_svd: empty matrix");
    }
    return randomized_svd(Operator<Mat>(a), config);
}

template <typename Mat>
Eigen::VectorXd column_means(Mat const& a) {
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(a.rows());
    return (a.transpose() * ones) / static_cast<double>(a.rows());
}

/// PCA via the truncated SVD of the implicitly centered matrix.
template <typename Mat>
Decomposition pca(Mat const& a, ReduceConfig const& config) {
    if (a.rows() < 2) {
        throw Error("pca: need at least two rows");
    }
    auto out = randomized_svd(Operator<Mat>(a, column_means(a)), config);
    out.explained_variance =
        out.singular_values.array().square() / static_cast<double>(a.rows() - 1);
    return out;
}

inline EmbeddingMatrix truncated_svd(WordReprMatrix const& m, ReduceConfig const& config) {
    if (m.num_rows() == 0) {
        throw Error("truncated_svd: empty representation matrix");
    }
    auto a = to_sparse(m);
    return to_embedding(truncated_svd(a, config).scores, EmbeddingKind::SVD, m.vocab_fingerprint);
}

inline EmbeddingMatrix pca(WordReprMatrix const& m, ReduceConfig const& config) {
    auto a = to_sparse(m);
    return to_embedding(pca(a, config).scores, EmbeddingKind::PCA, m.vocab_fingerprint);
}

}  // namespace relemb::reduce

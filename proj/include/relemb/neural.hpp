#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "embedding.hpp"
#include "error.hpp"
#include "matrix.hpp"
#include "reprs.hpp"
#include "sparse.hpp"

namespace relemb::nn {

using relemb::Matrix;

struct TrainConfig {
    std::size_t hidden = 300;
    double learning_rate = 1e-3;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    std::uint64_t seed = 42;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Half-width of the uniform init; unset means sqrt(6 / (fan_in + fan_out)).
    std::optional<double> init_scale;
};

inline void validate(TrainConfig const& c) {
    if (c.hidden == 0 || c.epochs == 0 || c.batch_size == 0 || !(c.learning_rate > 0.0) ||
        !(c.beta1 > 0.0 && c.beta1 < 1.0) || !(c.beta2 > 0.0 && c.beta2 < 1.0) ||
        !(c.epsilon > 0.0) || (c.init_scale && !(*c.init_scale > 0.0))) {
        throw Error("invalid training configuration: all hyperparameters must be positive");
    }
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(std::span<double> params, std::span<double const> grads, AdamState& state,
                      TrainConfig const& config) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size()) {
        throw Error("adam_step: shape mismatch");
    }
    state.t += 1;
    double const b1 = config.beta1;
    double const b2 = config.beta2;
    double const corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    double const corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        double m_hat = state.m[i] / corr1;
        double v_hat = state.v[i] / corr2;
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

inline double glorot_scale(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline void uniform_fill(std::span<double> xs, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& x : xs) {
        x = dist(rng);
    }
}

/// In-place softmax with max subtraction.
inline void softmax(std::span<double> z) {
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& x : z) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (auto& x : z) {
        x /= sum;
    }
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// 1 - cos(pred, target).
inline double cosine_distance(std::span<double const> pred, std::span<double const> target) {
    if (pred.size() != target.size()) {
        throw Error("cosine_distance: length mismatch");
    }
    double pn = std::sqrt(dot(pred, pred));
    double tn = std::sqrt(dot(target, target));
    if (pn == 0.0 || tn == 0.0) {
        throw Error("cosine_distance: zero-norm argument");
    }
    return 1.0 - dot(pred, target) / (pn * tn);
}

inline double cosine_distance(std::span<double const> pred, SparseVector const& target) {
    double pn = std::sqrt(dot(pred, pred));
    double tn = target.norm();
    if (pn == 0.0 || tn == 0.0) {
        throw Error("cosine_distance: zero-norm argument");
    }
    double pt = 0.0;
    for (std::size_t k = 0; k < target.nnz(); ++k) {
        pt += pred[target.indices[k]] * target.values[k];
    }
    return 1.0 - pt / (pn * tn);
}

// ---------------------------------------------------------------------------
// Relevance encoder: one-hot(term) -> ReLU(W1 row) -> softmax(h W2 + bias).

struct EncoderModel {
    std::size_t n = 0;  // vocabulary size
    std::size_t d = 0;  // hidden width
    Matrix w1;          // n x d
    Matrix w2;          // d x n
    std::vector<double> bias;

    EncoderModel() = default;
    EncoderModel(std::size_t vocab, std::size_t hidden)
        : n(vocab), d(hidden), w1(vocab, hidden), w2(hidden, vocab), bias(vocab, 0.0) {}

    static EncoderModel initialized(std::size_t vocab, std::size_t hidden, TrainConfig const& c,
                                    std::mt19937_64& rng) {
        EncoderModel m(vocab, hidden);
        uniform_fill(m.w1.data, c.init_scale.value_or(glorot_scale(vocab, hidden)), rng);
        uniform_fill(m.w2.data, c.init_scale.value_or(glorot_scale(hidden, vocab)), rng);
        return m;
    }
};

struct EncoderForward {
    std::vector<double> hidden;
    std::vector<double> output;
};

inline EncoderForward forward(EncoderModel const& model, std::size_t term) {
    if (term >= model.n) {
        throw Error("forward: term id out of range");
    }
    EncoderForward f;
    f.hidden.resize(model.d);
    auto w1row = model.w1.row(term);
    for (std::size_t k = 0; k < model.d; ++k) {
        f.hidden[k] = relu(w1row[k]);
    }
    f.output = model.bias;
    for (std::size_t k = 0; k < model.d; ++k) {
        double hk = f.hidden[k];
        if (hk == 0.0) {
            continue;
        }
        auto w2row = model.w2.row(k);
        for (std::size_t i = 0; i < model.n; ++i) {
            f.output[i] += hk * w2row[i];
        }
    }
    softmax(f.output);
    return f;
}

/// Gradient accumulator shaped like EncoderModel.
struct EncoderGrads {
    Matrix w1;
    Matrix w2;
    std::vector<double> bias;

    explicit EncoderGrads(EncoderModel const& m) : w1(m.n, m.d), w2(m.d, m.n), bias(m.n, 0.0) {}

    void zero() {
        w1.zero();
        w2.zero();
        std::fill(bias.begin(), bias.end(), 0.0);
    }
};

/// Adds `scale` times the gradient of cosine_distance(forward(term).output,
/// target) into `grads`; returns the loss.
///
/// With p = softmax(z), c = 1/(|p||y|) and s = (p.y)/|p|^2 the loss gradient
/// w.r.t. p is g = c (s p - y), and w.r.t. the logits p * (g - p.g).
inline double accumulate_encoder_grad(EncoderModel const& model, std::size_t term,
                                      SparseVector const& target, EncoderGrads& grads,
                                      double scale = 1.0) {
    auto f = forward(model, term);
    auto const& p = f.output;
    double pn2 = dot(p, p);
    double yn = target.norm();
    if (yn == 0.0) {
        throw Error("encoder gradient: zero target");
    }
    double py = 0.0;
    for (std::size_t k = 0; k < target.nnz(); ++k) {
        py += p[target.indices[k]] * target.values[k];
    }
    double pn = std::sqrt(pn2);
    double loss = 1.0 - py / (pn * yn);
    double c = 1.0 / (pn * yn);
    double s = py / pn2;

    std::vector<double> delta(model.n);
    for (std::size_t i = 0; i < model.n; ++i) {
        delta[i] = c * s * p[i];
    }
    for (std::size_t k = 0; k < target.nnz(); ++k) {
        delta[target.indices[k]] -= c * target.values[k];
    }
    double pg = dot(p, delta);
    for (std::size_t i = 0; i < model.n; ++i) {
        delta[i] = p[i] * (delta[i] - pg);
    }

    for (std::size_t i = 0; i < model.n; ++i) {
        grads.bias[i] += scale * delta[i];
    }
    auto w1row = model.w1.row(term);
    auto g1row = grads.w1.row(term);
    for (std::size_t k = 0; k < model.d; ++k) {
        auto w2row = model.w2.row(k);
        double hk = f.hidden[k];
        if (hk != 0.0) {
            auto g2row = grads.w2.row(k);
            for (std::size_t i = 0; i < model.n; ++i) {
                g2row[i] += scale * hk * delta[i];
            }
        }
        if (w1row[k] > 0.0) {
            g1row[k] += scale * dot(w2row, delta);
        }
    }
    return loss;
}

inline EncoderGrads backward(EncoderModel const& model, std::size_t term,
                             SparseVector const& target) {
    EncoderGrads g(model);
    accumulate_encoder_grad(model, term, target, g);
    return g;
}

inline double encoder_loss(EncoderModel const& model, std::size_t term,
                           SparseVector const& target) {
    return cosine_distance(forward(model, term).output, target);
}

// ---------------------------------------------------------------------------
// Vanilla autoencoder: x -> ReLU(x E + be) -> h D + bd, mean squared error.

struct AutoencoderModel {
    std::size_t n = 0;
    std::size_t d = 0;
    Matrix enc;  // n x d
    std::vector<double> enc_bias;
    Matrix dec;  // d x n
    std::vector<double> dec_bias;

    AutoencoderModel() = default;
    AutoencoderModel(std::size_t vocab, std::size_t hidden)
        : n(vocab), d(hidden), enc(vocab, hidden), enc_bias(hidden, 0.0), dec(hidden, vocab),
          dec_bias(vocab, 0.0) {}

    static AutoencoderModel initialized(std::size_t vocab, std::size_t hidden,
                                        TrainConfig const& c, std::mt19937_64& rng) {
        AutoencoderModel m(vocab, hidden);
        uniform_fill(m.enc.data, c.init_scale.value_or(glorot_scale(vocab, hidden)), rng);
        uniform_fill(m.dec.data, c.init_scale.value_or(glorot_scale(hidden, vocab)), rng);
        return m;
    }
};

struct AutoencoderForward {
    std::vector<double> pre;
    std::vector<double> hidden;
    std::vector<double> output;
};

inline AutoencoderForward forward(AutoencoderModel const& model, SparseVector const& x) {
    AutoencoderForward f;
    f.pre = model.enc_bias;
    for (std::size_t k = 0; k < x.nnz(); ++k) {
        if (x.indices[k] >= model.n) {
            throw Error("autoencoder forward: input index out of range");
        }
        auto erow = model.enc.row(x.indices[k]);
        for (std::size_t j = 0; j < model.d; ++j) {
            f.pre[j] += x.values[k] * erow[j];
        }
    }
    f.hidden.resize(model.d);
    for (std::size_t j = 0; j < model.d; ++j) {
        f.hidden[j] = relu(f.pre[j]);
    }
    f.output = model.dec_bias;
    for (std::size_t j = 0; j < model.d; ++j) {
        double hj = f.hidden[j];
        if (hj == 0.0) {
            continue;
        }
        auto drow = model.dec.row(j);
        for (std::size_t i = 0; i < model.n; ++i) {
            f.output[i] += hj * drow[i];
        }
    }
    return f;
}

struct AutoencoderGrads {
    Matrix enc;
    std::vector<double> enc_bias;
    Matrix dec;
    std::vector<double> dec_bias;

    explicit AutoencoderGrads(AutoencoderModel const& m)
        : enc(m.n, m.d), enc_bias(m.d, 0.0), dec(m.d, m.n), dec_bias(m.n, 0.0) {}

    void zero() {
        enc.zero();
        dec.zero();
        std::fill(enc_bias.begin(), enc_bias.end(), 0.0);
        std::fill(dec_bias.begin(), dec_bias.end(), 0.0);
    }
};

inline double autoencoder_loss(AutoencoderModel const& model, SparseVector const& x) {
    auto f = forward(model, x);
    double s = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < model.n; ++i) {
        double xi = (k < x.nnz() && x.indices[k] == i) ? x.values[k++] : 0.0;
        double r = f.output[i] - xi;
        s += r * r;
    }
    return s / static_cast<double>(model.n);
}

/// Adds `scale` times the MSE reconstruction gradient for input `x`; returns the loss.
inline double accumulate_autoencoder_grad(AutoencoderModel const& model, SparseVector const& x,
                                          AutoencoderGrads& grads, double scale = 1.0) {
    auto f = forward(model, x);
    double const inv_n = 1.0 / static_cast<double>(model.n);
    std::vector<double> dr(model.n);
    double loss = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < model.n; ++i) {
        double xi = (k < x.nnz() && x.indices[k] == i) ? x.values[k++] : 0.0;
        double r = f.output[i] - xi;
        loss += r * r;
        dr[i] = 2.0 * r * inv_n;
    }
    loss *= inv_n;

    for (std::size_t i = 0; i < model.n; ++i) {
        grads.dec_bias[i] += scale * dr[i];
    }
    std::vector<double> da(model.d, 0.0);
    for (std::size_t j = 0; j < model.d; ++j) {
        auto drow = model.dec.row(j);
        double hj = f.hidden[j];
        if (hj != 0.0) {
            auto gdrow = grads.dec.row(j);
            for (std::size_t i = 0; i < model.n; ++i) {
                gdrow[i] += scale * hj * dr[i];
            }
        }
        if (f.pre[j] > 0.0) {
            da[j] = dot(drow, dr);
        }
    }
    for (std::size_t j = 0; j < model.d; ++j) {
        grads.enc_bias[j] += scale * da[j];
    }
    for (std::size_t q = 0; q < x.nnz(); ++q) {
        auto gerow = grads.enc.row(x.indices[q]);
        for (std::size_t j = 0; j < model.d; ++j) {
            gerow[j] += scale * x.values[q] * da[j];
        }
    }
    return loss;
}

inline AutoencoderGrads backward(AutoencoderModel const& model, SparseVector const& x) {
    AutoencoderGrads g(model);
    accumulate_autoencoder_grad(model, x, g);
    return g;
}

// ---------------------------------------------------------------------------
// Training.

struct LossPoint {
    std::size_t epoch;
    double mean_loss;
};

struct EncoderTrainResult {
    EncoderModel model;
    EmbeddingMatrix embedding;
    std::vector<LossPoint> loss_history;
};

struct AutoencoderTrainResult {
    AutoencoderModel model;
    EmbeddingMatrix embedding;
    std::vector<LossPoint> loss_history;
};

namespace detail {

inline std::vector<std::size_t> trainable_rows(WordReprMatrix const& reprs) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < reprs.num_rows(); ++i) {
        if (!reprs.rows[i].empty()) {
            rows.push_back(i);
        }
    }
    if (rows.empty()) {
        throw Error("cannot train: every word representation is zero");
    }
    return rows;
}

/// Shuffled minibatch loop shared by both trainers. `step(batch)` accumulates
/// gradients for the batch, applies the optimizer and returns the summed loss.
template <typename Step>
std::vector<LossPoint> run_epochs(std::vector<std::size_t> order, TrainConfig const& config,
                                  std::mt19937_64& rng, Step&& step) {
    std::vector<LossPoint> history;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            auto len = std::min(config.batch_size, order.size() - start);
            total += step(std::span<std::size_t const>(order).subspan(start, len));
        }
        history.push_back({e + 1, total / static_cast<double>(order.size())});
    }
    return history;
}

}  // namespace detail

inline EncoderTrainResult train_encoder(WordReprMatrix const& reprs, TrainConfig const& config) {
    validate(config);
    auto rows = detail::trainable_rows(reprs);
    std::size_t const n = reprs.num_rows();
    if (reprs.cols != n) {
        throw Error("train_encoder: representation matrix must be square (N x N)");
    }
    std::mt19937_64 rng(config.seed);
    auto model = EncoderModel::initialized(n, config.hidden, config, rng);
    EncoderGrads grads(model);
    AdamState s1(model.w1.data.size()), s2(model.w2.data.size()), sb(model.bias.size());

    auto history = detail::run_epochs(rows, config, rng, [&](std::span<std::size_t const> batch) {
        grads.zero();
        double scale = 1.0 / static_cast<double>(batch.size());
        double loss = 0.0;
        for (auto t : batch) {
            loss += accumulate_encoder_grad(model, t, reprs.rows[t], grads, scale);
        }
        adam_step(model.w1.data, grads.w1.data, s1, config);
        adam_step(model.w2.data, grads.w2.data, s2, config);
        adam_step(model.bias, grads.bias, sb, config);
        return loss;
    });

    EmbeddingMatrix emb(n, model.d, EmbeddingKind::WordEmb, reprs.vocab_fingerprint);
    std::vector<double> h(model.d);
    for (std::size_t j = 0; j < n; ++j) {
        auto w = model.w1.row(j);
        std::transform(w.begin(), w.end(), h.begin(), relu);
        emb.set_row(j, h);
    }
    return {std::move(model), std::move(emb), std::move(history)};
}

inline AutoencoderTrainResult train_autoencoder(WordReprMatrix const& reprs,
                                                TrainConfig const& config) {
    validate(config);
    auto rows = detail::trainable_rows(reprs);
    std::size_t const n = reprs.cols;
    std::mt19937_64 rng(config.seed);
    auto model = AutoencoderModel::initialized(n, config.hidden, config, rng);
    AutoencoderGrads grads(model);
    AdamState se(model.enc.data.size()), seb(model.enc_bias.size()), sd(model.dec.data.size()),
        sdb(model.dec_bias.size());

    auto history = detail::run_epochs(rows, config, rng, [&](std::span<std::size_t const> batch) {
        grads.zero();
        double scale = 1.0 / static_cast<double>(batch.size());
        double loss = 0.0;
        for (auto t : batch) {
            loss += accumulate_autoencoder_grad(model, reprs.rows[t], grads, scale);
        }
        adam_step(model.enc.data, grads.enc.data, se, config);
        adam_step(model.enc_bias, grads.enc_bias, seb, config);
        adam_step(model.dec.data, grads.dec.data, sd, config);
        adam_step(model.dec_bias, grads.dec_bias, sdb, config);
        return loss;
    });

    EmbeddingMatrix emb(reprs.num_rows(), model.d, EmbeddingKind::WordEmbAE,
                        reprs.vocab_fingerprint);
    for (std::size_t j = 0; j < reprs.num_rows(); ++j) {
        emb.set_row(j, forward(model, reprs.rows[j]).hidden);
    }
    return {std::move(model), std::move(emb), std::move(history)};
}

inline void save_loss_history(std::vector<LossPoint> const& history,
                              std::filesystem::path const& path) {
    std::string csv = "epoch,mean_loss\n";
    char buf[64];
    for (auto const& p : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", p.epoch, p.mean_loss);
        csv += buf;
    }
    io::atomic_write(path, csv);
}

// ---------------------------------------------------------------------------
// Finite-difference verification.

enum class ModelKind { Encoder, Autoencoder };

namespace detail {

inline double rel_error(double analytic, double numeric) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

/// Central difference of `loss()` w.r.t. `param`, restoring it afterwards.
template <typename Loss>
double central_difference(double& param, double h, Loss&& loss) {
    double saved = param;
    param = saved + h;
    double up = loss();
    param = saved - h;
    double down = loss();
    param = saved;
    return (up - down) / (2.0 * h);
}

inline SparseVector random_target(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> val(0.05, 2.0);
    std::bernoulli_distribution keep(0.4);
    SparseVector t;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep(rng)) {
            t.push_back(static_cast<std::uint32_t>(i), val(rng));
        }
    }
    if (t.empty()) {
        t.push_back(static_cast<std::uint32_t>(n / 2), val(rng));
    }
    return t;
}

}  // namespace detail

/// Largest relative error between analytic and central-difference gradients
/// over every parameter of `trials` random small models.
inline double gradient_check(ModelKind kind, std::size_t trials, std::uint64_t seed,
                             double h = 1e-5) {
    if (trials == 0) {
        warn("gradient_check called with zero trials");
        return 0.0;
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> n_dist(6, 20);
    std::uniform_int_distribution<std::size_t> d_dist(2, 6);
    TrainConfig cfg;
    cfg.init_scale = 1.0;
    double worst = 0.0;
    auto check = [&](std::span<double> params, std::span<double const> analytic, auto&& loss) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            double numeric = detail::central_difference(params[i], h, loss);
            worst = std::max(worst, detail::rel_error(analytic[i], numeric));
        }
    };
    for (std::size_t trial = 0; trial < trials; ++trial) {
        std::size_t n = n_dist(rng);
        std::size_t d = d_dist(rng);
        auto target = detail::random_target(n, rng);
        if (kind == ModelKind::Encoder) {
            auto model = EncoderModel::initialized(n, d, cfg, rng);
            uniform_fill(model.bias, 0.5, rng);
            std::size_t term = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
            auto g = backward(model, term, target);
            auto loss = [&] { return encoder_loss(model, term, target); };
            check(model.w1.data, g.w1.data, loss);
            check(model.w2.data, g.w2.data, loss);
            check(model.bias, g.bias, loss);
        } else {
            auto model = AutoencoderModel::initialized(n, d, cfg, rng);
            uniform_fill(model.enc_bias, 0.5, rng);
            uniform_fill(model.dec_bias, 0.5, rng);
            auto g = backward(model, target);
            auto loss = [&] { return autoencoder_loss(model, target); };
            check(model.enc.data, g.enc.data, loss);
            check(model.enc_bias, g.enc_bias, loss);
            check(model.dec.data, g.dec.data, loss);
            check(model.dec_bias, g.dec_bias, loss);
        }
    }
    return worst;
}

}  // namespace relemb::nn

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include <relemb/neural.hpp>

#include "support.hpp"

using namespace relemb;
using namespace relemb::nn;

namespace {

WordReprMatrix tiny_reprs() {
    auto c = fixtures::tiny_corpus();
    auto v = build_vocabulary(c);
    return build_all_reprs(build_index(c, v), {}, {});
}

std::vector<double> dense(SparseVector const& s, std::size_t n) {
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < s.nnz(); ++k) {
        out[s.indices[k]] = s.values[k];
    }
    return out;
}

/// Encoder loss written out directly: cosine distance between the softmax of
/// relu(W1[term]) W2 + bias and the dense target.
double reference_encoder_loss(EncoderModel const& m, std::size_t term, std::vector<double> const& y) {
    std::vector<double> z(m.n);
    for (std::size_t k = 0; k < m.n; ++k) {
        z[k] = m.bias[k];
        for (std::size_t j = 0; j < m.d; ++j) {
            z[k] += std::max(0.0, m.w1(term, j)) * m.w2(j, k);
        }
    }
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    double py = 0, pp = 0, yy = 0;
    for (std::size_t k = 0; k < m.n; ++k) {
        double p = z[k] / sum;
        py += p * y[k];
        pp += p * p;
        yy += y[k] * y[k];
    }
    return 1.0 - py / std::sqrt(pp * yy);
}

double reference_autoencoder_loss(AutoencoderModel const& m, std::vector<double> const& x) {
    std::vector<double> h(m.d);
    for (std::size_t j = 0; j < m.d; ++j) {
        double a = m.enc_bias[j];
        for (std::size_t i = 0; i < m.n; ++i) {
            a += x[i] * m.enc(i, j);
        }
        h[j] = std::max(0.0, a);
    }
    double loss = 0.0;
    for (std::size_t k = 0; k < m.n; ++k) {
        double r = m.dec_bias[k];
        for (std::size_t j = 0; j < m.d; ++j) {
            r += h[j] * m.dec(j, k);
        }
        loss += (r - x[k]) * (r - x[k]);
    }
    return loss / static_cast<double>(m.n);
}

double numeric(double& param, auto&& loss) {
    double saved = param;
    param = saved + 1e-5;
    double up = loss();
    param = saved - 1e-5;
    double down = loss();
    param = saved;
    return (up - down) / 2e-5;
}

double rel(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST(Softmax, SumsToOneAndPositive) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 30.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> z(1 + rng() % 50);
        for (auto& v : z) {
            v = g(rng);
        }
        softmax(z);
        EXPECT_NEAR(std::accumulate(z.begin(), z.end(), 0.0), 1.0, 1e-9);
        for (double v : z) {
            EXPECT_GT(v, 0.0);
        }
    }
    std::vector<double> big{1000.0, 1000.0};
    softmax(big);
    EXPECT_DOUBLE_EQ(big[0], 0.5);
}

TEST(CosineDistance, Fixtures) {
    std::vector<double> a{1.0, 2.0, 3.0}, b{-3.0, 0.0, 1.0};
    std::vector<double> neg{-1.0, -2.0, -3.0}, zero(3, 0.0);
    EXPECT_NEAR(cosine_distance(a, a), 0.0, 1e-15);
    EXPECT_NEAR(cosine_distance(a, b), 1.0, 1e-15);
    EXPECT_NEAR(cosine_distance(a, neg), 2.0, 1e-15);
    EXPECT_THROW(cosine_distance(a, zero), Error);
    EXPECT_THROW(cosine_distance(a, SparseVector{}), Error);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1), c(0.01, 100);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p(8), t(8);
        for (std::size_t i = 0; i < 8; ++i) {
            p[i] = u(rng);
            t[i] = u(rng);
        }
        auto scaled = t;
        double k = c(rng);
        for (auto& v : scaled) {
            v *= k;
        }
        EXPECT_NEAR(cosine_distance(p, t), cosine_distance(p, scaled), 1e-12);
        SparseVector st;
        for (std::uint32_t i = 0; i < 8; ++i) {
            st.push_back(i, t[i]);
        }
        EXPECT_NEAR(cosine_distance(p, t), cosine_distance(p, st), 1e-12);
    }
}

TEST(EncoderForward, ReluAndSoftmax) {
    EncoderModel m(5, 3);
    for (auto& v : m.w1.data) {
        v = -1.0;
    }
    m.w2.data.assign(m.w2.data.size(), 0.7);
    m.bias = {0.1, 0.2, 0.3, 0.4, 0.5};
    auto f = forward(m, 2);
    for (double h : f.hidden) {
        EXPECT_EQ(h, 0.0);
    }
    std::vector<double> expect = m.bias;
    softmax(expect);
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_NEAR(f.output[k], expect[k], 1e-15);
    }
    EncoderModel u(4, 2);
    for (double p : forward(u, 1).output) {
        EXPECT_DOUBLE_EQ(p, 0.25);
    }
    EXPECT_THROW(forward(u, 4), Error);
}

TEST(EncoderBackward, MatchesFiniteDifferencesOfReferenceLoss) {
    std::mt19937_64 rng(12);
    TrainConfig cfg;
    cfg.init_scale = 1.0;
    auto m = EncoderModel::initialized(12, 4, cfg, rng);
    uniform_fill(m.bias, 0.5, rng);
    SparseVector target;
    for (std::uint32_t i = 0; i < 12; i += 3) {
        target.push_back(i, 0.3 + 0.1 * i);
    }
    auto y = dense(target, 12);
    std::size_t term = 5;
    auto g = backward(m, term, target);
    EXPECT_NEAR(encoder_loss(m, term, target), reference_encoder_loss(m, term, y), 1e-12);
    auto loss = [&] { return reference_encoder_loss(m, term, y); };
    double worst = 0.0;
    for (std::size_t i = 0; i < m.w1.data.size(); ++i) {
        double n = numeric(m.w1.data[i], loss);
        worst = std::max(worst, rel(g.w1.data[i], n));
        if (i / m.d != term) {
            EXPECT_EQ(g.w1.data[i], 0.0);
        }
    }
    for (std::size_t i = 0; i < m.w2.data.size(); ++i) {
        worst = std::max(worst, rel(g.w2.data[i], numeric(m.w2.data[i], loss)));
    }
    for (std::size_t i = 0; i < m.bias.size(); ++i) {
        worst = std::max(worst, rel(g.bias[i], numeric(m.bias[i], loss)));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(EncoderBackward, TargetParallelToOutputHasZeroLogitGradient) {
    std::mt19937_64 rng(13);
    auto m = EncoderModel::initialized(9, 3, TrainConfig{}, rng);
    auto p = forward(m, 4).output;
    SparseVector target;
    for (std::uint32_t i = 0; i < 9; ++i) {
        target.push_back(i, 3.0 * p[i]);
    }
    auto g = backward(m, 4, target);
    for (double v : g.bias) {
        EXPECT_NEAR(v, 0.0, 1e-12);
    }
}

TEST(AutoencoderBackward, MatchesFiniteDifferencesOfReferenceLoss) {
    std::mt19937_64 rng(14);
    TrainConfig cfg;
    cfg.init_scale = 1.0;
    auto m = AutoencoderModel::initialized(10, 4, cfg, rng);
    uniform_fill(m.enc_bias, 0.5, rng);
    uniform_fill(m.dec_bias, 0.5, rng);
    SparseVector x;
    x.push_back(1, 0.8);
    x.push_back(4, 1.7);
    x.push_back(9, 0.2);
    auto xd = dense(x, 10);
    auto g = backward(m, x);
    EXPECT_NEAR(autoencoder_loss(m, x), reference_autoencoder_loss(m, xd), 1e-12);
    auto loss = [&] { return reference_autoencoder_loss(m, xd); };
    double worst = 0.0;
    auto sweep = [&](std::vector<double>& params, std::vector<double> const& grads) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            worst = std::max(worst, rel(grads[i], numeric(params[i], loss)));
        }
    };
    sweep(m.enc.data, g.enc.data);
    sweep(m.enc_bias, g.enc_bias);
    sweep(m.dec.data, g.dec.data);
    sweep(m.dec_bias, g.dec_bias);
    EXPECT_LT(worst, 1e-4);
    for (std::size_t i = 0; i < m.n; ++i) {
        if (x.at(static_cast<std::uint32_t>(i)) == 0.0) {
            for (std::size_t j = 0; j < m.d; ++j) {
                EXPECT_EQ(g.enc(i, j), 0.0);
            }
        }
    }
}

TEST(GradientCheck, BothModelsUnderTolerance) {
    EXPECT_LT(gradient_check(ModelKind::Encoder, 20, 7), 1e-4);
    EXPECT_LT(gradient_check(ModelKind::Autoencoder, 20, 7), 1e-4);
    EXPECT_EQ(gradient_check(ModelKind::Encoder, 0, 7), 0.0);
}

TEST(Adam, FirstStepAndZeroGradient) {
    TrainConfig cfg;
    std::vector<double> p{1.0, -2.0, 0.5};
    std::vector<double> g{0.3, -4.0, 1e-3};
    AdamState s(3);
    adam_step(p, g, s, cfg);
    EXPECT_EQ(s.t, 1u);
    EXPECT_NEAR(p[0], 1.0 - cfg.learning_rate * 0.3 / (0.3 + 1e-8), 1e-15);
    EXPECT_NEAR(p[1], -2.0 + cfg.learning_rate * 4.0 / (4.0 + 1e-8), 1e-15);
    EXPECT_NEAR(p[2], 0.5 - cfg.learning_rate * 1e-3 / (1e-3 + 1e-8), 1e-15);
    std::vector<double> q{1.0, 2.0};
    std::vector<double> zero{0.0, 0.0};
    AdamState z(2);
    for (int i = 0; i < 100; ++i) {
        adam_step(q, zero, z, cfg);
    }
    EXPECT_EQ(q[0], 1.0);
    EXPECT_EQ(q[1], 2.0);
    std::vector<double> bad(3);
    EXPECT_THROW(adam_step(q, bad, z, cfg), Error);
}

TEST(TrainConfig, RejectsNonPositive) {
    TrainConfig c;
    c.hidden = 0;
    EXPECT_THROW(validate(c), Error);
    c = TrainConfig{};
    c.learning_rate = -1.0;
    EXPECT_THROW(validate(c), Error);
    c = TrainConfig{};
    c.init_scale = 0.0;
    EXPECT_THROW(validate(c), Error);
}

TEST(TrainEncoder, TinyCorpusDefaults) {
    auto reprs = tiny_reprs();
    auto r = train_encoder(reprs, TrainConfig{});
    EXPECT_EQ(r.embedding.rows(), 7u);
    EXPECT_EQ(r.embedding.cols(), 300u);
    EXPECT_EQ(r.embedding.kind(), EmbeddingKind::WordEmb);
    ASSERT_EQ(r.loss_history.size(), 30u);
    for (std::size_t e = 1; e < r.loss_history.size(); ++e) {
        EXPECT_LE(r.loss_history[e].mean_loss, 1.05 * r.loss_history[e - 1].mean_loss);
    }
    EXPECT_LT(r.loss_history.back().mean_loss, r.loss_history.front().mean_loss);
    for (float v : r.embedding.data()) {
        EXPECT_GE(v, 0.0f);
    }
    for (std::size_t j = 0; j < 7; ++j) {
        auto w = r.model.w1.row(j);
        for (std::size_t k = 0; k < 300; ++k) {
            EXPECT_EQ(r.embedding.row(j)[k], static_cast<float>(relu(w[k])));
        }
    }
}

TEST(TrainEncoder, BitReproducible) {
    auto reprs = tiny_reprs();
    TrainConfig cfg;
    cfg.hidden = 16;
    auto a = train_encoder(reprs, cfg);
    auto b = train_encoder(reprs, cfg);
    EXPECT_EQ(a.model.w1.data, b.model.w1.data);
    EXPECT_EQ(a.model.w2.data, b.model.w2.data);
    EXPECT_TRUE(a.embedding == b.embedding);
    fixtures::TempDir dir;
    save_embedding(a.embedding, dir / "a.relemb");
    save_embedding(b.embedding, dir / "b.relemb");
    EXPECT_EQ(io::read_text(dir / "a.relemb"), io::read_text(dir / "b.relemb"));
    cfg.seed = 43;
    auto c = train_encoder(reprs, cfg);
    EXPECT_NE(a.model.w1.data, c.model.w1.data);
}

TEST(TrainEncoder, ZeroRowsSkippedButEmbedded) {
    auto reprs = tiny_reprs();
    reprs.rows[2] = SparseVector{};
    TrainConfig cfg;
    cfg.hidden = 8;
    cfg.epochs = 3;
    auto r = train_encoder(reprs, cfg);
    EXPECT_EQ(r.embedding.rows(), 7u);
    for (auto& row : reprs.rows) {
        row = SparseVector{};
    }
    EXPECT_THROW(train_encoder(reprs, cfg), Error);
}

TEST(TrainAutoencoder, TinyCorpusDefaults) {
    auto reprs = tiny_reprs();
    auto r = train_autoencoder(reprs, TrainConfig{});
    EXPECT_EQ(r.embedding.rows(), 7u);
    EXPECT_EQ(r.embedding.cols(), 300u);
    EXPECT_EQ(r.embedding.kind(), EmbeddingKind::WordEmbAE);
    for (std::size_t e = 1; e < r.loss_history.size(); ++e) {
        EXPECT_LE(r.loss_history[e].mean_loss, 1.05 * r.loss_history[e - 1].mean_loss);
    }
    EXPECT_LT(r.loss_history.back().mean_loss, r.loss_history.front().mean_loss);
    for (float v : r.embedding.data()) {
        EXPECT_GE(v, 0.0f);
    }
}

TEST(TrainAutoencoder, ZeroInputGivesReluOfBias) {
    auto reprs = tiny_reprs();
    reprs.rows[3] = SparseVector{};
    TrainConfig cfg;
    cfg.hidden = 6;
    cfg.epochs = 5;
    auto r = train_autoencoder(reprs, cfg);
    for (std::size_t j = 0; j < 6; ++j) {
        EXPECT_EQ(r.embedding.row(3)[j], static_cast<float>(relu(r.model.enc_bias[j])));
    }
}

TEST(LossHistory, CsvFormat) {
    fixtures::TempDir dir;
    save_loss_history({{1, 0.5}, {2, 0.25}}, dir / "loss.csv");
    EXPECT_EQ(io::read_text(dir / "loss.csv"), "epoch,mean_loss\n1,0.5\n2,0.25\n");
}

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "matrix.hpp"
#include "tasks.hpp"

namespace relemb::categorize {

using Label = int;
inline constexpr Label kNoise = -1;

struct LabeledDataset {
    Matrix features;  // M x d
    std::vector<Label> labels;
    std::vector<std::string> label_names;

    [[nodiscard]] std::size_t size() const { return labels.size(); }
    [[nodiscard]] std::size_t num_classes() const { return label_names.size(); }

    /// Rows `idx` as a new dataset sharing the label namespace.
    [[nodiscard]] LabeledDataset subset(std::span<std::size_t const> idx) const {
        LabeledDataset out;
        out.features = Matrix(idx.size(), features.cols);
        out.label_names = label_names;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::copy_n(features.row(idx[i]).begin(), features.cols, out.features.row(i).begin());
            out.labels.push_back(labels[idx[i]]);
        }
        return out;
    }
};

/// Optionally L2-normalized app embeddings labelled by category; label ids
/// follow the sorted category names.
inline LabeledDataset make_dataset(AppEmbeddingSet const& apps, Corpus const& corpus,
                                   bool l2_normalize = false) {
    if (apps.app_ids.size() != corpus.total_docs()) {
        throw Error("embedding set and corpus disagree on the number of apps");
    }
    std::map<std::string, Label> ids;
    for (auto const& r : corpus.records) {
        ids.emplace(r.category, 0);
    }
    LabeledDataset ds;
    for (auto& [name, id] : ids) {
        id = static_cast<Label>(ds.label_names.size());
        ds.label_names.push_back(name);
    }
    auto const& m = apps.matrix;
    ds.features = Matrix(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double scale = (l2_normalize && m.norm(i) > 0.0) ? 1.0 / m.norm(i) : 1.0;
        auto row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            ds.features(i, j) = static_cast<double>(row[j]) * scale;
        }
        ds.labels.push_back(ids.at(corpus.records[i].category));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Cross-validation folds.

struct FoldPlan {
    std::size_t k = 5;
    std::vector<std::size_t> assignments;
    std::uint64_t seed = 0;

    [[nodiscard]] std::vector<std::size_t> members(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i] == fold) {
                out.push_back(i);
            }
        }
        return out;
    }

    [[nodiscard]] std::vector<std::size_t> complement(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i] != fold) {
                out.push_back(i);
            }
        }
        return out;
    }
};

/// Seeded shuffle, then contiguous partition; the first M % k folds get one extra.
inline FoldPlan kfold_split(std::size_t m, std::size_t k, std::uint64_t seed) {
    if (k < 2) {
        throw Error("kfold_split: k must be >= 2");
    }
    if (m < k) {
        throw Error("kfold_split: fewer samples (" + std::to_string(m) + ") than folds (" +
                    std::to_string(k) + ")");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    FoldPlan plan{k, std::vector<std::size_t>(m), seed};
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        std::size_t size = m / k + (f < m % k ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i) {
            plan.assignments[order[pos++]] = f;
        }
    }
    return plan;
}

/// Stratified variant: samples grouped by label (shuffled within a label),
/// then dealt round-robin so fold sizes still differ by at most one.
inline FoldPlan kfold_split_stratified(std::span<Label const> labels, std::size_t k,
                                       std::uint64_t seed) {
    auto plan = kfold_split(labels.size(), k, seed);
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
    for (std::size_t i = 0; i < order.size(); ++i) {
        plan.assignments[order[i]] = i % k;
    }
    return plan;
}

// ---------------------------------------------------------------------------
// One-vs-rest linear SVM trained with Pegasos-style subgradient steps.

struct SvmParams {
    double lambda = 1e-3;
    std::size_t epochs = 20;
    std::uint64_t seed = 42;
};

struct LinearSvm {
    std::size_t dim = 0;
    /// Per class: dim weights followed by the weight of a constant bias feature.
    std::vector<std::vector<double>> weights;
    /// Features are standardized with training-set statistics before weighting.
    std::vector<double> center;
    std::vector<double> inv_scale;

    [[nodiscard]] double margin(std::size_t cls, std::span<double const> x) const {
        auto const& w = weights[cls];
        double s = w[dim];
        for (std::size_t j = 0; j < dim; ++j) {
            s += w[j] * (x[j] - center[j]) * inv_scale[j];
        }
        return s;
    }

    [[nodiscard]] Label predict(std::span<double const> x) const {
        Label best = 0;
        double best_m = margin(0, x);
        for (std::size_t c = 1; c < weights.size(); ++c) {
            double m = margin(c, x);
            if (m > best_m) {
                best_m = m;
                best = static_cast<Label>(c);
            }
        }
        return best;
    }
};

inline std::size_t distinct_labels(std::span<Label const> labels) {
    std::vector<Label> l(labels.begin(), labels.end());
    std::sort(l.begin(), l.end());
    return static_cast<std::size_t>(std::unique(l.begin(), l.end()) - l.begin());
}

/// Hinge loss + (lambda/2)|w|^2 per class, step 1/(lambda t), on standardized
/// features. The bias is a constant feature of value 1 and is regularized with
/// the rest.
inline LinearSvm train_linear_svm(LabeledDataset const& train, SvmParams const& p) {
    if (distinct_labels(train.labels) < 2) {
        throw Error("train_linear_svm: need at least two classes in the training set");
    }
    if (!(p.lambda > 0.0) || p.epochs == 0) {
        throw Error("train_linear_svm: lambda and epochs must be positive");
    }
    std::size_t const d = train.features.cols;
    std::size_t const classes = train.num_classes();
    LinearSvm model{d, std::vector<std::vector<double>>(classes, std::vector<double>(d + 1, 0.0)),
                    std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    auto const m = static_cast<double>(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto row = train.features.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            model.center[j] += row[j] / m;
        }
    }
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto row = train.features.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            double z = row[j] - model.center[j];
            var[j] += z * z / m;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        model.inv_scale[j] = var[j] > 0.0 ? 1.0 / std::sqrt(var[j]) : 1.0;
    }
    Matrix z(train.size(), d);
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto row = train.features.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            z(i, j) = (row[j] - model.center[j]) * model.inv_scale[j];
        }
    }
    // w_c = scale_c * v_c so the shrink step is O(1).
    std::vector<double> scale(classes, 1.0);
    auto& v = model.weights;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(p.seed);
    std::uint64_t t = 0;
    for (std::size_t e = 0; e < p.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        for (auto i : order) {
            ++t;
            double eta = 1.0 / (p.lambda * static_cast<double>(t));
            double shrink = 1.0 - eta * p.lambda;
            auto x = z.row(i);
            for (std::size_t c = 0; c < classes; ++c) {
                double y = train.labels[i] == static_cast<Label>(c) ? 1.0 : -1.0;
                double wx = v[c][d];
                for (std::size_t j = 0; j < d; ++j) {
                    wx += v[c][j] * x[j];
                }
                wx *= scale[c];
                if (shrink <= 0.0) {
                    std::fill(v[c].begin(), v[c].end(), 0.0);
                    scale[c] = 1.0;
                } else {
                    scale[c] *= shrink;
                }
                if (y * wx < 1.0) {
                    double step = eta * y / scale[c];
                    for (std::size_t j = 0; j < d; ++j) {
                        v[c][j] += step * x[j];
                    }
                    v[c][d] += step;
                }
                if (scale[c] < 1e-9) {
                    for (auto& w : v[c]) {
                        w *= scale[c];
                    }
                    scale[c] = 1.0;
                }
            }
        }
    }
    for (std::size_t c = 0; c < classes; ++c) {
        for (auto& w : v[c]) {
            w *= scale[c];
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// CART decision tree (Gini impurity).

struct TreeParams {
    std::size_t max_depth = 0;  // 0 = unlimited
    std::size_t min_samples_split = 2;
};

struct DecisionTree {
    struct Node {
        bool leaf = true;
        std::size_t feature = 0;
        double threshold = 0.0;
        std::size_t left = 0;
        std::size_t right = 0;
        Label prediction = 0;
    };
    std::vector<Node> nodes;

    [[nodiscard]] Label predict(std::span<double const> x) const {
        std::size_t at = 0;
        while (!nodes[at].leaf) {
            at = x[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
        }
        return nodes[at].prediction;
    }

    [[nodiscard]] std::size_t depth() const {
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        std::size_t best = 0;
        while (!stack.empty()) {
            auto [n, dep] = stack.back();
            stack.pop_back();
            best = std::max(best, dep);
            if (!nodes[n].leaf) {
                stack.push_back({nodes[n].left, dep + 1});
                stack.push_back({nodes[n].right, dep + 1});
            }
        }
        return best;
    }
};

inline double gini(std::span<std::size_t const> counts, std::size_t n) {
    if (n == 0) {
        return 0.0;
    }
    double s = 0.0;
    for (auto c : counts) {
        double p = static_cast<double>(c) / static_cast<double>(n);
        s += p * p;
    }
    return 1.0 - s;
}

/// CART: every impure node splits at the threshold maximizing Gini decrease;
/// thresholds are midpoints of adjacent distinct values, ties go to the lower
/// feature index, then the lower threshold.
inline DecisionTree train_decision_tree(LabeledDataset const& train, TreeParams const& p) {
    if (distinct_labels(train.labels) < 2) {
        throw Error("train_decision_tree: need at least two classes in the training set");
    }
    std::size_t const classes = train.num_classes();
    std::size_t const d = train.features.cols;
    DecisionTree tree;

    struct Work {
        std::size_t node;
        std::vector<std::size_t> idx;
        std::size_t depth;
    };
    std::vector<Work> stack;
    tree.nodes.emplace_back();
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), 0);
    stack.push_back({0, std::move(all), 0});

    std::vector<std::size_t> counts(classes), left(classes), right(classes);
    std::vector<std::size_t> sorted;
    while (!stack.empty()) {
        auto w = std::move(stack.back());
        stack.pop_back();
        std::fill(counts.begin(), counts.end(), 0);
        for (auto i : w.idx) {
            ++counts[static_cast<std::size_t>(train.labels[i])];
        }
        auto majority = static_cast<Label>(std::max_element(counts.begin(), counts.end()) -
                                           counts.begin());
        tree.nodes[w.node].prediction = majority;
        std::size_t const n = w.idx.size();
        bool pure = static_cast<std::size_t>(counts[static_cast<std::size_t>(majority)]) == n;
        if (pure || n < p.min_samples_split || (p.max_depth > 0 && w.depth >= p.max_depth)) {
            continue;
        }
        // Maximize sum_c cL^2/nL + sum_c cR^2/nR, which minimizes weighted child Gini.
        double best_score = -1.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        for (std::size_t f = 0; f < d; ++f) {
            sorted = w.idx;
            std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                double xa = train.features(a, f), xb = train.features(b, f);
                return xa != xb ? xa < xb : a < b;
            });
            std::fill(left.begin(), left.end(), 0);
            right = counts;
            double sq_left = 0.0;
            double sq_right = 0.0;
            for (auto c : right) {
                sq_right += static_cast<double>(c) * static_cast<double>(c);
            }
            for (std::size_t pos = 0; pos + 1 < n; ++pos) {
                auto y = static_cast<std::size_t>(train.labels[sorted[pos]]);
                sq_left += 2.0 * static_cast<double>(left[y]) + 1.0;
                sq_right -= 2.0 * static_cast<double>(right[y]) - 1.0;
                ++left[y];
                --right[y];
                double lo = train.features(sorted[pos], f);
                double hi = train.features(sorted[pos + 1], f);
                if (lo == hi) {
                    continue;
                }
                double nl = static_cast<double>(pos + 1);
                double nr = static_cast<double>(n - pos - 1);
                double score = sq_left / nl + sq_right / nr;
                if (score > best_score) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = lo + (hi - lo) / 2.0;
                }
            }
        }
        if (best_score < 0.0) {
            continue;  // every feature is constant on this node
        }
        std::vector<std::size_t> li, ri;
        for (auto i : w.idx) {
            (train.features(i, best_feature) <= best_threshold ? li : ri).push_back(i);
        }
        auto l = tree.nodes.size();
        tree.nodes.emplace_back();
        auto r = tree.nodes.size();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[w.node];
        node.leaf = false;
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        stack.push_back({r, std::move(ri), w.depth + 1});
        stack.push_back({l, std::move(li), w.depth + 1});
    }
    return tree;
}

// ---------------------------------------------------------------------------
// Metrics and cross-validated evaluation.

enum class Averaging { Micro, Macro, Weighted };

inline std::string to_string(Averaging a) {
    switch (a) {
        case Averaging::Micro: return "micro";
        case Averaging::Macro: return "macro";
        case Averaging::Weighted: return "weighted";
    }
    return "?";
}

inline Averaging parse_averaging(std::string const& s) {
    if (s == "micro") return Averaging::Micro;
    if (s == "macro") return Averaging::Macro;
    if (s == "weighted") return Averaging::Weighted;
    throw Error("unknown averaging mode '" + s + "' (expected micro, macro or weighted)");
}

/// F1 over the union of labels seen in `pred` and `truth`; 0/0 counts as 0.
inline double f1_score(std::span<Label const> pred, std::span<Label const> truth,
                       Averaging mode = Averaging::Weighted) {
    if (pred.size() != truth.size()) {
        throw Error("f1_score: length mismatch");
    }
    if (pred.empty()) {
        return 0.0;
    }
    std::map<Label, std::array<std::size_t, 3>> stats;  // tp, fp, fn
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == truth[i]) {
            ++stats[pred[i]][0];
        } else {
            ++stats[pred[i]][1];
            ++stats[truth[i]][2];
        }
    }
    auto f1 = [](double tp, double fp, double fn) {
        double denom = 2.0 * tp + fp + fn;
        return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
    };
    if (mode == Averaging::Micro) {
        double tp = 0, fp = 0, fn = 0;
        for (auto const& [_, s] : stats) {
            tp += static_cast<double>(s[0]);
            fp += static_cast<double>(s[1]);
            fn += static_cast<double>(s[2]);
        }
        return f1(tp, fp, fn);
    }
    double total = 0.0;
    double weight_sum = 0.0;
    for (auto const& [_, s] : stats) {
        double score = f1(static_cast<double>(s[0]), static_cast<double>(s[1]),
                          static_cast<double>(s[2]));
        double w = mode == Averaging::Macro ? 1.0 : static_cast<double>(s[0] + s[2]);
        total += w * score;
        weight_sum += w;
    }
    return weight_sum == 0.0 ? 0.0 : total / weight_sum;
}

enum class ClassifierKind { DecisionTree, LinearSvm };

inline std::string to_string(ClassifierKind k) {
    return k == ClassifierKind::DecisionTree ? "Decision Tree" : "Multi-class SVM";
}

struct ClassifierParams {
    SvmParams svm;
    TreeParams tree;
};

/// Mean F1 (percent) over folds, for each averaging mode.
struct F1Report {
    double micro = 0.0;
    double macro = 0.0;
    double weighted = 0.0;

    [[nodiscard]] double get(Averaging a) const {
        return a == Averaging::Micro ? micro : a == Averaging::Macro ? macro : weighted;
    }
};

inline F1Report evaluate_classifier(LabeledDataset const& ds, ClassifierKind kind,
                                    FoldPlan const& folds, ClassifierParams const& params = {}) {
    if (folds.assignments.size() != ds.size()) {
        throw Error("fold plan does not match dataset size");
    }
    F1Report r;
    for (std::size_t f = 0; f < folds.k; ++f) {
        auto train_idx = folds.complement(f);
        auto test_idx = folds.members(f);
        auto train = ds.subset(train_idx);
        std::vector<Label> pred, truth;
        auto predict_all = [&](auto const& model) {
            for (auto i : test_idx) {
                pred.push_back(model.predict(ds.features.row(i)));
                truth.push_back(ds.labels[i]);
            }
        };
        if (distinct_labels(train.labels) < 2) {
            warn("fold " + std::to_string(f) + ": training split has a single class; "
                 "predicting it for every held-out sample");
            for (auto i : test_idx) {
                pred.push_back(train.labels.empty() ? 0 : train.labels.front());
                truth.push_back(ds.labels[i]);
            }
        } else if (kind == ClassifierKind::LinearSvm) {
            predict_all(train_linear_svm(train, params.svm));
        } else {
            predict_all(train_decision_tree(train, params.tree));
        }
        r.micro += f1_score(pred, truth, Averaging::Micro);
        r.macro += f1_score(pred, truth, Averaging::Macro);
        r.weighted += f1_score(pred, truth, Averaging::Weighted);
    }
    double scale = 100.0 / static_cast<double>(folds.k);
    r.micro *= scale;
    r.macro *= scale;
    r.weighted *= scale;
    return r;
}

// ---------------------------------------------------------------------------
// Clustering.

struct ClusteringResult {
    std::vector<Label> labels;
    Matrix centroids;                    // k-means only
    std::vector<double> inertia_history;  // k-means only, one entry per assignment pass
    double inertia = 0.0;

    [[nodiscard]] std::size_t num_clusters() const {
        Label mx = kNoise;
        for (auto l : labels) {
            mx = std::max(mx, l);
        }
        return static_cast<std::size_t>(mx + 1);
    }
};

struct KMeansParams {
    std::size_t k = 41;
    std::uint64_t seed = 42;
    std::size_t max_iter = 300;
    double tol = 1e-6;
};

namespace detail {

inline std::size_t nearest_centroid(Matrix const& centroids, std::span<double const> x,
                                    double& best_d2) {
    std::size_t best = 0;
    best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows; ++c) {
        double d2 = squared_distance(x, centroids.row(c));
        if (d2 < best_d2) {
            best_d2 = d2;
            best = c;
        }
    }
    return best;
}

}  // namespace detail

/// k-means++ seeding followed by Lloyd iterations. An emptied cluster is
/// re-seeded at the point farthest from its current centroid.
inline ClusteringResult kmeans(Matrix const& x, KMeansParams const& p) {
    std::size_t const m = x.rows;
    std::size_t const k = p.k;
    if (k == 0 || k > m) {
        throw Error("kmeans: k must be in [1, " + std::to_string(m) + "]");
    }
    std::mt19937_64 rng(p.seed);
    Matrix centroids(k, x.cols);
    std::vector<double> d2(m, std::numeric_limits<double>::infinity());
    std::vector<char> chosen(m, 0);
    auto place = [&](std::size_t c, std::size_t i) {
        chosen[i] = 1;
        std::copy_n(x.row(i).begin(), x.cols, centroids.row(c).begin());
        for (std::size_t j = 0; j < m; ++j) {
            d2[j] = std::min(d2[j], squared_distance(x.row(j), centroids.row(c)));
        }
    };
    place(0, std::uniform_int_distribution<std::size_t>(0, m - 1)(rng));
    for (std::size_t c = 1; c < k; ++c) {
        double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            double acc = 0.0;
            pick = m;
            for (std::size_t j = 0; j < m; ++j) {
                if (d2[j] <= 0.0) {
                    continue;
                }
                acc += d2[j];
                pick = j;
                if (acc > r) {
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
        }
        place(c, pick);
    }

    ClusteringResult res;
    res.labels.assign(m, 0);
    std::vector<double> dist2(m);
    auto assign = [&] {
        double inertia = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            res.labels[i] = static_cast<Label>(detail::nearest_centroid(centroids, x.row(i), dist2[i]));
            inertia += dist2[i];
        }
        res.inertia_history.push_back(inertia);
        return inertia;
    };
    for (std::size_t it = 0; it < p.max_iter; ++it) {
        assign();
        Matrix next(k, x.cols);
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t i = 0; i < m; ++i) {
            auto c = static_cast<std::size_t>(res.labels[i]);
            ++sizes[c];
            auto row = next.row(c);
            auto xi = x.row(i);
            for (std::size_t j = 0; j < x.cols; ++j) {
                row[j] += xi[j];
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] == 0) {
                auto far = static_cast<std::size_t>(
                    std::max_element(dist2.begin(), dist2.end()) - dist2.begin());
                std::copy_n(x.row(far).begin(), x.cols, next.row(c).begin());
                dist2[far] = 0.0;
                continue;
            }
            for (auto& v : next.row(c)) {
                v /= static_cast<double>(sizes[c]);
            }
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift = std::max(shift, distance(next.row(c), centroids.row(c)));
        }
        centroids = std::move(next);
        if (shift < p.tol) {
            break;
        }
    }
    res.inertia = assign();
    // Drop clusters left empty by the final assignment so ids stay contiguous.
    std::vector<Label> remap(k, kNoise);
    Label used = 0;
    for (auto& l : res.labels) {
        auto& r = remap[static_cast<std::size_t>(l)];
        if (r == kNoise) {
            r = used++;
        }
    }
    if (static_cast<std::size_t>(used) < k) {
        for (auto& l : res.labels) {
            l = remap[static_cast<std::size_t>(l)];
        }
        Matrix kept(static_cast<std::size_t>(used), x.cols);
        for (std::size_t c = 0; c < k; ++c) {
            if (remap[c] != kNoise) {
                std::copy_n(centroids.row(c).begin(), x.cols,
                            kept.row(static_cast<std::size_t>(remap[c])).begin());
            }
        }
        centroids = std::move(kept);
    }
    res.centroids = std::move(centroids);
    return res;
}

/// Density-based clustering. Neighbourhoods are inclusive (dist <= eps) and
/// include the point itself; clusters grow in ascending sample order.
inline ClusteringResult dbscan(Matrix const& x, double eps, std::size_t min_pts) {
    if (!(eps > 0.0) || min_pts == 0) {
        throw Error("dbscan: eps must be > 0 and min_pts >= 1");
    }
    std::size_t const m = x.rows;
    double const eps2 = eps * eps;
    auto neighbours = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < m; ++j) {
            if (squared_distance(x.row(i), x.row(j)) <= eps2) {
                out.push_back(j);
            }
        }
        return out;
    };
    constexpr Label unvisited = -2;
    ClusteringResult res;
    res.labels.assign(m, unvisited);
    Label next_id = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (res.labels[i] != unvisited) {
            continue;
        }
        auto nb = neighbours(i);
        if (nb.size() < min_pts) {
            res.labels[i] = kNoise;
            continue;
        }
        Label id = next_id++;
        res.labels[i] = id;
        std::deque<std::size_t> queue(nb.begin(), nb.end());
        while (!queue.empty()) {
            auto j = queue.front();
            queue.pop_front();
            if (res.labels[j] == kNoise) {
                res.labels[j] = id;  // border point
            }
            if (res.labels[j] != unvisited) {
                continue;
            }
            res.labels[j] = id;
            auto nbj = neighbours(j);
            if (nbj.size() >= min_pts) {
                queue.insert(queue.end(), nbj.begin(), nbj.end());
            }
        }
    }
    return res;
}

/// Median distance to the `min_pts`-th nearest other point over a seeded
/// subsample of at most `sample` points.
inline double suggest_eps(Matrix const& x, std::size_t min_pts, std::size_t sample,
                          std::uint64_t seed) {
    std::size_t const m = x.rows;
    if (m <= min_pts) {
        throw Error("suggest_eps: need more than min_pts samples");
    }
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    if (m > sample) {
        std::mt19937_64 rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(sample);
    }
    std::vector<double> kd;
    std::vector<double> d;
    for (auto i : idx) {
        d.clear();
        for (std::size_t j = 0; j < m; ++j) {
            if (j != i) {
                d.push_back(distance(x.row(i), x.row(j)));
            }
        }
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(min_pts - 1), d.end());
        kd.push_back(d[min_pts - 1]);
    }
    std::sort(kd.begin(), kd.end());
    auto n = kd.size();
    return n % 2 == 1 ? kd[n / 2] : 0.5 * (kd[n / 2 - 1] + kd[n / 2]);
}

namespace detail {

inline std::size_t count_clusters(std::span<Label const> labels) {
    std::vector<Label> ids;
    for (auto l : labels) {
        if (l != kNoise) {
            ids.push_back(l);
        }
    }
    std::sort(ids.begin(), ids.end());
    return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

}  // namespace detail

/// Mean silhouette over non-noise samples; singleton clusters score 0.
inline double silhouette(Matrix const& x, std::span<Label const> labels) {
    if (labels.size() != x.rows) {
        throw Error("silhouette: label count mismatch");
    }
    if (detail::count_clusters(labels) < 2) {
        throw Error("silhouette: need at least two non-noise clusters");
    }
    Label mx = *std::max_element(labels.begin(), labels.end());
    std::vector<std::size_t> sizes(static_cast<std::size_t>(mx) + 1, 0);
    for (auto l : labels) {
        if (l != kNoise) {
            ++sizes[static_cast<std::size_t>(l)];
        }
    }
    double total = 0.0;
    std::size_t count = 0;
    std::vector<double> sums(sizes.size());
    for (std::size_t i = 0; i < x.rows; ++i) {
        if (labels[i] == kNoise) {
            continue;
        }
        ++count;
        auto own = static_cast<std::size_t>(labels[i]);
        if (sizes[own] == 1) {
            continue;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < x.rows; ++j) {
            if (j != i && labels[j] != kNoise) {
                sums[static_cast<std::size_t>(labels[j])] += distance(x.row(i), x.row(j));
            }
        }
        double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            if (c != own && sizes[c] > 0) {
                b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
            }
        }
        double denom = std::max(a, b);
        total += denom == 0.0 ? 0.0 : (b - a) / denom;
    }
    return total / static_cast<double>(count);
}

inline double davies_bouldin(Matrix const& x, std::span<Label const> labels) {
    if (labels.size() != x.rows) {
        throw Error("davies_bouldin: label count mismatch");
    }
    if (detail::count_clusters(labels) < 2) {
        throw Error("davies_bouldin: need at least two non-noise clusters");
    }
    Label mx = *std::max_element(labels.begin(), labels.end());
    std::size_t const k = static_cast<std::size_t>(mx) + 1;
    Matrix centroids(k, x.cols);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        if (labels[i] == kNoise) {
            continue;
        }
        auto c = static_cast<std::size_t>(labels[i]);
        ++sizes[c];
        for (std::size_t j = 0; j < x.cols; ++j) {
            centroids(c, j) += x(i, j);
        }
    }
    std::vector<std::size_t> live;
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] > 0) {
            live.push_back(c);
            for (auto& v : centroids.row(c)) {
                v /= static_cast<double>(sizes[c]);
            }
        }
    }
    std::vector<double> scatter(k, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        if (labels[i] != kNoise) {
            auto c = static_cast<std::size_t>(labels[i]);
            scatter[c] += distance(x.row(i), centroids.row(c));
        }
    }
    for (auto c : live) {
        scatter[c] /= static_cast<double>(sizes[c]);
    }
    double total = 0.0;
    for (auto i : live) {
        double worst = 0.0;
        for (auto j : live) {
            if (i == j) {
                continue;
            }
            double sep = distance(centroids.row(i), centroids.row(j));
            if (sep == 0.0) {
                throw Error("davies_bouldin: coincident cluster centroids");
            }
            worst = std::max(worst, (scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    return total / static_cast<double>(live.size());
}

enum class Algorithm { KMeans, Dbscan };

struct ClusteringParams {
    KMeansParams kmeans;
    std::optional<double> eps;  // unset: suggest_eps heuristic
    std::size_t min_pts = 4;
    std::size_t eps_sample = 1000;
    std::uint64_t seed = 42;
};

struct ClusteringScores {
    double silhouette = 0.0;
    double davies_bouldin = 0.0;
    ClusteringResult result;
};

inline ClusteringScores evaluate_clustering(Matrix const& x, Algorithm algo,
                                            ClusteringParams const& p) {
    ClusteringScores s;
    if (algo == Algorithm::KMeans) {
        s.result = kmeans(x, p.kmeans);
    } else {
        double eps = p.eps ? *p.eps : suggest_eps(x, p.min_pts, p.eps_sample, p.seed);
        s.result = dbscan(x, eps, p.min_pts);
    }
    s.silhouette = silhouette(x, s.result.labels);
    s.davies_bouldin = davies_bouldin(x, s.result.labels);
    return s;
}

}  // namespace relemb::categorize

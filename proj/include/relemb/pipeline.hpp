#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "categorize.hpp"
#include "corpus.hpp"
#include "embedding.hpp"
#include "index.hpp"
#include "neural.hpp"
#include "reduce.hpp"
#include "reprs.hpp"
#include "tasks.hpp"

namespace relemb::pipeline {

namespace fs = std::filesystem;

struct PipelineConfig {
    std::string corpus;
    std::string judgments;
    std::string artifacts = "artifacts";
    Bm25Params bm25;
    ReprConfig repr;
    nn::TrainConfig train;
    reduce::ReduceConfig reduce;
    ExpansionConfig expansion;
    std::size_t folds = 5;
    bool stratified = false;
    std::optional<double> eps;
    std::size_t min_pts = 4;
    std::size_t kmeans_k = 0;  // 0: number of categories
    std::string averaging = "all";
    bool normalize = false;
    std::string gain = "linear";
    double svm_lambda = 1e-3;
    std::size_t svm_epochs = 20;
    std::size_t tree_max_depth = 0;
    std::uint64_t seed = 42;
    unsigned threads = 0;
    bool json = false;

    [[nodiscard]] fs::path artifact(std::string const& name) const {
        return fs::path(artifacts) / name;
    }

    /// Per-module configs carry the pipeline seed.
    [[nodiscard]] nn::TrainConfig train_config() const {
        auto t = train;
        t.seed = seed;
        return t;
    }
    [[nodiscard]] reduce::ReduceConfig reduce_config() const {
        auto r = reduce;
        r.seed = seed;
        return r;
    }
};

inline nlohmann::json to_json(PipelineConfig const& c) {
    nlohmann::json j;
    j["corpus"] = c.corpus;
    j["judgments"] = c.judgments;
    j["artifacts"] = c.artifacts;
    j["k1"] = c.bm25.k1;
    j["b"] = c.bm25.b;
    j["topdocs"] = c.repr.len_topdocs;
    j["hidden"] = c.train.hidden;
    j["lr"] = c.train.learning_rate;
    j["epochs"] = c.train.epochs;
    j["batch"] = c.train.batch_size;
    j["svd_dim"] = c.reduce.target_dim;
    j["oversampling"] = c.reduce.oversampling;
    j["power_iterations"] = c.reduce.power_iterations;
    j["k_expansion"] = c.expansion.k;
    j["gamma"] = c.expansion.gamma;
    j["exclude_query_terms"] = c.expansion.exclude_query_terms;
    j["folds"] = c.folds;
    j["stratified"] = c.stratified;
    j["eps"] = c.eps ? nlohmann::json(*c.eps) : nlohmann::json(nullptr);
    j["min_pts"] = c.min_pts;
    j["kmeans_k"] = c.kmeans_k;
    j["averaging"] = c.averaging;
    j["normalize"] = c.normalize;
    j["gain"] = c.gain;
    j["svm_lambda"] = c.svm_lambda;
    j["svm_epochs"] = c.svm_epochs;
    j["tree_max_depth"] = c.tree_max_depth;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["json"] = c.json;
    return j;
}

/// Keys missing from `j` keep their current value in `c`.
inline void merge_json(nlohmann::json const& j, PipelineConfig& c) {
    auto get = [&](char const* key, auto& field) {
        if (auto it = j.find(key); it != j.end() && !it->is_null()) {
            it->get_to(field);
        }
    };
    get("corpus", c.corpus);
    get("judgments", c.judgments);
    get("artifacts", c.artifacts);
    get("k1", c.bm25.k1);
    get("b", c.bm25.b);
    get("topdocs", c.repr.len_topdocs);
    get("hidden", c.train.hidden);
    get("lr", c.train.learning_rate);
    get("epochs", c.train.epochs);
    get("batch", c.train.batch_size);
    get("svd_dim", c.reduce.target_dim);
    get("oversampling", c.reduce.oversampling);
    get("power_iterations", c.reduce.power_iterations);
    get("k_expansion", c.expansion.k);
    get("gamma", c.expansion.gamma);
    get("exclude_query_terms", c.expansion.exclude_query_terms);
    get("folds", c.folds);
    get("stratified", c.stratified);
    if (auto it = j.find("eps"); it != j.end()) {
        c.eps = it->is_null() ? std::nullopt : std::optional<double>(it->get<double>());
    }
    get("min_pts", c.min_pts);
    get("kmeans_k", c.kmeans_k);
    get("averaging", c.averaging);
    get("normalize", c.normalize);
    get("gain", c.gain);
    get("svm_lambda", c.svm_lambda);
    get("svm_epochs", c.svm_epochs);
    get("tree_max_depth", c.tree_max_depth);
    get("seed", c.seed);
    get("threads", c.threads);
    get("json", c.json);
}

inline PipelineConfig from_json(nlohmann::json const& j) {
    PipelineConfig c;
    merge_json(j, c);
    return c;
}

/// Seed precedence: explicit flag, then config file, then RELEMB_SEED, then 42.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag,
                                  std::optional<std::uint64_t> config_file) {
    if (flag) {
        return *flag;
    }
    if (config_file) {
        return *config_file;
    }
    if (char const* env = std::getenv("RELEMB_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) {
                return v;
            }
        } catch (std::exception const&) {
        }
        throw Error(std::string("RELEMB_SEED is not an unsigned integer: ") + env);
    }
    return 42;
}

// ---------------------------------------------------------------------------
// Tables.

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::string tsv() const {
        std::string out;
        auto line = [&](std::vector<std::string> const& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                out += (i ? "\t" : "") + cells[i];
            }
            out += '\n';
        };
        line(header);
        for (auto const& r : rows) {
            line(r);
        }
        return out;
    }

    [[nodiscard]] nlohmann::json json() const {
        auto arr = nlohmann::json::array();
        for (auto const& r : rows) {
            nlohmann::json obj;
            for (std::size_t i = 0; i < header.size(); ++i) {
                obj[header[i]] = r[i];
            }
            arr.push_back(obj);
        }
        return arr;
    }

    void write(fs::path const& path, bool with_json) const {
        io::atomic_write(path, tsv());
        if (with_json) {
            auto jpath = path;
            jpath.replace_extension(".json");
            io::atomic_write(jpath, json().dump(2) + "\n");
        }
    }
};

inline std::string fmt(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Stages. Each reads its inputs from disk and writes its artifact atomically.

inline Corpus read_corpus(PipelineConfig const& c) {
    if (c.corpus.empty()) {
        throw Error("--corpus is required");
    }
    return load_corpus(c.corpus);
}

inline Vocabulary read_vocab(PipelineConfig const& c) {
    return load_vocabulary(c.artifact("vocab.txt"));
}

inline InvertedIndex read_index(PipelineConfig const& c, Vocabulary const& vocab) {
    auto index = load_index(c.artifact("index.relidx"));
    require_fingerprint(index.vocab_fingerprint(), vocab.fingerprint(), "index.relidx");
    return index;
}

inline WordReprMatrix read_reprs(PipelineConfig const& c, Vocabulary const& vocab) {
    auto reprs = load_reprs(c.artifact("reprs.relspr"));
    require_fingerprint(reprs.vocab_fingerprint, vocab.fingerprint(), "reprs.relspr");
    return reprs;
}

inline EmbeddingMatrix read_embedding(PipelineConfig const& c, std::string const& name,
                                      EmbeddingKind kind, Vocabulary const& vocab) {
    auto e = load_embedding(c.artifact(name), kind);
    require_fingerprint(e.vocab_fingerprint(), vocab.fingerprint(), name);
    return e;
}

inline std::string appemb_file(EmbeddingKind kind) {
    return kind == EmbeddingKind::RelEmb ? "appemb_relemb.relemb" : "appemb_relembae.relemb";
}

inline AppEmbeddingSet read_app_embeddings(PipelineConfig const& c, Corpus const& corpus,
                                           Vocabulary const& vocab, EmbeddingKind kind) {
    AppEmbeddingSet set;
    set.matrix = read_embedding(c, appemb_file(kind), kind, vocab);
    if (set.matrix.rows() != corpus.total_docs()) {
        throw Error(appemb_file(kind) + " does not match the corpus size");
    }
    for (auto const& r : corpus.records) {
        set.app_ids.push_back(r.app_id);
    }
    return set;
}

inline Vocabulary stage_ingest(PipelineConfig const& c) {
    auto corpus = read_corpus(c);
    auto vocab = build_vocabulary(corpus);
    save_vocabulary(vocab, c.artifact("vocab.txt"));
    return vocab;
}

inline void stage_build_index(PipelineConfig const& c) {
    auto corpus = read_corpus(c);
    auto vocab = read_vocab(c);
    save_index(build_index(corpus, vocab), c.artifact("index.relidx"));
}

inline void stage_build_reprs(PipelineConfig const& c) {
    auto vocab = read_vocab(c);
    auto index = read_index(c, vocab);
    save_reprs(build_all_reprs(index, c.bm25, c.repr, c.threads), c.artifact("reprs.relspr"));
}

inline void stage_train_encoder(PipelineConfig const& c) {
    auto vocab = read_vocab(c);
    auto reprs = read_reprs(c, vocab);
    auto r = nn::train_encoder(reprs, c.train_config());
    save_embedding(r.embedding, c.artifact("wordemb.relemb"));
    nn::save_loss_history(r.loss_history, c.artifact("wordemb_loss.csv"));
}

inline void stage_train_autoencoder(PipelineConfig const& c) {
    auto vocab = read_vocab(c);
    auto reprs = read_reprs(c, vocab);
    auto r = nn::train_autoencoder(reprs, c.train_config());
    save_embedding(r.embedding, c.artifact("wordembae.relemb"));
    nn::save_loss_history(r.loss_history, c.artifact("wordembae_loss.csv"));
}

/// Shrinks target_dim (then oversampling) to fit an n x n matrix.
inline reduce::ReduceConfig fit_reduce_config(reduce::ReduceConfig r, std::size_t n) {
    if (r.target_dim + r.oversampling <= n) {
        return r;
    }
    auto orig = r.target_dim;
    r.oversampling = std::min(r.oversampling, n > 1 ? n / 4 : 0);
    r.target_dim = std::max<std::size_t>(1, std::min(r.target_dim, n - r.oversampling));
    warn("reduction dimension " + std::to_string(orig) + " exceeds vocabulary size " +
         std::to_string(n) + "; using " + std::to_string(r.target_dim) + " with oversampling " +
         std::to_string(r.oversampling));
    return r;
}

inline void stage_reduce(PipelineConfig const& c, EmbeddingKind kind) {
    auto vocab = read_vocab(c);
    auto reprs = read_reprs(c, vocab);
    auto cfg = fit_reduce_config(c.reduce_config(), reprs.num_rows());
    if (kind == EmbeddingKind::SVD) {
        save_embedding(reduce::truncated_svd(reprs, cfg), c.artifact("svd.relemb"));
    } else {
        save_embedding(reduce::pca(reprs, cfg), c.artifact("pca.relemb"));
    }
}

inline void stage_embed_apps(PipelineConfig const& c) {
    auto corpus = read_corpus(c);
    auto vocab = read_vocab(c);
    for (auto [src, file, kind] :
         {std::tuple{EmbeddingKind::WordEmb, "wordemb.relemb", EmbeddingKind::RelEmb},
          std::tuple{EmbeddingKind::WordEmbAE, "wordembae.relemb", EmbeddingKind::RelEmbAE}}) {
        if (!fs::exists(c.artifact(file))) {
            warn(std::string(file) + " not found; skipping " + to_string(kind));
            continue;
        }
        auto wordemb = read_embedding(c, file, src, vocab);
        save_embedding(embed_apps(corpus, vocab, wordemb, kind).matrix,
                       c.artifact(appemb_file(kind)));
    }
}

struct QeResult {
    std::string method;
    QeMetrics metrics;
};

inline std::vector<QeResult> stage_eval_qe(PipelineConfig const& c) {
    if (c.judgments.empty()) {
        throw Error("--judgments is required");
    }
    auto corpus = read_corpus(c);
    auto vocab = read_vocab(c);
    auto index = read_index(c, vocab);
    auto judgments = load_judgments(c.judgments, &corpus);
    RetrievalContext ctx{corpus, vocab, index, c.bm25};
    Gain gain = c.gain == "exponential" ? Gain::Exponential : Gain::Linear;
    if (c.gain != "linear" && c.gain != "exponential") {
        throw Error("unknown gain '" + c.gain + "' (expected linear or exponential)");
    }
    std::vector<QeResult> out;
    out.push_back({"Okapi-BM25", eval_query_expansion(ctx, judgments, nullptr, c.expansion, gain)});
    for (auto [name, file, kind] :
         {std::tuple{"SVD", "svd.relemb", EmbeddingKind::SVD},
          std::tuple{"PCA", "pca.relemb", EmbeddingKind::PCA},
          std::tuple{"WordEmbAE", "wordembae.relemb", EmbeddingKind::WordEmbAE},
          std::tuple{"WordEmb", "wordemb.relemb", EmbeddingKind::WordEmb}}) {
        if (!fs::exists(c.artifact(file))) {
            continue;
        }
        auto emb = read_embedding(c, file, kind, vocab);
        out.push_back({name, eval_query_expansion(ctx, judgments, &emb, c.expansion, gain)});
    }
    Table t;
    t.header.push_back("metric");
    for (auto const& r : out) {
        t.header.push_back(r.method);
    }
    for (auto [label, field] : {std::pair{"NDCG@3", &QeMetrics::ndcg3},
                                std::pair{"NDCG@5", &QeMetrics::ndcg5},
                                std::pair{"NDCG@10", &QeMetrics::ndcg10}}) {
        std::vector<std::string> row{label};
        for (auto const& r : out) {
            row.push_back(fmt(r.metrics.*field));
        }
        t.rows.push_back(row);
    }
    t.write(c.artifact("qe_results.tsv"), c.json);
    return out;
}

struct ClsResult {
    categorize::ClassifierKind classifier;
    EmbeddingKind embedding;
    categorize::F1Report f1;
};

inline std::vector<categorize::Averaging> averaging_modes(std::string const& s) {
    using categorize::Averaging;
    if (s == "all") {
        return {Averaging::Micro, Averaging::Macro, Averaging::Weighted};
    }
    return {categorize::parse_averaging(s)};
}

inline std::vector<ClsResult> stage_classify(PipelineConfig const& c) {
    using namespace categorize;
    auto modes = averaging_modes(c.averaging);
    auto corpus = read_corpus(c);
    auto vocab = read_vocab(c);
    ClassifierParams params;
    params.svm = {c.svm_lambda, c.svm_epochs, c.seed};
    params.tree.max_depth = c.tree_max_depth;
    std::vector<ClsResult> out;
    std::vector<EmbeddingKind> kinds;
    for (auto kind : {EmbeddingKind::RelEmb, EmbeddingKind::RelEmbAE}) {
        if (!fs::exists(c.artifact(appemb_file(kind)))) {
            warn(appemb_file(kind) + " not found; skipping");
            continue;
        }
        kinds.push_back(kind);
        auto ds = make_dataset(read_app_embeddings(c, corpus, vocab, kind), corpus, c.normalize);
        auto folds = c.stratified ? kfold_split_stratified(ds.labels, c.folds, c.seed)
                                  : kfold_split(ds.size(), c.folds, c.seed);
        for (auto ck : {ClassifierKind::DecisionTree, ClassifierKind::LinearSvm}) {
            out.push_back({ck, kind, evaluate_classifier(ds, ck, folds, params)});
        }
    }
    Table t;
    t.header = {"classifier", "averaging"};
    for (auto k : kinds) {
        t.header.push_back(to_string(k));
    }
    for (auto ck : {ClassifierKind::DecisionTree, ClassifierKind::LinearSvm}) {
        for (auto mode : modes) {
            std::vector<std::string> row{to_string(ck), to_string(mode)};
            for (auto k : kinds) {
                for (auto const& r : out) {
                    if (r.classifier == ck && r.embedding == k) {
                        row.push_back(fmt(r.f1.get(mode), 3));
                    }
                }
            }
            t.rows.push_back(row);
        }
    }
    t.write(c.artifact("cls_results.tsv"), c.json);
    return out;
}

struct CluResult {
    EmbeddingKind embedding;
    categorize::Algorithm algorithm;
    std::optional<categorize::ClusteringScores> scores;  // unset when a metric is undefined
    std::string error;
};

inline std::vector<CluResult> stage_cluster(PipelineConfig const& c) {
    using namespace categorize;
    auto corpus = read_corpus(c);
    auto vocab = read_vocab(c);
    std::vector<CluResult> out;
    Table t;
    t.header = {"embedding", "DBSCAN_silhouette", "DBSCAN_davies_bouldin", "kmeans_silhouette",
                "kmeans_davies_bouldin"};
    for (auto kind : {EmbeddingKind::RelEmb, EmbeddingKind::RelEmbAE}) {
        if (!fs::exists(c.artifact(appemb_file(kind)))) {
            warn(appemb_file(kind) + " not found; skipping");
            continue;
        }
        auto ds = make_dataset(read_app_embeddings(c, corpus, vocab, kind), corpus, c.normalize);
        ClusteringParams p;
        p.kmeans.k = c.kmeans_k > 0 ? c.kmeans_k : ds.num_classes();
        p.kmeans.seed = c.seed;
        p.eps = c.eps;
        p.min_pts = c.min_pts;
        p.seed = c.seed;
        std::vector<std::string> row{to_string(kind)};
        for (auto algo : {Algorithm::Dbscan, Algorithm::KMeans}) {
            CluResult r{kind, algo, std::nullopt, {}};
            try {
                r.scores = evaluate_clustering(ds.features, algo, p);
                row.push_back(fmt(r.scores->silhouette, 4));
                row.push_back(fmt(r.scores->davies_bouldin, 4));
            } catch (Error const& e) {
                r.error = e.what();
                warn(to_string(kind) + ": " + e.what());
                row.push_back("NA");
                row.push_back("NA");
            }
            out.push_back(std::move(r));
        }
        t.rows.push_back(row);
    }
    t.write(c.artifact("clu_results.tsv"), c.json);
    return out;
}

struct PipelineResult {
    std::vector<QeResult> qe;
    std::vector<ClsResult> cls;
    std::vector<CluResult> clu;
};

/// Every stage in order, each reading the previous stage's artifacts.
inline PipelineResult run_pipeline(PipelineConfig const& c) {
    fs::create_directories(c.artifacts);
    io::atomic_write(c.artifact("config.json"), to_json(c).dump(2) + "\n");
    stage_ingest(c);
    stage_build_index(c);
    stage_build_reprs(c);
    stage_train_encoder(c);
    stage_train_autoencoder(c);
    stage_reduce(c, EmbeddingKind::SVD);
    stage_reduce(c, EmbeddingKind::PCA);
    stage_embed_apps(c);
    PipelineResult r;
    r.qe = stage_eval_qe(c);
    r.cls = stage_classify(c);
    r.clu = stage_cluster(c);
    return r;
}

}  // namespace relemb::pipeline

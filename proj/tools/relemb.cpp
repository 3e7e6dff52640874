#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <relemb/relemb.hpp>

using namespace relemb;
using pipeline::PipelineConfig;

namespace {

/// Config flags bind to a scratch config; only flags given on the command line
/// override the file/default values when the final config is assembled.
class ConfigFlags {
  public:
    explicit ConfigFlags(CLI::App& app) : m_app(app) {}

    template <typename Access>
    void option(std::string const& name, Access access, std::string const& desc) {
        auto* opt = m_app.add_option(name, access(m_scratch), desc);
        m_overrides.push_back([opt, access](PipelineConfig& dst, PipelineConfig& src) {
            if (opt->count() > 0) {
                access(dst) = access(src);
            }
        });
    }

    template <typename Access>
    void flag(std::string const& name, Access access, std::string const& desc) {
        auto* opt = m_app.add_flag(name, access(m_scratch), desc);
        m_overrides.push_back([opt, access](PipelineConfig& dst, PipelineConfig& src) {
            if (opt->count() > 0) {
                access(dst) = access(src);
            }
        });
    }

    void apply(PipelineConfig& dst) {
        for (auto const& f : m_overrides) {
            f(dst, m_scratch);
        }
    }

  private:
    CLI::App& m_app;
    PipelineConfig m_scratch;
    std::vector<std::function<void(PipelineConfig&, PipelineConfig&)>> m_overrides;
};

void print_json_or(bool json, nlohmann::json const& j, std::string const& text) {
    if (json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << text;
    }
}

void print_table(bool json, pipeline::Table const& t) {
    print_json_or(json, t.json(), t.tsv());
}

EmbeddingKind parse_word_kind(std::string const& s) {
    if (s == "wordemb") return EmbeddingKind::WordEmb;
    if (s == "wordembae") return EmbeddingKind::WordEmbAE;
    if (s == "svd") return EmbeddingKind::SVD;
    if (s == "pca") return EmbeddingKind::PCA;
    throw Error("unknown word embedding '" + s + "' (expected wordemb, wordembae, svd or pca)");
}

std::string word_embedding_file(EmbeddingKind k) {
    switch (k) {
        case EmbeddingKind::WordEmb: return "wordemb.relemb";
        case EmbeddingKind::WordEmbAE: return "wordembae.relemb";
        case EmbeddingKind::SVD: return "svd.relemb";
        default: return "pca.relemb";
    }
}

EmbeddingKind parse_app_kind(std::string const& s) {
    if (s == "relemb") return EmbeddingKind::RelEmb;
    if (s == "relembae") return EmbeddingKind::RelEmbAE;
    throw Error("unknown app embedding '" + s + "' (expected relemb or relembae)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relevance-based word and app embeddings"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed_flag;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed_flag, "random seed (overrides config and RELEMB_SEED)");

    ConfigFlags flags(app);
    flags.option("--corpus", [](PipelineConfig& c) -> auto& { return c.corpus; }, "corpus JSONL");
    flags.option("--judgments", [](PipelineConfig& c) -> auto& { return c.judgments; },
                 "relevance judgments TSV");
    flags.option("--artifacts", [](PipelineConfig& c) -> auto& { return c.artifacts; },
                 "artifact directory");
    flags.option("--k1", [](PipelineConfig& c) -> auto& { return c.bm25.k1; }, "BM25 k1");
    flags.option("--b", [](PipelineConfig& c) -> auto& { return c.bm25.b; }, "BM25 b");
    flags.option("--topdocs", [](PipelineConfig& c) -> auto& { return c.repr.len_topdocs; },
                 "feedback documents per term");
    flags.option("--hidden", [](PipelineConfig& c) -> auto& { return c.train.hidden; },
                 "embedding dimension");
    flags.option("--epochs", [](PipelineConfig& c) -> auto& { return c.train.epochs; },
                 "training epochs");
    flags.option("--lr", [](PipelineConfig& c) -> auto& { return c.train.learning_rate; },
                 "Adam learning rate");
    flags.option("--batch", [](PipelineConfig& c) -> auto& { return c.train.batch_size; },
                 "minibatch size");
    flags.option("--svd-dim", [](PipelineConfig& c) -> auto& { return c.reduce.target_dim; },
                 "SVD/PCA dimension");
    flags.option("--k-expansion", [](PipelineConfig& c) -> auto& { return c.expansion.k; },
                 "expansion terms per query");
    flags.option("--gamma", [](PipelineConfig& c) -> auto& { return c.expansion.gamma; },
                 "weight of the expansion score");
    flags.option("--gain", [](PipelineConfig& c) -> auto& { return c.gain; },
                 "NDCG gain: linear or exponential");
    flags.option("--folds", [](PipelineConfig& c) -> auto& { return c.folds; },
                 "cross-validation folds");
    flags.flag("--stratified", [](PipelineConfig& c) -> auto& { return c.stratified; },
               "stratified folds");
    flags.option("--eps", [](PipelineConfig& c) -> auto& { return c.eps; },
                 "DBSCAN radius (default: estimated)");
    flags.option("--min-pts", [](PipelineConfig& c) -> auto& { return c.min_pts; },
                 "DBSCAN minimum neighbourhood size");
    flags.option("--kmeans-k", [](PipelineConfig& c) -> auto& { return c.kmeans_k; },
                 "k-means clusters (0: number of categories)");
    flags.option("--averaging", [](PipelineConfig& c) -> auto& { return c.averaging; },
                 "F1 averaging: micro, macro, weighted or all");
    flags.flag("--normalize", [](PipelineConfig& c) -> auto& { return c.normalize; },
               "L2-normalize app embeddings before classification/clustering");
    flags.option("--threads", [](PipelineConfig& c) -> auto& { return c.threads; },
                 "worker threads (0: all cores)");
    flags.flag("--json", [](PipelineConfig& c) -> auto& { return c.json; },
               "also emit JSON");

    PipelineConfig cfg;
    auto resolve = [&] {
        std::optional<std::uint64_t> file_seed;
        if (!config_path.empty()) {
            auto j = nlohmann::json::parse(io::read_text(config_path));
            pipeline::merge_json(j, cfg);
            if (j.contains("seed") && !j["seed"].is_null()) {
                file_seed = j["seed"].get<std::uint64_t>();
            }
        }
        flags.apply(cfg);
        cfg.seed = pipeline::resolve_seed(seed_flag, file_seed);
    };

    auto* ingest = app.add_subcommand("ingest", "build vocab.txt from the corpus");
    auto* build_index = app.add_subcommand("build-index", "build index.relidx");
    auto* search = app.add_subcommand("search", "BM25 search");
    auto* build_reprs = app.add_subcommand("build-reprs", "build reprs.relspr");
    auto* train_enc = app.add_subcommand("train-encoder", "train WordEmb");
    auto* train_ae = app.add_subcommand("train-autoencoder", "train WordEmbAE");
    auto* reduce_svd = app.add_subcommand("reduce-svd", "truncated SVD baseline");
    auto* reduce_pca = app.add_subcommand("reduce-pca", "PCA baseline");
    auto* embed_apps = app.add_subcommand("embed-apps", "build RelEmb and RelEmbAE");
    auto* expand = app.add_subcommand("expand", "expand a query");
    auto* eval_qe = app.add_subcommand("eval-qe", "query expansion NDCG table");
    auto* knn = app.add_subcommand("knn", "nearest apps");
    auto* classify = app.add_subcommand("classify", "cross-validated classification F1");
    auto* cluster = app.add_subcommand("cluster", "k-means and DBSCAN scores");
    auto* synth = app.add_subcommand("synth", "write a synthetic corpus and judgments");
    auto* run = app.add_subcommand("pipeline", "run every stage");

    std::string query;
    std::size_t topk = 10;
    search->add_option("--query", query, "query text")->required();
    search->add_option("--topk", topk, "results to return");

    std::string word_kind = "wordemb";
    expand->add_option("--query", query, "query text")->required();
    expand->add_option("--embedding", word_kind, "wordemb, wordembae, svd or pca");
    expand->add_option("--topk", topk, "results to return");

    std::string app_id;
    std::string app_kind = "relemb";
    std::size_t neighbours = 5;
    knn->add_option("--app", app_id, "app id")->required();
    knn->add_option("--kind", app_kind, "relemb or relembae");
    knn->add_option("--k", neighbours, "neighbours");

    synth::SyntheticSpec spec;
    synth->add_option("--topics", spec.topics, "topic count");
    synth->add_option("--docs", spec.docs_per_topic, "documents per topic");
    synth->add_option("--vocab", spec.vocab_per_topic, "words per topic");
    synth->add_option("--overlap", spec.overlap, "fraction of words shared with the next topic");

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        return app.exit(e);
    }

    try {
        resolve();
        if (ingest->parsed()) {
            auto vocab = pipeline::stage_ingest(cfg);
            std::cerr << "vocabulary: " << vocab.size() << " terms\n";
        } else if (build_index->parsed()) {
            pipeline::stage_build_index(cfg);
        } else if (search->parsed()) {
            auto vocab = pipeline::read_vocab(cfg);
            auto index = pipeline::read_index(cfg, vocab);
            auto corpus = pipeline::read_corpus(cfg);
            auto ids = to_term_ids(vocab, tokenize(query));
            pipeline::Table t;
            t.header = {"rank", "app_id", "score"};
            if (!ids.empty()) {
                auto hits = relemb::search(index, cfg.bm25, ids, topk);
                for (std::size_t i = 0; i < hits.size(); ++i) {
                    t.rows.push_back({std::to_string(i + 1), corpus.records[hits[i].doc].app_id,
                                      pipeline::fmt(hits[i].score)});
                }
            }
            print_table(cfg.json, t);
        } else if (build_reprs->parsed()) {
            pipeline::stage_build_reprs(cfg);
        } else if (train_enc->parsed()) {
            pipeline::stage_train_encoder(cfg);
        } else if (train_ae->parsed()) {
            pipeline::stage_train_autoencoder(cfg);
        } else if (reduce_svd->parsed()) {
            pipeline::stage_reduce(cfg, EmbeddingKind::SVD);
        } else if (reduce_pca->parsed()) {
            pipeline::stage_reduce(cfg, EmbeddingKind::PCA);
        } else if (embed_apps->parsed()) {
            pipeline::stage_embed_apps(cfg);
        } else if (expand->parsed()) {
            auto kind = parse_word_kind(word_kind);
            auto vocab = pipeline::read_vocab(cfg);
            auto emb = pipeline::read_embedding(cfg, word_embedding_file(kind), kind, vocab);
            auto tokens = tokenize(query);
            auto terms = expand_query(query_vector(tokens, vocab, emb), emb, cfg.expansion);
            pipeline::Table t;
            t.header = {"term", "similarity"};
            for (auto const& e : terms) {
                t.rows.push_back({vocab.term(e.term), pipeline::fmt(e.similarity)});
            }
            print_table(cfg.json, t);
        } else if (eval_qe->parsed()) {
            pipeline::stage_eval_qe(cfg);
            std::cout << io::read_text(cfg.artifact("qe_results.tsv"));
        } else if (knn->parsed()) {
            auto kind = parse_app_kind(app_kind);
            auto corpus = pipeline::read_corpus(cfg);
            auto vocab = pipeline::read_vocab(cfg);
            auto apps = pipeline::read_app_embeddings(cfg, corpus, vocab, kind);
            pipeline::Table t;
            t.header = {"rank", "app_id", "title", "category", "similarity"};
            auto hits = nearest_apps(app_id, apps, neighbours);
            for (std::size_t i = 0; i < hits.size(); ++i) {
                auto const& rec = corpus.records[*apps.find(hits[i].app_id)];
                t.rows.push_back({std::to_string(i + 1), hits[i].app_id, rec.title, rec.category,
                                  pipeline::fmt(hits[i].similarity)});
            }
            print_table(cfg.json, t);
        } else if (classify->parsed()) {
            pipeline::stage_classify(cfg);
            std::cout << io::read_text(cfg.artifact("cls_results.tsv"));
        } else if (cluster->parsed()) {
            pipeline::stage_cluster(cfg);
            std::cout << io::read_text(cfg.artifact("clu_results.tsv"));
        } else if (synth->parsed()) {
            spec.seed = cfg.seed;
            if (cfg.corpus.empty()) {
                cfg.corpus = cfg.artifact("synth_corpus.jsonl").string();
            }
            if (cfg.judgments.empty()) {
                cfg.judgments = cfg.artifact("synth_judgments.tsv").string();
            }
            synth::write_synthetic(synth::generate_synthetic(spec), cfg.corpus, cfg.judgments);
            std::cerr << "wrote " << cfg.corpus << " and " << cfg.judgments << "\n";
        } else if (run->parsed()) {
            pipeline::run_pipeline(cfg);
            for (auto name : {"qe_results.tsv", "cls_results.tsv", "clu_results.tsv"}) {
                std::cout << "# " << name << "\n" << io::read_text(cfg.artifact(name));
            }
        }
    } catch (std::exception const& e) {
        std::cerr << "relemb: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include <relemb/binary_io.hpp>

namespace {

struct Run {
    int status;
    std::string output;  // stdout and stderr interleaved
};

Run run(std::string const& args) {
    std::string cmd = std::string(RELEMB_CLI) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        return {-1, {}};
    }
    std::string out;
    std::array<char, 4096> buf{};
    while (auto n = fread(buf.data(), 1, buf.size(), pipe)) {
        out.append(buf.data(), n);
    }
    int rc = pclose(pipe);
    return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, out};
}

std::string const data = RELEMB_DATA_DIR;
std::string const work = RELEMB_WORK_DIR;

std::string tiny(std::string const& dir) {
    return "--corpus " + data + "/tiny/corpus.jsonl --artifacts " + work + "/" + dir;
}

}  // namespace

TEST(Cli, SearchOnTinyCorpus) {
    std::filesystem::remove_all(work + "/search");
    ASSERT_EQ(run("ingest " + tiny("search")).status, 0);
    ASSERT_EQ(run("build-index " + tiny("search")).status, 0);
    auto r = run("search --query music " + tiny("search"));
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("rank\tapp_id\tscore\n1\tD1\t0.509728"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("2\tD2\t0.469486"), std::string::npos) << r.output;
    EXPECT_EQ(r.output.find("D3"), std::string::npos);
    auto j = run("search --query music --json --topk 1 " + tiny("search"));
    ASSERT_EQ(j.status, 0);
    EXPECT_NE(j.output.find("\"app_id\": \"D1\""), std::string::npos) << j.output;
    EXPECT_EQ(j.output.find("D2"), std::string::npos);
}

TEST(Cli, EvalQeWithoutJudgmentsNamesTheFlag) {
    std::filesystem::remove_all(work + "/qe");
    ASSERT_EQ(run("ingest " + tiny("qe")).status, 0);
    ASSERT_EQ(run("build-index " + tiny("qe")).status, 0);
    auto r = run("eval-qe " + tiny("qe"));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.output.find("--judgments"), std::string::npos) << r.output;
}

TEST(Cli, ErrorsExitNonzero) {
    auto unknown = run("search --query music --no-such-flag");
    EXPECT_NE(unknown.status, 0);
    EXPECT_NE(unknown.output.find("no-such-flag"), std::string::npos) << unknown.output;
    auto missing = run("ingest --corpus /nonexistent/c.jsonl --artifacts " + work + "/missing");
    EXPECT_NE(missing.status, 0);
    EXPECT_NE(missing.output.find("/nonexistent/c.jsonl"), std::string::npos);
    EXPECT_NE(run("").status, 0);
    EXPECT_NE(run("frobnicate").status, 0);
}

TEST(Cli, FingerprintMismatchIsAnError) {
    std::filesystem::remove_all(work + "/fp");
    ASSERT_EQ(run("ingest " + tiny("fp")).status, 0);
    ASSERT_EQ(run("build-index " + tiny("fp")).status, 0);
    relemb::io::atomic_write(work + "/fp/vocab.txt", "alpha\nbeta\n");
    auto r = run("search --query music " + tiny("fp"));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.output.find("fingerprint"), std::string::npos) << r.output;
}

TEST(Cli, SynthThenPipelineOnTinyConfig) {
    std::string dir = work + "/synth";
    std::filesystem::remove_all(dir);
    std::string paths = "--corpus " + dir + "/c.jsonl --judgments " + dir + "/j.tsv --artifacts " + dir;
    auto s = run("synth --topics 3 --docs 20 --seed 7 " + paths);
    ASSERT_EQ(s.status, 0) << s.output;
    auto p = run("pipeline --hidden 16 --epochs 10 --svd-dim 8 --folds 3 --threads 1 " + paths);
    ASSERT_EQ(p.status, 0) << p.output;
    for (auto name : {"qe_results.tsv", "cls_results.tsv", "clu_results.tsv"}) {
        EXPECT_TRUE(std::filesystem::exists(dir + "/" + name)) << name;
    }
    auto cfg = relemb::io::read_text(dir + "/config.json");
    EXPECT_NE(cfg.find("\"seed\": 42"), std::string::npos) << cfg;
    auto knn = run("knn --app app-0-0 --k 3 " + paths);
    ASSERT_EQ(knn.status, 0) << knn.output;
    EXPECT_NE(knn.output.find("rank\tapp_id\ttitle\tcategory\tsimilarity"), std::string::npos);
    auto ex = run("expand --query \"" + std::string("wb") + "\" " + paths);
    EXPECT_EQ(ex.status, 0) << ex.output;
}

TEST(Cli, ConfigFileAndSeedPrecedence) {
    std::string dir = work + "/cfg";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    relemb::io::atomic_write(dir + "/config.json", R"({"seed": 5, "topdocs": 3})");
    std::string paths = "--corpus " + dir + "/c.jsonl --judgments " + dir + "/j.tsv --artifacts " + dir;
    ASSERT_EQ(run("synth --config " + dir + "/config.json " + paths).status, 0);
    auto from_file = relemb::io::read_text(dir + "/c.jsonl");
    ASSERT_EQ(run("synth --seed 5 " + paths).status, 0);
    EXPECT_EQ(relemb::io::read_text(dir + "/c.jsonl"), from_file);
    ASSERT_EQ(run("synth --config " + dir + "/config.json --seed 6 " + paths).status, 0);
    EXPECT_NE(relemb::io::read_text(dir + "/c.jsonl"), from_file);
    ASSERT_EQ(run("synth " + paths).status, 0);
    EXPECT_NE(relemb::io::read_text(dir + "/c.jsonl"), from_file);
}

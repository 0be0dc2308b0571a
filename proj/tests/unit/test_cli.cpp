#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "../support/oracles.hpp"
#include "vulngraph/cli.hpp"
#include "vulngraph/ingest.hpp"
#include "vulngraph/metrics.hpp"

using namespace vulngraph;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("vulngraph_cli_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    [[nodiscard]] std::string operator/(const std::string& name) const { return (path / name).string(); }
};

/// Chain of n nodes with a little code on each.
std::string chain_graph(int n) {
    RawGraphRecord r;
    r.name = "chain" + std::to_string(n);
    r.label = 1;
    for (int i = 0; i < n; ++i) {
        r.nodes.push_back({i, "x" + std::to_string(i % 17) + " = y + " + std::to_string(i % 5) + ";", "EXPR", i, std::nullopt});
        if (i > 0) {
            r.edges.push_back({i - 1, i, EdgeType::Ast});
            r.edges.push_back({i - 1, i, EdgeType::Ast});
        }
    }
    return graph_to_json(r).dump();
}

const std::vector<std::string> kSmall{"--set", "synth.n_graphs=40",         "--set", "synth.size_law.max_n=120",
                                      "--set", "embedder.dim=8",            "--set", "model.hidden=8",
                                      "--set", "model.layers=1",            "--set", "model.heads=2",
                                      "--set", "train.batch_size=8",        "--set", "train.max_iterations=12"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("synth is deterministic and re-ingests") {
    TempDir d("synth");
    REQUIRE(run(with({"synth", "--seed-data", "1", "--out", d / "a.jsonl"}, kSmall)).code == 0);
    REQUIRE(run(with({"synth", "--seed-data", "1", "--out", d / "b.jsonl"}, kSmall)).code == 0);
    CHECK(slurp(d / "a.jsonl") == slurp(d / "b.jsonl"));
    CHECK(fs::exists(d / "a.config.json"));
    CHECK(load_corpus_file(d / "a.jsonl").size() == 40);
    const Result ing = run(with({"ingest", "--corpus", d / "a.jsonl", "--out", d / "ing"}, kSmall));
    CHECK(ing.code == 0);
    CHECK(json::parse(slurp(d / "ing/summary.json"))["graphs"] == 40);
    CHECK(fs::exists(d / "ing/embedder.json"));
}

TEST_CASE("configuration errors exit with 2") {
    TempDir d("errors");
    const Result zero = run({"synth", "--set", "synth.n_graphs=0", "--out", d / "c.jsonl"});
    CHECK(zero.code == 2);
    CHECK(zero.err.find("n_graphs") != std::string::npos);
    CHECK(run({"synth", "--set", "synth.colour=1", "--out", d / "c.jsonl"}).code == 2);
    CHECK(run({"synth", "--ablation", "no-everything", "--out", d / "c.jsonl"}).code == 2);
    CHECK(run({"synth", "--config", d / "missing.json", "--out", d / "c.jsonl"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"train", "--corpus", d / "missing.jsonl", "--out", d / "t"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("train, eval, predict, report") {
    TempDir d("pipeline");
    REQUIRE(run(with({"synth", "--out", d / "c.jsonl"}, kSmall)).code == 0);

    const auto train_args = with({"train", "--corpus", d / "c.jsonl", "--seed-model", "4", "--seed-train", "5"}, kSmall);
    REQUIRE(run(with(train_args, {"--out", d / "t1"})).code == 0);
    REQUIRE(run(with(train_args, {"--out", d / "t2"})).code == 0);
    CHECK(slurp(d / "t1/history.csv") == slurp(d / "t2/history.csv"));
    CHECK(slurp(d / "t1/checkpoint.json") == slurp(d / "t2/checkpoint.json"));
    const json resolved = json::parse(slurp(d / "t1/resolved_config.json"));
    CHECK(resolved["model"]["refine"]["threshold_t"] == 40);
    CHECK(resolved["model"]["refine"]["appnp_l"] == 8);
    CHECK(resolved["model"]["refine"]["appnp_alpha"] == 0.2);
    CHECK(resolved["seeds"]["model"] == 4);
    CHECK(json::parse(slurp(d / "t1/split.json"))["test"].size() == 8);

    REQUIRE(run({"eval", "--checkpoint", d / "t1/checkpoint.json", "--corpus", d / "c.jsonl", "--out", d / "e1"}).code == 0);
    REQUIRE(run({"eval", "--checkpoint", d / "t1/checkpoint.json", "--corpus", d / "c.jsonl", "--jobs", "3", "--out",
                 d / "e2"})
                .code == 0);
    for (const char* f : {"metrics.json", "buckets.csv", "embeddings.tsv"}) {
        CHECK(slurp(d / ("e1/" + std::string(f))) == slurp(d / ("e2/" + std::string(f))));
    }
    const json m = json::parse(slurp(d / "e1/metrics.json"));
    CHECK(m["graphs"] == 8);
    CHECK(std::abs(m["bucket_weighted_accuracy"].get<double>() - m["metrics"]["accuracy"].get<double>()) <= 1e-12);
    CHECK(metrics::parse_embeddings_tsv(slurp(d / "e1/embeddings.tsv")).size() == 8);

    const auto records = load_corpus_file(d / "c.jsonl");
    {
        std::ofstream g(d / "g.json");
        g << graph_to_json(records[0]).dump();
    }
    const Result p1 = run({"predict", "--checkpoint", d / "t1/checkpoint.json", "--graph", d / "g.json"});
    const Result p2 = run({"predict", "--checkpoint", d / "t1/checkpoint.json", "--graph", d / "g.json"});
    REQUIRE(p1.code == 0);
    CHECK(p1.out == p2.out);
    const json line = json::parse(p1.out);
    CHECK(line["label"] == (line["probability"].get<double>() >= 0.5 ? 1 : 0));
    {
        std::ofstream g(d / "bad.json");
        g << R"({"name":"b","label":0,"nodes":[{"id":1,"code":"","kind":"K"}],"edges":[{"src":1,"dst":7,"etype":"AST"}]})";
    }
    CHECK(run({"predict", "--checkpoint", d / "t1/checkpoint.json", "--graph", d / "bad.json"}).code == 2);

    const Result rep = run({"report", "--checkpoint", d / "t1/checkpoint.json", "--corpus", d / "c.jsonl", "--split", "all"});
    CHECK(rep.code == 0);
    CHECK(rep.out.find("reduction") != std::string::npos);
    CHECK(run({"report", "--checkpoint", d / "t1/checkpoint.json", "--corpus", d / "c.jsonl", "--split", "dev"}).code ==
          2);
}

TEST_CASE("ablation flag is recorded") {
    TempDir d("ablation");
    REQUIRE(run(with({"synth", "--out", d / "c.jsonl"}, kSmall)).code == 0);
    REQUIRE(run(with({"train", "--corpus", d / "c.jsonl", "--ablation", "no-hgr", "--out", d / "t"}, kSmall)).code == 0);
    CHECK(json::parse(slurp(d / "t/resolved_config.json"))["model"]["ablations"]["use_hgr"] == false);
}

TEST_CASE("single-class training split exits with 3") {
    TempDir d("single");
    REQUIRE(run(with({"synth", "--set", "synth.vulnerable_fraction=0", "--out", d / "c.jsonl"}, kSmall)).code == 0);
    const Result r = run(with({"train", "--corpus", d / "c.jsonl", "--out", d / "t"}, kSmall));
    CHECK(r.code == 3);
    CHECK(r.err.find("single class") != std::string::npos);
}

TEST_CASE("an overfit checkpoint scores F1 = 1 on its training set") {
    TempDir d("overfit");
    const std::vector<std::string> cfg{"--set", "synth.n_graphs=20",       "--set", "synth.size_law.max_n=30",
                                       "--set", "embedder.dim=16",         "--set", "model.hidden=16",
                                       "--set", "model.layers=2",          "--set", "model.heads=2",
                                       "--set", "train.batch_size=20",     "--set", "train.max_iterations=300",
                                       "--set", "train.lr=0.005",          "--set", "train.split=[1.0,0.0,0.0]"};
    REQUIRE(run(with({"synth", "--seed-data", "8", "--out", d / "c.jsonl"}, cfg)).code == 0);
    REQUIRE(run(with({"train", "--corpus", d / "c.jsonl", "--seed-data", "8", "--out", d / "t"}, cfg)).code == 0);
    REQUIRE(run({"eval", "--checkpoint", d / "t/checkpoint.json", "--corpus", d / "c.jsonl", "--split", "all", "--out",
                 d / "e"})
                .code == 0);
    CHECK(json::parse(slurp(d / "e/metrics.json"))["metrics"]["f1"] == 1.0);
}

TEST_CASE("simplify") {
    TempDir d("simplify");
    {
        std::ofstream(d / "small.json") << chain_graph(30);
        std::ofstream(d / "big.json") << chain_graph(1000);
    }
    REQUIRE(run({"simplify", "--graph", d / "small.json", "--out", d / "s"}).code == 0);
    CHECK(json::parse(slurp(d / "s/simplified.json")) == json::parse(slurp(d / "small.json")));
    CHECK(json::parse(slurp(d / "s/trace.json"))["steps"].empty());

    REQUIRE(run({"simplify", "--graph", d / "big.json", "--out", d / "b"}).code == 0);
    const json trace = json::parse(slurp(d / "b/trace.json"));
    REQUIRE(trace["steps"].size() == 2);
    CHECK(trace["steps"][0]["n_after"] == 100);
    CHECK(trace["steps"][1]["n_after"] == 20);
    const RawGraphRecord out = load_graph_json(slurp(d / "b/simplified.json"));
    CHECK(out.nodes.size() == 20);
    CHECK(out.nodes.size() <= 40);
    const std::set<std::tuple<int, int, int>> unique = [&] {
        std::set<std::tuple<int, int, int>> s;
        for (const RawEdge& e : out.edges) {
            s.insert({e.src, e.dst, static_cast<int>(e.etype)});
        }
        return s;
    }();
    CHECK(unique.size() == out.edges.size());
    // kept nodes appear in input order, so consecutive chain ids stay linked
    for (const RawEdge& e : out.edges) {
        CHECK(out.nodes[static_cast<std::size_t>(e.dst)].id == out.nodes[static_cast<std::size_t>(e.src)].id + 1);
    }
    const Result again = run({"simplify", "--graph", d / "big.json", "--out", d / "b2"});
    CHECK(slurp(d / "b/simplified.json") == slurp(d / "b2/simplified.json"));
}

} // TEST_SUITE

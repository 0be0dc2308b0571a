#include <doctest.h>

#include "vulngraph/config.hpp"
#include "vulngraph/errors.hpp"

using namespace vulngraph;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("defaults resolve to the reference hyperparameters") {
    const RunConfig c = load_run_config({}, {});
    CHECK(c.model.refine.threshold_t == 40);
    CHECK(c.model.refine.appnp_l == 8);
    CHECK(c.model.refine.appnp_alpha == 0.2);
    CHECK(c.model.layers == 5);
    CHECK(c.model.heads == 4);
    CHECK(c.model.hidden == 64);
    CHECK(c.embedder.dim == 100);
    CHECK(c.model.feature_dim == 100);
    CHECK(c.train.batch_size == 1024);
    CHECK(c.train.max_iterations == 3000);
    CHECK(c.bucket_edges == metrics::default_bucket_edges());
    const json j = to_json(c);
    CHECK(j["model"]["refine"]["threshold_t"] == 40);
}

TEST_CASE("JSON round trip") {
    RunConfig c = load_run_config({}, std::vector<std::string>{"train.lr=0.01", "seeds.data=9", "embedder.dim=12"});
    CHECK(c.train.lr == 0.01);
    CHECK(c.seeds.data == 9);
    CHECK(c.synth.seed == 9);
    CHECK(c.model.feature_dim == 12);
    CHECK(c.synth.feature_dim == 12);
    const RunConfig back = run_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
}

TEST_CASE("unknown keys and stray seeds are rejected") {
    CHECK_THROWS_AS(run_config_from_json(json{{"trian", json::object()}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"lr", 0.1}, {"lrr", 1}}}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"seed", 1}}}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(json{{"synth", {{"seed", 1}}}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(json{{"model", {{"feature_dim", 3}}}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(json{{"model", {{"refine", {{"threshold", 3}}}}}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(json{{"embedder", {{"mode", "glove"}}}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"lr", "fast"}}}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(json{{"metrics", {{"bucket_edges", {0, 10, 5}}}}}), InputError);
}

TEST_CASE("overrides") {
    json doc = json::object();
    apply_override(doc, "model.refine.threshold_t=12");
    apply_override(doc, "embedder.mode=skipgram");
    apply_override(doc, "train.patience=null");
    apply_override(doc, "model.ablations.use_gt=false");
    CHECK(doc["model"]["refine"]["threshold_t"] == 12);
    CHECK(doc["embedder"]["mode"] == "skipgram");
    CHECK(doc["train"]["patience"].is_null());
    const RunConfig c = run_config_from_json(doc);
    CHECK(c.model.refine.threshold_t == 12);
    CHECK_FALSE(c.model.ablations.use_gt);
    CHECK_THROWS_AS(apply_override(doc, "novalue"), InputError);
    CHECK_THROWS_AS(apply_override(doc, "=3"), InputError);
    CHECK_THROWS_AS(apply_override(doc, "model..x=3"), InputError);
    apply_override(doc, "model.hidden=64");
    CHECK_THROWS_AS(apply_override(doc, "model.hidden.x=3"), InputError);
}

TEST_CASE("validation runs before any work") {
    CHECK_THROWS_AS(load_run_config({}, std::vector<std::string>{"synth.n_graphs=0"}), InputError);
    CHECK_THROWS_AS(load_run_config({}, std::vector<std::string>{"model.heads=3"}), InputError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/config.json", {}), InputError);
}

TEST_CASE("embedder construction") {
    EmbedderConfig hash;
    hash.dim = 6;
    CHECK(build_embedder(hash, 3, {}).embed("x") == TokenEmbedder::hashed(6, 3).embed("x"));
    EmbedderConfig sg;
    sg.mode = TokenEmbedder::Mode::SkipGram;
    sg.dim = 6;
    RawGraphRecord r;
    r.nodes = {{0, "a b c", "K", std::nullopt, std::nullopt}};
    const TokenEmbedder e = build_embedder(sg, 3, {r});
    CHECK(e.mode() == TokenEmbedder::Mode::SkipGram);
    CHECK(e.vocabulary().size() == 3);
}

} // TEST_SUITE

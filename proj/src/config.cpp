#include "vulngraph/config.hpp"

#include <fstream>
#include <sstream>

#include "vulngraph/errors.hpp"
#include "vulngraph/json_util.hpp"

namespace vulngraph {

using nlohmann::json;

void RunConfig::resolve() {
    synth.seed = seeds.data;
    train.seed = seeds.train;
    model.feature_dim = embedder.dim;
    synth.feature_dim = embedder.dim;
    if (embedder.dim < 1) {
        throw InputError("embedder.dim must be >= 1");
    }
    synth.validate();
    model.validate();
    train.validate();
    if (bucket_edges.empty()) {
        throw InputError("metrics.bucket_edges must not be empty");
    }
    for (std::size_t i = 1; i < bucket_edges.size(); ++i) {
        if (!(bucket_edges[i] > bucket_edges[i - 1])) {
            throw InputError("metrics.bucket_edges must be strictly increasing");
        }
    }
    if (bucket_edges.front() >= 1.0) {
        throw InputError("metrics.bucket_edges must start below 1 so every graph falls in a bucket");
    }
}

json to_json(const RunConfig& cfg) {
    json synth = to_json(cfg.synth);
    synth.erase("seed");
    synth.erase("feature_dim");
    json model = to_json(cfg.model);
    model.erase("feature_dim");
    json train = to_json(cfg.train);
    train.erase("seed");
    return {{"synth", std::move(synth)},
            {"embedder",
             {{"mode", cfg.embedder.mode == TokenEmbedder::Mode::Hash ? "hash" : "skipgram"},
              {"dim", cfg.embedder.dim},
              {"skipgram",
               {{"window", cfg.embedder.skipgram.window},
                {"negatives", cfg.embedder.skipgram.negatives},
                {"epochs", cfg.embedder.skipgram.epochs},
                {"lr", cfg.embedder.skipgram.lr}}}}},
            {"model", std::move(model)},
            {"train", std::move(train)},
            {"metrics", {{"bucket_edges", cfg.bucket_edges}}},
            {"seeds", {{"data", cfg.seeds.data}, {"model", cfg.seeds.model}, {"train", cfg.seeds.train}}}};
}

RunConfig run_config_from_json(const json& doc) {
    using namespace jsonutil;
    require_keys(doc, "config", {"synth", "embedder", "model", "train", "metrics", "seeds"});
    RunConfig cfg;
    if (const auto it = doc.find("synth"); it != doc.end()) {
        if (it->contains("seed")) {
            throw InputError("synth: unknown key 'seed' (set seeds.data)");
        }
        if (it->contains("feature_dim")) {
            throw InputError("synth: unknown key 'feature_dim' (set embedder.dim)");
        }
        from_json(*it, cfg.synth);
    }
    if (const auto it = doc.find("embedder"); it != doc.end()) {
        require_keys(*it, "embedder", {"mode", "dim", "skipgram"});
        std::string mode = "hash";
        read(*it, "embedder", "mode", mode);
        if (mode == "hash") {
            cfg.embedder.mode = TokenEmbedder::Mode::Hash;
        } else if (mode == "skipgram") {
            cfg.embedder.mode = TokenEmbedder::Mode::SkipGram;
        } else {
            throw InputError("embedder.mode: expected 'hash' or 'skipgram', got '" + mode + "'");
        }
        read(*it, "embedder", "dim", cfg.embedder.dim);
        if (const auto sg = it->find("skipgram"); sg != it->end()) {
            require_keys(*sg, "embedder.skipgram", {"window", "negatives", "epochs", "lr"});
            read(*sg, "embedder.skipgram", "window", cfg.embedder.skipgram.window);
            read(*sg, "embedder.skipgram", "negatives", cfg.embedder.skipgram.negatives);
            read(*sg, "embedder.skipgram", "epochs", cfg.embedder.skipgram.epochs);
            read(*sg, "embedder.skipgram", "lr", cfg.embedder.skipgram.lr);
        }
    }
    if (const auto it = doc.find("model"); it != doc.end()) {
        if (it->contains("feature_dim")) {
            throw InputError("model: unknown key 'feature_dim' (set embedder.dim)");
        }
        from_json(*it, cfg.model);
    }
    if (const auto it = doc.find("train"); it != doc.end()) {
        if (it->contains("seed")) {
            throw InputError("train: unknown key 'seed' (set seeds.train)");
        }
        from_json(*it, cfg.train);
    }
    if (const auto it = doc.find("metrics"); it != doc.end()) {
        require_keys(*it, "metrics", {"bucket_edges"});
        read(*it, "metrics", "bucket_edges", cfg.bucket_edges);
    }
    if (const auto it = doc.find("seeds"); it != doc.end()) {
        require_keys(*it, "seeds", {"data", "model", "train"});
        read(*it, "seeds", "data", cfg.seeds.data);
        read(*it, "seeds", "model", cfg.seeds.model);
        read(*it, "seeds", "train", cfg.seeds.train);
    }
    cfg.resolve();
    return cfg;
}

void apply_override(json& doc, std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw InputError("--set expects key=value, got '" + std::string(assignment) + "'");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw InputError("--set: malformed key '" + key + "'");
        }
        if (!node->is_object()) {
            if (!node->is_null()) {
                throw InputError("--set: '" + key + "' descends into a non-object");
            }
            *node = json::object();
        }
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

RunConfig load_run_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
    json doc = json::object();
    if (!path.empty()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw InputError("cannot open config " + path.string());
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        try {
            doc = json::parse(buf.str());
        } catch (const json::parse_error& e) {
            throw InputError("config " + path.string() + ": malformed JSON: " + e.what());
        }
    }
    for (const std::string& o : overrides) {
        apply_override(doc, o);
    }
    return run_config_from_json(doc);
}

TokenEmbedder build_embedder(const EmbedderConfig& cfg, std::uint64_t seed, const std::vector<RawGraphRecord>& records) {
    if (cfg.mode == TokenEmbedder::Mode::Hash) {
        return TokenEmbedder::hashed(cfg.dim, seed);
    }
    return fit_token_embeddings(token_corpus(records), cfg.dim, cfg.skipgram, seed);
}

} // namespace vulngraph

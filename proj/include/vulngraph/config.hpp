#ifndef VULNGRAPH_CONFIG_HPP
#define VULNGRAPH_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vulngraph/ingest.hpp"
#include "vulngraph/metrics.hpp"
#include "vulngraph/model.hpp"
#include "vulngraph/synth.hpp"
#include "vulngraph/train.hpp"

namespace vulngraph {

struct EmbedderConfig {
    TokenEmbedder::Mode mode = TokenEmbedder::Mode::Hash;
    int dim = 100;
    SkipGramConfig skipgram;
};

/// The three named randomness sources of a run.
struct Seeds {
    std::uint64_t data = 1;  ///< corpus synthesis, embedder, dataset split
    std::uint64_t model = 2; ///< parameter initialization
    std::uint64_t train = 3; ///< batch order and dropout
};

/// One document for every stage. Sections: synth, embedder, model, train,
/// metrics, seeds. Unknown keys anywhere are rejected; per-stage seeds are
/// taken from `seeds` only.
struct RunConfig {
    SynthConfig synth;
    EmbedderConfig embedder;
    ModelConfig model;
    TrainConfig train;
    std::vector<double> bucket_edges = metrics::default_bucket_edges();
    Seeds seeds;

    /// Pushes seeds and the embedder width into the stage configs and
    /// validates everything.
    void resolve();
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& doc);

/// Applies one `dotted.key=value` override to a config document. The value
/// is parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Reads `path` (empty for defaults), applies overrides, parses and resolves.
RunConfig load_run_config(const std::filesystem::path& path, std::span<const std::string> overrides);

/// Hash embedder directly; skip-gram is fitted on the token stream of `records`.
TokenEmbedder build_embedder(const EmbedderConfig& cfg, std::uint64_t seed, const std::vector<RawGraphRecord>& records);

} // namespace vulngraph

#endif // VULNGRAPH_CONFIG_HPP

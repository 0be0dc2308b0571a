#ifndef VULNGRAPH_SYNTH_HPP
#define VULNGRAPH_SYNTH_HPP

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "vulngraph/graph.hpp"
#include "vulngraph/ingest.hpp"

namespace vulngraph {

struct SizeLaw {
    double pareto_shape = 1.0;
    int min_n = 10;
    int max_n = 600;
};

struct SynthConfig {
    int n_graphs = 1000;
    SizeLaw size_law;
    int motif_size = 6;
    int feature_dim = 32;
    double vulnerable_fraction = 0.4;
    double noise_edge_prob = 0.01;
    std::uint64_t seed = 0;

    /// Throws InputError when a field is out of range.
    void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
/// Fills `cfg` from `doc`; unknown keys are rejected.
void from_json(const nlohmann::json& doc, SynthConfig& cfg);

/// Seeded corpus of code-like graph records.
///
/// Each graph is a random tree over a node count drawn from a truncated
/// Pareto law, plus noise edges with probability noise_edge_prob per node
/// pair. Node code is a short string of background tokens. A vulnerable
/// graph additionally carries a clique of motif_size nodes whose code also
/// contains a fixed pair of signature tokens; those nodes are flagged `key`.
/// Graph i depends only on (seed, i).
std::vector<RawGraphRecord> generate_records(const SynthConfig& cfg);

/// The hash embedder whose features generate_corpus attaches.
TokenEmbedder synth_embedder(const SynthConfig& cfg);

/// generate_records() ingested with synth_embedder().
std::vector<LabeledGraph> generate_corpus(const SynthConfig& cfg);

/// Inverse-CDF draw from the truncated Pareto law, rounded down to an integer.
int sample_node_count(const SizeLaw& law, Rng& rng);

} // namespace vulngraph

#endif // VULNGRAPH_SYNTH_HPP

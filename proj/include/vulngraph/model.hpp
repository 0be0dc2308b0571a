#ifndef VULNGRAPH_MODEL_HPP
#define VULNGRAPH_MODEL_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vulngraph/encoder.hpp"
#include "vulngraph/graph.hpp"
#include "vulngraph/ingest.hpp"
#include "vulngraph/sapool.hpp"

namespace vulngraph {

/// Mechanisms that can be switched off for ablation runs.
struct Ablations {
    bool use_hgr = true; ///< hierarchical refinement
    bool use_gnn = true; ///< graph-convolution sublayers
    bool use_gt = true;  ///< attention + feed-forward sublayers
};

struct ModelConfig {
    int feature_dim = 100;
    int hidden = 64;
    int layers = 5;
    int heads = 4;
    double dropout = 0.2;
    sapool::RefineConfig refine;
    Ablations ablations;

    void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
void from_json(const nlohmann::json& doc, ModelConfig& cfg);

struct ClassifierParams {
    Matrix w_c1; ///< hidden x hidden
    Matrix w_c2; ///< hidden x 1
};

struct ModelParams {
    sapool::SAPoolParams pool;
    Matrix adapter_raw;    ///< feature_dim x hidden, for unrefined graphs
    Matrix adapter_pooled; ///< hidden x hidden, for refined graphs
    encoder::EncoderParams encoder;
    ClassifierParams head;

    template <class F>
    void for_each(F&& f) {
        pool.for_each(f);
        f("adapter_raw", adapter_raw);
        f("adapter_pooled", adapter_pooled);
        encoder.for_each(f);
        f("head.w_c1", head.w_c1);
        f("head.w_c2", head.w_c2);
    }

    template <class F>
    void for_each(F&& f) const {
        const_cast<ModelParams*>(this)->for_each([&f](const std::string& name, Matrix& m) {
            f(name, static_cast<const Matrix&>(m));
        });
    }

    /// Same shapes, all zeros.
    [[nodiscard]] ModelParams zeros_like() const;
    void set_zero();
    [[nodiscard]] long long size() const;
};

/// True when the tensor `name` takes part in the forward pass under `cfg`.
bool parameter_active(const ModelConfig& cfg, std::string_view name);

struct Model {
    ModelConfig config;
    ModelParams params;

    static Model init(const ModelConfig& config, std::uint64_t seed);

    [[nodiscard]] long long active_parameter_count() const;
};

struct ForwardOptions {
    bool training = false;
    Rng* rng = nullptr;
    const std::vector<std::vector<int>>* frozen = nullptr;
};

struct ForwardPass {
    ad::Var probability; ///< 1 x 1
    ad::Var logit;       ///< 1 x 1
    ad::Var embedding;   ///< 1 x hidden
    sapool::RefineTrace trace;
    int nodes_in = 0;
    int nodes_after = 0;
    std::vector<int> origin; ///< input index of each node that reached the encoder
};

/// Refinement (unless ablated), width adapter, encoder, classifier head.
/// Gradients land in `grads` when the tape records.
ForwardPass forward(ad::Tape& tape, const Model& model, ModelParams* grads, const LabeledGraph& g,
                    const ForwardOptions& opt = {});

struct Prediction {
    std::string name;
    double probability = 0.0;
    int predicted_label = 0;
    RowVector embedding;
    sapool::RefineTrace trace;
    int nodes_in = 0;
    int nodes_after = 0;
};

/// Eval-mode forward without gradient recording.
Prediction predict(const Model& model, const LabeledGraph& g, double threshold = 0.5);

/// Batch prediction; `jobs` > 1 spreads graphs over threads, output order is
/// the input order.
std::vector<Prediction> predict_all(const Model& model, std::span<const LabeledGraph> graphs, double threshold = 0.5,
                                    int jobs = 1);

/// 1 - mean(nodes_after) / mean(nodes_in); 0 for an empty set.
double simplification_ratio(std::span<const Prediction> predictions);

/// sigmoid(ReLU(o W_c1) W_c2)
double classify(const RowVector& o, const ClassifierParams& params);
ad::Var classify(ad::Var o, ad::Var w_c1, ad::Var w_c2, ad::Var* logit_out = nullptr);

/// Versioned checkpoint: config, config hash, every tensor with its shape,
/// and optionally the token embedder and free-form metadata.
struct Checkpoint {
    Model model;
    std::optional<TokenEmbedder> embedder;
    nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

} // namespace vulngraph

#endif // VULNGRAPH_MODEL_HPP

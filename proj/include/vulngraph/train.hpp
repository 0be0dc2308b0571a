#ifndef VULNGRAPH_TRAIN_HPP
#define VULNGRAPH_TRAIN_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulngraph/metrics.hpp"
#include "vulngraph/model.hpp"

namespace vulngraph {

struct TrainConfig {
    int batch_size = 1024;
    int max_iterations = 3000; ///< optimizer steps
    double lr = 1e-3;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::array<double, 3> split{0.7, 0.1, 0.2};
    std::uint64_t seed = 0; ///< batch shuffling and dropout
    double threshold = 0.5;
    std::optional<int> patience; ///< epochs without validation-F1 gain

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
void from_json(const nlohmann::json& doc, TrainConfig& cfg);

/// Mean binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> probs, std::span<const int> labels);

/// Positions into the corpus.
struct Split {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

/// Seeded shuffle, then contiguous cuts of floor(r * M) for validation and
/// test; the remainder goes to training.
Split split_dataset(std::size_t corpus_size, const std::array<double, 3>& ratios, std::uint64_t seed);

std::vector<LabeledGraph> gather(std::span<const LabeledGraph> corpus, std::span<const int> positions);

/// Decoupled-weight-decay Adam over the active tensors of a model.
class AdamW {
public:
    AdamW(const TrainConfig& cfg, const Model& model);

    void step(Model& model, const ModelParams& grads);
    [[nodiscard]] long long steps_taken() const { return t_; }

private:
    double lr_, wd_, beta1_, beta2_, eps_;
    long long t_ = 0;
    ModelParams m_;
    ModelParams v_;
};

struct HistoryRow {
    int step = 0;
    int epoch = 0;
    double loss = 0.0;
    std::optional<metrics::Metrics> val;
};

struct TrainResult {
    Model best;         ///< checkpoint with the highest validation F1
    Model last;         ///< parameters after the final step
    int best_step = 0;
    double best_val_f1 = 0.0;
    std::optional<metrics::Metrics> last_val; ///< validation metrics of `last`
    std::vector<HistoryRow> history;
};

/// Minibatch training from `init`. Throws DomainError when the training set
/// holds a single class.
TrainResult train(const Model& init, std::span<const LabeledGraph> train_set, std::span<const LabeledGraph> val_set,
                  const TrainConfig& cfg);

/// Columns: step,epoch,loss,val_accuracy,val_precision,val_recall,val_f1.
/// Validation cells are empty on steps without an evaluation.
std::string history_csv(std::span<const HistoryRow> history);

struct Evaluation {
    std::vector<Prediction> predictions;
    metrics::Metrics metrics;
};

Evaluation evaluate(const Model& model, std::span<const LabeledGraph> graphs, double threshold = 0.5, int jobs = 1);

struct GradCheckEntry {
    std::string name;
    long long checked = 0;
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
};

/// Central differences against the analytical gradient of the BCE loss of
/// one graph, for every active tensor. Top-k selections are frozen at those
/// of the unperturbed pass. With `training` the dropout masks are re-drawn
/// from `dropout_seed` on every evaluation, so they are fixed as well.
/// Relative error per tensor: max |analytic - numeric| over max(|analytic|,
/// |numeric|, 1e-6), both maxima taken over the tensor.
GradCheckReport check_gradients(const Model& model, const LabeledGraph& g, double step = 1e-5, bool training = false,
                                std::uint64_t dropout_seed = 0);

} // namespace vulngraph

#endif // VULNGRAPH_TRAIN_HPP

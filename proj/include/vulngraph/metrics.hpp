#ifndef VULNGRAPH_METRICS_HPP
#define VULNGRAPH_METRICS_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulngraph/tensor.hpp"

namespace vulngraph::metrics {

struct ConfusionCounts {
    long long tp = 0;
    long long fp = 0;
    long long tn = 0;
    long long fn = 0;

    [[nodiscard]] long long total() const { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Accuracy, precision, recall and F1. A ratio with a zero denominator is
/// reported as 0 and flagged instead of raising.
struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    ConfusionCounts counts;
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f1_degenerate = false;
};

/// Hard labels from probabilities: 1 iff p >= threshold.
std::vector<int> threshold_labels(std::span<const double> probs, double threshold);

Metrics compute_metrics(std::span<const double> probs, std::span<const int> labels, double threshold = 0.5);
Metrics metrics_from_labels(std::span<const int> predicted, std::span<const int> labels);
Metrics metrics_from_counts(const ConfusionCounts& c);

nlohmann::json to_json(const Metrics& m);

/// Node-count bucket (lo, hi]; hi is +inf for the last bucket.
struct Bucket {
    double lo = 0.0;
    double hi = 0.0;
    long long count = 0;
    long long correct = 0;

    [[nodiscard]] std::optional<double> accuracy() const;
};

struct BucketedReport {
    std::vector<Bucket> buckets;

    /// Count-weighted mean of bucket accuracies.
    [[nodiscard]] double weighted_accuracy() const;
    [[nodiscard]] long long total() const;
};

/// Boundaries 0, 25, 50, 100, 200, 300; the last bucket is (300, inf).
std::vector<double> default_bucket_edges();

/// Assigns each sample to (edges[i], edges[i+1]] by its pre-refinement node
/// count. `edges` must be strictly increasing; the final bucket is open-ended.
BucketedReport bucketed_accuracy(std::span<const int> predicted, std::span<const int> labels,
                                 std::span<const int> node_counts, std::span<const double> edges);

/// Columns: lo,hi,count,correct,accuracy. Empty buckets carry accuracy "NA".
std::string to_csv(const BucketedReport& report);

struct EmbeddingRow {
    std::string name;
    int label = 0;
    RowVector embedding;
};

/// Header "name<TAB>label<TAB>e0..e{dim-1}", then one row per input in order.
std::string embeddings_tsv(std::span<const EmbeddingRow> rows, int dim);
std::vector<EmbeddingRow> parse_embeddings_tsv(const std::string& text);
/// Throws std::runtime_error when the path cannot be written.
void export_embeddings(std::span<const EmbeddingRow> rows, int dim, const std::filesystem::path& path);

/// Shortest decimal text that reads back to the same double.
std::string format_real(double v);

} // namespace vulngraph::metrics

#endif // VULNGRAPH_METRICS_HPP

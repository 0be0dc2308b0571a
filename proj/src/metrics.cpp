#include "vulngraph/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "vulngraph/errors.hpp"

namespace vulngraph::metrics {

std::vector<int> threshold_labels(std::span<const double> probs, double threshold) {
    std::vector<int> out;
    out.reserve(probs.size());
    for (const double p : probs) {
        out.push_back(p >= threshold ? 1 : 0);
    }
    return out;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
    Metrics m;
    m.counts = c;
    const auto total = static_cast<double>(c.total());
    m.accuracy = total > 0 ? static_cast<double>(c.tp + c.tn) / total : 0.0;
    if (c.tp + c.fp > 0) {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
        m.precision_degenerate = true;
    }
    if (c.tp + c.fn > 0) {
        m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
        m.recall_degenerate = true;
    }
    if (m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.f1_degenerate = true;
    }
    return m;
}

Metrics metrics_from_labels(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size()) {
        throw InputError("compute_metrics: predictions and labels differ in length");
    }
    if (labels.empty()) {
        throw InputError("compute_metrics: no samples");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pos = predicted[i] == 1;
        const bool truth = labels[i] == 1;
        if (pos && truth) {
            ++c.tp;
        } else if (pos) {
            ++c.fp;
        } else if (truth) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return metrics_from_counts(c);
}

Metrics compute_metrics(std::span<const double> probs, std::span<const int> labels, double threshold) {
    if (probs.size() != labels.size()) {
        throw InputError("compute_metrics: predictions and labels differ in length");
    }
    const auto predicted = threshold_labels(probs, threshold);
    return metrics_from_labels(predicted, labels);
}

nlohmann::json to_json(const Metrics& m) {
    return {{"accuracy", m.accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"counts", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn}, {"fn", m.counts.fn}}},
            {"degenerate",
             {{"precision", m.precision_degenerate}, {"recall", m.recall_degenerate}, {"f1", m.f1_degenerate}}}};
}

std::optional<double> Bucket::accuracy() const {
    if (count == 0) {
        return std::nullopt;
    }
    return static_cast<double>(correct) / static_cast<double>(count);
}

double BucketedReport::weighted_accuracy() const {
    double weighted = 0.0;
    long long n = 0;
    for (const Bucket& b : buckets) {
        if (const auto acc = b.accuracy()) {
            weighted += *acc * static_cast<double>(b.count);
            n += b.count;
        }
    }
    return n > 0 ? weighted / static_cast<double>(n) : 0.0;
}

long long BucketedReport::total() const {
    long long n = 0;
    for (const Bucket& b : buckets) {
        n += b.count;
    }
    return n;
}

std::vector<double> default_bucket_edges() { return {0.0, 25.0, 50.0, 100.0, 200.0, 300.0}; }

BucketedReport bucketed_accuracy(std::span<const int> predicted, std::span<const int> labels,
                                 std::span<const int> node_counts, std::span<const double> edges) {
    if (predicted.size() != labels.size() || labels.size() != node_counts.size()) {
        throw InputError("bucketed_accuracy: input lengths differ");
    }
    if (edges.empty()) {
        throw InputError("bucketed_accuracy: no bucket edges");
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) {
            throw InputError("bucketed_accuracy: edges must be strictly increasing");
        }
    }
    BucketedReport report;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const double hi = i + 1 < edges.size() ? edges[i + 1] : std::numeric_limits<double>::infinity();
        report.buckets.push_back(Bucket{edges[i], hi, 0, 0});
    }
    for (std::size_t s = 0; s < labels.size(); ++s) {
        const auto n = static_cast<double>(node_counts[s]);
        if (!(n > edges.front())) {
            throw InputError("bucketed_accuracy: node count " + std::to_string(node_counts[s]) +
                             " falls below the first bucket");
        }
        for (Bucket& b : report.buckets) {
            if (n > b.lo && n <= b.hi) {
                ++b.count;
                b.correct += predicted[s] == labels[s] ? 1 : 0;
                break;
            }
        }
    }
    return report;
}

std::string format_real(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    // try increasing precision until the text parses back exactly
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

std::string to_csv(const BucketedReport& report) {
    std::string out = "lo,hi,count,correct,accuracy\n";
    for (const Bucket& b : report.buckets) {
        const auto acc = b.accuracy();
        out += format_real(b.lo) + "," + format_real(b.hi) + "," + std::to_string(b.count) + "," +
               std::to_string(b.correct) + "," + (acc ? format_real(*acc) : std::string("NA")) + "\n";
    }
    return out;
}

std::string embeddings_tsv(std::span<const EmbeddingRow> rows, int dim) {
    std::string out = "name\tlabel";
    for (int i = 0; i < dim; ++i) {
        out += "\te" + std::to_string(i);
    }
    out += '\n';
    for (const EmbeddingRow& r : rows) {
        if (r.embedding.size() != dim) {
            throw InputError("export_embeddings: embedding width differs from header");
        }
        out += r.name + "\t" + std::to_string(r.label);
        for (int i = 0; i < dim; ++i) {
            out += "\t" + format_real(r.embedding(i));
        }
        out += '\n';
    }
    return out;
}

std::vector<EmbeddingRow> parse_embeddings_tsv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<EmbeddingRow> rows;
    if (!std::getline(in, line)) {
        throw InputError("embeddings TSV: missing header");
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::size_t pos = 0;
        for (;;) {
            const std::size_t tab = line.find('\t', pos);
            cells.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
            if (tab == std::string::npos) {
                break;
            }
            pos = tab + 1;
        }
        if (cells.size() < 2) {
            throw InputError("embeddings TSV: short row");
        }
        EmbeddingRow r;
        r.name = cells[0];
        r.label = std::stoi(cells[1]);
        r.embedding.resize(static_cast<Eigen::Index>(cells.size() - 2));
        for (std::size_t i = 2; i < cells.size(); ++i) {
            r.embedding(static_cast<Eigen::Index>(i - 2)) = std::stod(cells[i]);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

void export_embeddings(std::span<const EmbeddingRow> rows, int dim, const std::filesystem::path& path) {
    const std::string text = embeddings_tsv(rows, dim);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

} // namespace vulngraph::metrics

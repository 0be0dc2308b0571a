#ifndef VULNGRAPH_SAPOOL_HPP
#define VULNGRAPH_SAPOOL_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vulngraph/autograd.hpp"
#include "vulngraph/graph.hpp"

/// Importance-based graph simplification: an MLP projector, parameter-free
/// personalized propagation, learnable top-k node selection with sigmoid
/// gating, repeated until the graph fits under a node-count threshold.
namespace vulngraph::sapool {

/// Pooling-rate schedule: iteration i keeps min(start + i * step, cap).
struct KSchedule {
    double start = 0.1;
    double step = 0.1;
    double cap = 0.5;

    [[nodiscard]] double at(int iteration) const;
};

struct RefineConfig {
    int threshold_t = 40;
    int appnp_l = 8;
    double appnp_alpha = 0.2;
    KSchedule k_schedule;
    int max_iters = 16;

    void validate() const;
};

nlohmann::json to_json(const RefineConfig& cfg);
void from_json(const nlohmann::json& doc, RefineConfig& cfg);

/// Projector and scoring parameters, shared by every refinement iteration.
/// The first iteration reads raw features through w_m2_in; later iterations
/// read hidden-width features through w_m2_hidden.
struct SAPoolParams {
    Matrix w_m2_in;     ///< d x hidden
    Matrix w_m2_hidden; ///< hidden x hidden
    Matrix w_m1;        ///< hidden x hidden
    Matrix h;           ///< hidden x 1 scoring vector
    double dropout_rate = 0.2;

    static SAPoolParams init(int in_dim, int hidden, double dropout_rate, Rng& rng);

    template <class F>
    void for_each(F&& f) {
        f("pool.w_m2_in", w_m2_in);
        f("pool.w_m2_hidden", w_m2_hidden);
        f("pool.w_m1", w_m1);
        f("pool.h", h);
    }
};

enum class Termination { BelowThreshold, MaxIters };

struct RefineStep {
    int n_before = 0;
    int n_after = 0;
    double k_used = 0.0;
    std::vector<int> kept_indices; ///< positions in the pre-step graph

    friend bool operator==(const RefineStep&, const RefineStep&) = default;
};

struct RefineTrace {
    std::vector<RefineStep> steps;
    Termination terminated_by = Termination::BelowThreshold;

    /// kept_indices of every step, in order; feed back as frozen selections.
    [[nodiscard]] std::vector<std::vector<int>> selections() const;
};

nlohmann::json to_json(const RefineTrace& trace);

/// max(1, ceil(k * n)), with a small tolerance so that e.g. 0.3 * 100 keeps 30.
int keep_count(double k, int n);

/// Forward-pass knobs shared by pool_once and refine.
struct PoolContext {
    bool training = false;
    Rng* rng = nullptr; ///< dropout source; required when training
    /// Per-iteration index lists that replace top-k selection (gradient checks).
    const std::vector<std::vector<int>>* frozen = nullptr;
};

/// Graph state between pooling iterations.
struct WorkingGraph {
    ad::Var features;
    Adjacency adjacency;
    std::vector<int> origin; ///< index of each current node in the input graph
};

/// Parameter leaves of one forward pass.
struct BoundParams {
    ad::Var w_m2_in;
    ad::Var w_m2_hidden;
    ad::Var w_m1;
    ad::Var h;
    double dropout_rate = 0.0;
};

BoundParams bind(ad::Tape& tape, const SAPoolParams& p, SAPoolParams* grads);

ad::Var project_features(ad::Var x, const BoundParams& p, int iteration, const PoolContext& ctx);
/// Dropout(ReLU(X W_m2) W_m1); `iteration` 0 selects w_m2_in.
Matrix project_features(const Matrix& x, const SAPoolParams& p, int iteration, bool training, Rng& rng);

Matrix appnp_propagate(const Matrix& x0, const NormalizedAdjacency& norm_adj, int l, double alpha);

ad::Var score_nodes(ad::Var x, ad::Var h);
/// X h / ||h||_2. Throws NumericalError for a zero h.
Vector score_nodes(const Matrix& x, const Vector& h);

/// Indices of the keep_count(k, N) highest scores, ties toward lower index,
/// returned ascending. Throws InputError unless 0 < k < 1.
std::vector<int> select_topk(const Vector& z, double k);

struct PoolOutcome {
    WorkingGraph graph;
    std::vector<int> kept;
    ad::Var scores; ///< scores of all pre-step nodes (N x 1)
};

/// One pooling layer: project, propagate over the re-normalized adjacency,
/// score, keep the top-k subgraph and gate kept rows by sigmoid(score).
PoolOutcome pool_once(const WorkingGraph& g, const BoundParams& p, const RefineConfig& cfg, double k, int iteration,
                      const PoolContext& ctx);

struct Refined {
    WorkingGraph graph;
    RefineTrace trace;
    bool pooled = false; ///< false when the input already fit under the threshold
};

/// Self-adaptive loop: graphs with N <= T pass through untouched (raw
/// features); larger graphs are pooled with the k schedule until N <= T or
/// max_iters steps ran.
Refined refine(ad::Tape& tape, const LabeledGraph& g, const BoundParams& p, const RefineConfig& cfg,
               const PoolContext& ctx);

/// Inference-only convenience: returns the simplified graph (gated hidden
/// features, sliced key mask and metadata) with its trace.
std::pair<LabeledGraph, RefineTrace> refine_graph(const LabeledGraph& g, const SAPoolParams& params,
                                                  const RefineConfig& cfg, bool training, Rng& rng);

} // namespace vulngraph::sapool

#endif // VULNGRAPH_SAPOOL_HPP

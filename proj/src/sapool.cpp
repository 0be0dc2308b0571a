#include "vulngraph/sapool.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vulngraph/errors.hpp"
#include "vulngraph/json_util.hpp"

namespace vulngraph::sapool {

using nlohmann::json;

double KSchedule::at(int iteration) const {
    const double k = std::min(start + step * iteration, cap);
    // snap to a decimal grid so 0.1 + 2 * 0.1 is 0.3, not 0.30000000000000004
    return std::round(k * 1e12) / 1e12;
}

void RefineConfig::validate() const {
    if (threshold_t < 1) {
        throw InputError("refine.threshold_t must be >= 1");
    }
    if (appnp_l < 0) {
        throw InputError("refine.appnp_l must be >= 0");
    }
    if (!(appnp_alpha >= 0.0 && appnp_alpha <= 1.0)) {
        throw InputError("refine.appnp_alpha must be in [0, 1]");
    }
    const KSchedule& k = k_schedule;
    if (!(k.start > 0.0 && k.start <= k.cap && k.cap < 1.0) || k.step < 0.0) {
        throw InputError("refine.k_schedule needs 0 < start <= cap < 1 and step >= 0");
    }
    if (max_iters < 1) {
        throw InputError("refine.max_iters must be >= 1");
    }
}

json to_json(const RefineConfig& cfg) {
    return {{"threshold_t", cfg.threshold_t},
            {"appnp_l", cfg.appnp_l},
            {"appnp_alpha", cfg.appnp_alpha},
            {"k_schedule", {{"start", cfg.k_schedule.start}, {"step", cfg.k_schedule.step}, {"cap", cfg.k_schedule.cap}}},
            {"max_iters", cfg.max_iters}};
}

void from_json(const json& doc, RefineConfig& cfg) {
    using namespace jsonutil;
    require_keys(doc, "refine", {"threshold_t", "appnp_l", "appnp_alpha", "k_schedule", "max_iters"});
    read(doc, "refine", "threshold_t", cfg.threshold_t);
    read(doc, "refine", "appnp_l", cfg.appnp_l);
    read(doc, "refine", "appnp_alpha", cfg.appnp_alpha);
    read(doc, "refine", "max_iters", cfg.max_iters);
    if (const auto it = doc.find("k_schedule"); it != doc.end()) {
        require_keys(*it, "refine.k_schedule", {"start", "step", "cap"});
        read(*it, "refine.k_schedule", "start", cfg.k_schedule.start);
        read(*it, "refine.k_schedule", "step", cfg.k_schedule.step);
        read(*it, "refine.k_schedule", "cap", cfg.k_schedule.cap);
    }
}

SAPoolParams SAPoolParams::init(int in_dim, int hidden, double dropout_rate, Rng& rng) {
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw InputError("dropout rate must be in [0, 1)");
    }
    SAPoolParams p;
    p.w_m2_in = glorot_uniform(in_dim, hidden, rng);
    p.w_m2_hidden = glorot_uniform(hidden, hidden, rng);
    p.w_m1 = glorot_uniform(hidden, hidden, rng);
    p.h = glorot_uniform(hidden, 1, rng);
    while (p.h.norm() == 0.0) {
        p.h = glorot_uniform(hidden, 1, rng);
    }
    p.dropout_rate = dropout_rate;
    return p;
}

std::vector<std::vector<int>> RefineTrace::selections() const {
    std::vector<std::vector<int>> out;
    out.reserve(steps.size());
    for (const RefineStep& s : steps) {
        out.push_back(s.kept_indices);
    }
    return out;
}

json to_json(const RefineTrace& trace) {
    json steps = json::array();
    for (const RefineStep& s : trace.steps) {
        steps.push_back({{"n_before", s.n_before},
                         {"n_after", s.n_after},
                         {"k_used", s.k_used},
                         {"kept_indices", s.kept_indices}});
    }
    return {{"steps", std::move(steps)},
            {"terminated_by", trace.terminated_by == Termination::BelowThreshold ? "below_threshold" : "max_iters"}};
}

int keep_count(double k, int n) {
    const auto m = static_cast<int>(std::ceil(k * n - 1e-9));
    return std::clamp(m, 1, n);
}

BoundParams bind(ad::Tape& tape, const SAPoolParams& p, SAPoolParams* grads) {
    BoundParams b;
    b.w_m2_in = tape.parameter(p.w_m2_in, grads != nullptr ? &grads->w_m2_in : nullptr);
    b.w_m2_hidden = tape.parameter(p.w_m2_hidden, grads != nullptr ? &grads->w_m2_hidden : nullptr);
    b.w_m1 = tape.parameter(p.w_m1, grads != nullptr ? &grads->w_m1 : nullptr);
    b.h = tape.parameter(p.h, grads != nullptr ? &grads->h : nullptr);
    b.dropout_rate = p.dropout_rate;
    return b;
}

ad::Var project_features(ad::Var x, const BoundParams& p, int iteration, const PoolContext& ctx) {
    const ad::Var first = iteration == 0 ? p.w_m2_in : p.w_m2_hidden;
    if (x.cols() != first.rows()) {
        throw InputError("project_features: feature width " + std::to_string(x.cols()) + " does not match " +
                         std::to_string(first.rows()));
    }
    ad::Var out = ad::matmul(ad::relu(ad::matmul(x, first)), p.w_m1);
    if (ctx.training && p.dropout_rate > 0.0) {
        if (ctx.rng == nullptr) {
            throw InputError("project_features: training mode needs an rng");
        }
        out = ad::dropout(out, p.dropout_rate, *ctx.rng);
    }
    return out;
}

Matrix project_features(const Matrix& x, const SAPoolParams& p, int iteration, bool training, Rng& rng) {
    ad::Tape tape(false);
    const BoundParams b = bind(tape, p, nullptr);
    PoolContext ctx;
    ctx.training = training;
    ctx.rng = &rng;
    return project_features(tape.constant(x), b, iteration, ctx).value();
}

Matrix appnp_propagate(const Matrix& x0, const NormalizedAdjacency& norm_adj, int l, double alpha) {
    if (norm_adj.matrix.rows() != x0.rows()) {
        throw InputError("appnp_propagate: adjacency does not match feature rows");
    }
    ad::Tape tape(false);
    const auto s = std::make_shared<const SparseMatrix>(norm_adj.matrix);
    return ad::appnp(tape.constant(x0), s, l, alpha).value();
}

ad::Var score_nodes(ad::Var x, ad::Var h) {
    if (h.rows() != x.cols() || h.cols() != 1) {
        throw InputError("score_nodes: scoring vector does not match feature width");
    }
    return ad::matmul(x, ad::normalize(h));
}

Vector score_nodes(const Matrix& x, const Vector& h) {
    ad::Tape tape(false);
    return score_nodes(tape.constant(x), tape.constant(Matrix(h))).value().col(0);
}

std::vector<int> select_topk(const Vector& z, double k) {
    if (!(k > 0.0 && k < 1.0)) {
        throw InputError("select_topk: k must lie in (0, 1)");
    }
    const auto n = static_cast<int>(z.size());
    if (n < 1) {
        throw InputError("select_topk: empty score vector");
    }
    const int m = keep_count(k, n);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + m, order.end(), [&z](int a, int b) {
        return z(a) > z(b) || (z(a) == z(b) && a < b);
    });
    order.resize(static_cast<std::size_t>(m));
    std::sort(order.begin(), order.end());
    return order;
}

PoolOutcome pool_once(const WorkingGraph& g, const BoundParams& p, const RefineConfig& cfg, double k, int iteration,
                      const PoolContext& ctx) {
    const ad::Var projected = project_features(g.features, p, iteration, ctx);
    const auto norm = std::make_shared<const SparseMatrix>(normalize_adjacency(g.adjacency).matrix);
    const ad::Var propagated = ad::appnp(projected, norm, cfg.appnp_l, cfg.appnp_alpha);
    const ad::Var z = score_nodes(propagated, p.h);

    std::vector<int> idx;
    if (ctx.frozen != nullptr && iteration < static_cast<int>(ctx.frozen->size())) {
        idx = (*ctx.frozen)[static_cast<std::size_t>(iteration)];
    } else {
        idx = select_topk(z.value().col(0), k);
    }

    PoolOutcome out;
    out.graph.adjacency = induced_adjacency(g.adjacency, idx);
    const ad::Var gate = ad::sigmoid(ad::gather_rows(z, idx));
    out.graph.features = ad::row_scale(ad::gather_rows(propagated, idx), gate);
    out.graph.origin.reserve(idx.size());
    for (int i : idx) {
        out.graph.origin.push_back(g.origin[static_cast<std::size_t>(i)]);
    }
    out.kept = std::move(idx);
    out.scores = z;
    return out;
}

Refined refine(ad::Tape& tape, const LabeledGraph& g, const BoundParams& p, const RefineConfig& cfg,
               const PoolContext& ctx) {
    cfg.validate();
    Refined out;
    out.graph.features = tape.constant(g.features);
    out.graph.adjacency = g.adjacency;
    out.graph.origin.resize(static_cast<std::size_t>(g.node_count()));
    std::iota(out.graph.origin.begin(), out.graph.origin.end(), 0);

    int iteration = 0;
    while (out.graph.adjacency.node_count() > cfg.threshold_t) {
        if (iteration >= cfg.max_iters) {
            out.trace.terminated_by = Termination::MaxIters;
            break;
        }
        const double k = cfg.k_schedule.at(iteration);
        const int n_before = out.graph.adjacency.node_count();
        PoolOutcome step = pool_once(out.graph, p, cfg, k, iteration, ctx);
        out.trace.steps.push_back(RefineStep{n_before, step.graph.adjacency.node_count(), k, std::move(step.kept)});
        out.graph = std::move(step.graph);
        out.pooled = true;
        ++iteration;
    }
    return out;
}

std::pair<LabeledGraph, RefineTrace> refine_graph(const LabeledGraph& g, const SAPoolParams& params,
                                                  const RefineConfig& cfg, bool training, Rng& rng) {
    ad::Tape tape(false);
    const BoundParams b = bind(tape, params, nullptr);
    PoolContext ctx;
    ctx.training = training;
    ctx.rng = &rng;
    Refined r = refine(tape, g, b, cfg, ctx);
    if (!r.pooled) {
        return {g, std::move(r.trace)};
    }
    LabeledGraph out;
    out.name = g.name;
    out.label = g.label;
    out.features = r.graph.features.value();
    out.adjacency = r.graph.adjacency;
    for (int i : r.graph.origin) {
        if (!g.key_mask.empty()) {
            out.key_mask.push_back(g.key_mask[static_cast<std::size_t>(i)]);
        }
        if (!g.node_meta.empty()) {
            out.node_meta.push_back(g.node_meta[static_cast<std::size_t>(i)]);
        }
    }
    return {std::move(out), std::move(r.trace)};
}

} // namespace vulngraph::sapool

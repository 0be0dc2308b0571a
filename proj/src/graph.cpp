#include "vulngraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vulngraph/errors.hpp"

namespace vulngraph {

namespace {

SparseMatrix symmetric_from_pairs(const std::vector<Edge>& pairs, int n) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(pairs.size() * 2);
    for (const auto& [i, j] : pairs) {
        triplets.emplace_back(i, j, 1.0);
        triplets.emplace_back(j, i, 1.0);
    }
    SparseMatrix m(n, n);
    // duplicates collapse to 1 instead of summing
    m.setFromTriplets(triplets.begin(), triplets.end(), [](double, double b) { return b; });
    m.makeCompressed();
    return m;
}

void check_indices(std::span<const int> idx, int n) {
    if (idx.empty()) {
        throw InputError("induced_subgraph: empty index list");
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= n) {
            throw InputError("induced_subgraph: index " + std::to_string(idx[k]) + " out of range for " +
                             std::to_string(n) + " nodes");
        }
        if (k > 0 && idx[k] <= idx[k - 1]) {
            throw InputError(idx[k] == idx[k - 1] ? "induced_subgraph: duplicate index " + std::to_string(idx[k])
                                                  : "induced_subgraph: indices must be ascending");
        }
    }
}

} // namespace

std::vector<Edge> Adjacency::edges() const {
    std::vector<Edge> out;
    out.reserve(static_cast<std::size_t>(matrix_.nonZeros() / 2));
    for (int i = 0; i < matrix_.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(matrix_, i); it; ++it) {
            if (it.col() > i) {
                out.emplace_back(i, static_cast<int>(it.col()));
            }
        }
    }
    return out;
}

Adjacency Adjacency::from_sparse(SparseMatrix m) {
    Adjacency a;
    m.makeCompressed();
    a.matrix_ = std::move(m);
    return a;
}

Adjacency Adjacency::from_dense(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw InputError("adjacency must be square");
    }
    const auto n = static_cast<int>(a.rows());
    std::vector<Edge> pairs;
    for (int i = 0; i < n; ++i) {
        if (a(i, i) != 0.0) {
            throw InputError("adjacency must have a zero diagonal");
        }
        for (int j = i + 1; j < n; ++j) {
            if (a(i, j) != a(j, i)) {
                throw InputError("adjacency must be symmetric");
            }
            if (a(i, j) != 0.0 && a(i, j) != 1.0) {
                throw InputError("adjacency must be binary");
            }
            if (a(i, j) != 0.0) {
                pairs.emplace_back(i, j);
            }
        }
    }
    return from_sparse(symmetric_from_pairs(pairs, n));
}

int LabeledGraph::key_count() const {
    return static_cast<int>(std::count(key_mask.begin(), key_mask.end(), char{1}));
}

void LabeledGraph::validate() const {
    const int n = node_count();
    if (n <= 0) {
        throw InputError("graph '" + name + "' has no nodes");
    }
    if (adjacency.node_count() != n) {
        throw InputError("graph '" + name + "': adjacency size does not match feature rows");
    }
    if (label != 0 && label != 1) {
        throw InputError("graph '" + name + "': label must be 0 or 1");
    }
    if (!features.allFinite()) {
        throw InputError("graph '" + name + "': non-finite feature entry");
    }
    if (!key_mask.empty() && static_cast<int>(key_mask.size()) != n) {
        throw InputError("graph '" + name + "': key mask length mismatch");
    }
    if (!node_meta.empty() && static_cast<int>(node_meta.size()) != n) {
        throw InputError("graph '" + name + "': node metadata length mismatch");
    }
}

bool structurally_equal(const LabeledGraph& a, const LabeledGraph& b) {
    return a.name == b.name && a.label == b.label && a.features.rows() == b.features.rows() &&
           a.features.cols() == b.features.cols() && a.features == b.features &&
           a.adjacency.edges() == b.adjacency.edges() && a.key_mask == b.key_mask && a.node_meta == b.node_meta;
}

Adjacency build_adjacency(std::span<const Edge> edges, int n) {
    if (n <= 0) {
        throw InputError("build_adjacency: node count must be positive");
    }
    std::vector<Edge> pairs;
    pairs.reserve(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto [i, j] = edges[k];
        if (i < 0 || j < 0 || i >= n || j >= n) {
            throw InputError("build_adjacency: edge " + std::to_string(k) + " (" + std::to_string(i) + ", " +
                             std::to_string(j) + ") out of range for " + std::to_string(n) + " nodes");
        }
        // self-loops are not part of A; normalization adds I
        if (i != j) {
            pairs.emplace_back(std::min(i, j), std::max(i, j));
        }
    }
    return Adjacency::from_sparse(symmetric_from_pairs(pairs, n));
}

NormalizedAdjacency normalize_adjacency(const Adjacency& a) {
    const SparseMatrix& m = a.sparse();
    const int n = a.node_count();
    Vector inv_sqrt_deg(n);
    for (int i = 0; i < n; ++i) {
        double deg = 1.0; // the self-loop
        for (SparseMatrix::InnerIterator it(m, i); it; ++it) {
            deg += it.value();
        }
        inv_sqrt_deg(i) = 1.0 / std::sqrt(deg);
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(m.nonZeros() + n));
    for (int i = 0; i < n; ++i) {
        triplets.emplace_back(i, i, inv_sqrt_deg(i) * inv_sqrt_deg(i));
        for (SparseMatrix::InnerIterator it(m, i); it; ++it) {
            const auto j = static_cast<int>(it.col());
            triplets.emplace_back(i, j, it.value() * inv_sqrt_deg(i) * inv_sqrt_deg(j));
        }
    }
    NormalizedAdjacency out;
    out.matrix = SparseMatrix(n, n);
    out.matrix.setFromTriplets(triplets.begin(), triplets.end());
    out.matrix.makeCompressed();
    out.source_n = n;
    return out;
}

NormalizedAdjacency normalize_adjacency(const Matrix& a) {
    return normalize_adjacency(Adjacency::from_dense(a));
}

Adjacency induced_adjacency(const Adjacency& a, std::span<const int> idx) {
    check_indices(idx, a.node_count());
    std::vector<int> remap(static_cast<std::size_t>(a.node_count()), -1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        remap[static_cast<std::size_t>(idx[k])] = static_cast<int>(k);
    }
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        for (SparseMatrix::InnerIterator it(a.sparse(), idx[k]); it; ++it) {
            const int j = remap[static_cast<std::size_t>(it.col())];
            if (j >= 0) {
                triplets.emplace_back(static_cast<int>(k), j, 1.0);
            }
        }
    }
    const auto m = static_cast<int>(idx.size());
    SparseMatrix out(m, m);
    out.setFromTriplets(triplets.begin(), triplets.end());
    return Adjacency::from_sparse(std::move(out));
}

LabeledGraph induced_subgraph(const LabeledGraph& g, std::span<const int> idx) {
    LabeledGraph out;
    out.adjacency = induced_adjacency(g.adjacency, idx);
    out.name = g.name;
    out.label = g.label;
    out.features.resize(static_cast<Eigen::Index>(idx.size()), g.features.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out.features.row(static_cast<Eigen::Index>(k)) = g.features.row(idx[k]);
    }
    if (!g.key_mask.empty()) {
        for (int i : idx) {
            out.key_mask.push_back(g.key_mask[static_cast<std::size_t>(i)]);
        }
    }
    if (!g.node_meta.empty()) {
        for (int i : idx) {
            out.node_meta.push_back(g.node_meta[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

LabeledGraph permute_graph(const LabeledGraph& g, std::span<const int> perm) {
    const int n = g.node_count();
    if (static_cast<int>(perm.size()) != n) {
        throw InputError("permute_graph: permutation length mismatch");
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int p : perm) {
        if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)] != 0) {
            throw InputError("permute_graph: not a permutation");
        }
        seen[static_cast<std::size_t>(p)] = 1;
    }
    LabeledGraph out;
    out.name = g.name;
    out.label = g.label;
    out.features.resize(n, g.features.cols());
    for (int i = 0; i < n; ++i) {
        out.features.row(perm[static_cast<std::size_t>(i)]) = g.features.row(i);
    }
    std::vector<Edge> edges;
    for (const auto& [i, j] : g.adjacency.edges()) {
        edges.emplace_back(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    out.adjacency = build_adjacency(edges, n);
    if (!g.key_mask.empty()) {
        out.key_mask.assign(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i) {
            out.key_mask[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
                g.key_mask[static_cast<std::size_t>(i)];
        }
    }
    if (!g.node_meta.empty()) {
        out.node_meta.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            out.node_meta[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
                g.node_meta[static_cast<std::size_t>(i)];
        }
    }
    return out;
}

} // namespace vulngraph

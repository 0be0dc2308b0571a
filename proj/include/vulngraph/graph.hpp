#ifndef VULNGRAPH_GRAPH_HPP
#define VULNGRAPH_GRAPH_HPP

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vulngraph/tensor.hpp"

namespace vulngraph {

using Edge = std::pair<int, int>;

/// Binary symmetric adjacency with an empty diagonal. Stored sparse; the
/// dense view is what every contract is phrased against.
class Adjacency {
public:
    Adjacency() = default;

    [[nodiscard]] int node_count() const { return static_cast<int>(matrix_.rows()); }
    [[nodiscard]] const SparseMatrix& sparse() const { return matrix_; }
    [[nodiscard]] Matrix dense() const { return Matrix(matrix_); }
    [[nodiscard]] Eigen::Index nnz() const { return matrix_.nonZeros(); }
    [[nodiscard]] bool has_edge(int i, int j) const { return matrix_.coeff(i, j) != 0.0; }
    /// Each undirected edge once, as (lo, hi), sorted.
    [[nodiscard]] std::vector<Edge> edges() const;

    /// Wraps a matrix that is already binary, symmetric and loop-free.
    static Adjacency from_sparse(SparseMatrix m);
    /// Validating conversion from a dense 0/1 matrix.
    static Adjacency from_dense(const Matrix& a);

private:
    SparseMatrix matrix_;
};

/// D^{-1/2} (A + I) D^{-1/2}, with D the degree matrix of A + I.
struct NormalizedAdjacency {
    SparseMatrix matrix;
    int source_n = 0;

    [[nodiscard]] Matrix dense() const { return Matrix(matrix); }
};

struct NodeMeta {
    std::optional<int> line;
    std::string kind;

    friend bool operator==(const NodeMeta&, const NodeMeta&) = default;
};

struct LabeledGraph {
    std::string name;
    Matrix features;            ///< N x d
    Adjacency adjacency;
    int label = 0;              ///< 1 = vulnerable
    std::vector<char> key_mask; ///< empty, or one flag per node
    std::vector<NodeMeta> node_meta; ///< empty, or one record per node

    [[nodiscard]] int node_count() const { return static_cast<int>(features.rows()); }
    [[nodiscard]] int feature_dim() const { return static_cast<int>(features.cols()); }
    [[nodiscard]] int key_count() const;

    /// Throws InputError on any broken invariant.
    void validate() const;
};

bool structurally_equal(const LabeledGraph& a, const LabeledGraph& b);

Adjacency build_adjacency(std::span<const Edge> edges, int n);

/// Throws InputError on an asymmetric input.
NormalizedAdjacency normalize_adjacency(const Adjacency& a);
NormalizedAdjacency normalize_adjacency(const Matrix& a);

/// Slices nodes `idx` (strictly ascending) out of `g`; edges survive iff both
/// endpoints are kept.
LabeledGraph induced_subgraph(const LabeledGraph& g, std::span<const int> idx);
Adjacency induced_adjacency(const Adjacency& a, std::span<const int> idx);

/// Applies a node permutation: node i of the input becomes node perm[i].
LabeledGraph permute_graph(const LabeledGraph& g, std::span<const int> perm);

} // namespace vulngraph

#endif // VULNGRAPH_GRAPH_HPP

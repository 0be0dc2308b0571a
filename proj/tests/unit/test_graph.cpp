#include <doctest.h>

#include "../support/oracles.hpp"
#include "vulngraph/errors.hpp"
#include "vulngraph/graph.hpp"

using namespace vulngraph;

TEST_SUITE("graph") {

TEST_CASE("build_adjacency symmetrizes and deduplicates") {
    const std::vector<Edge> one{{0, 1}};
    Matrix expected(2, 2);
    expected << 0, 1, 1, 0;
    CHECK(build_adjacency(one, 2).dense() == expected);

    const std::vector<Edge> repeated{{0, 1}, {1, 0}, {0, 1}};
    const Adjacency a = build_adjacency(repeated, 2);
    CHECK(a.dense() == expected);
    CHECK(a.nnz() == 2);

    const Adjacency empty = build_adjacency(std::vector<Edge>{}, 3);
    CHECK(empty.dense() == Matrix::Zero(3, 3));
}

TEST_CASE("build_adjacency rejects bad input") {
    const std::vector<Edge> out_of_range{{0, 1}, {0, 3}};
    CHECK_THROWS_AS(build_adjacency(out_of_range, 3), InputError);
    CHECK_THROWS_WITH(build_adjacency(out_of_range, 3), doctest::Contains("edge 1"));
    const std::vector<Edge> negative{{-1, 0}};
    CHECK_THROWS_AS(build_adjacency(negative, 3), InputError);
    CHECK_THROWS_AS(build_adjacency(std::vector<Edge>{}, 0), InputError);
}

TEST_CASE("normalize_adjacency small cases") {
    CHECK(normalize_adjacency(Matrix::Zero(1, 1)).dense()(0, 0) == doctest::Approx(1.0));

    Matrix pair(2, 2);
    pair << 0, 1, 1, 0;
    const Matrix n = normalize_adjacency(pair).dense();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            CHECK(n(i, j) == doctest::Approx(0.5).epsilon(1e-15));
        }
    }

    // path 0-1-2-3: degrees of A+I are 2,3,3,2
    const std::vector<Edge> path{{0, 1}, {1, 2}, {2, 3}};
    const Matrix p = normalize_adjacency(build_adjacency(path, 4)).dense();
    const double d[4] = {2, 3, 3, 2};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            const double aij = (std::abs(i - j) <= 1) ? 1.0 : 0.0;
            CHECK(std::abs(p(i, j) - aij / std::sqrt(d[i] * d[j])) < 1e-15);
        }
    }
}

TEST_CASE("normalize_adjacency rejects asymmetric or looped input") {
    Matrix asym(2, 2);
    asym << 0, 1, 0, 0;
    CHECK_THROWS_AS(normalize_adjacency(asym), InputError);
    Matrix loop(2, 2);
    loop << 1, 0, 0, 0;
    CHECK_THROWS_AS(normalize_adjacency(loop), InputError);
}

TEST_CASE("normalize_adjacency matches the dense oracle and is symmetric") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 12;
        const auto a = oracle::random_adjacency(rng, n, 0.3);
        const Matrix got = normalize_adjacency(oracle::matrix(a)).dense();
        CHECK(oracle::max_abs_diff(got, oracle::matrix(oracle::normalized(a))) < 1e-12);
        CHECK((got - got.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(got.minCoeff() >= 0.0);
        CHECK(got.maxCoeff() <= 1.0);
        for (int i = 0; i < n; ++i) {
            CHECK(got(i, i) > 0.0);
        }
    }
}

TEST_CASE("normalization commutes with node permutation") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + trial % 10;
        const Matrix a = oracle::matrix(oracle::random_adjacency(rng, n, 0.4));
        const std::vector<int> perm = oracle::random_permutation(rng, n);
        Matrix pa = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                pa(perm[i], perm[j]) = a(i, j);
            }
        }
        const Matrix na = normalize_adjacency(a).dense();
        const Matrix npa = normalize_adjacency(pa).dense();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                CHECK(std::abs(npa(perm[i], perm[j]) - na(i, j)) < 1e-12);
            }
        }
    }
}

TEST_CASE("induced_subgraph identity and triangle") {
    std::mt19937_64 rng(3);
    LabeledGraph g = oracle::random_graph(rng, 6, 3, 0.5, 1);
    g.key_mask = {1, 0, 0, 1, 0, 1};
    g.node_meta.resize(6);
    for (int i = 0; i < 6; ++i) {
        g.node_meta[i].line = 10 + i;
        g.node_meta[i].kind = "K" + std::to_string(i);
    }
    const std::vector<int> all{0, 1, 2, 3, 4, 5};
    CHECK(structurally_equal(induced_subgraph(g, all), g));

    const std::vector<Edge> tri{{0, 1}, {1, 2}, {0, 2}};
    LabeledGraph t;
    t.features = Matrix::Identity(3, 3);
    t.adjacency = build_adjacency(tri, 3);
    const std::vector<int> idx{0, 2};
    const LabeledGraph s = induced_subgraph(t, idx);
    CHECK(s.node_count() == 2);
    CHECK(s.adjacency.edges() == std::vector<Edge>{{0, 1}});
    CHECK(s.features.row(1) == t.features.row(2));

    const std::vector<int> pick{1, 3, 5};
    const LabeledGraph sub = induced_subgraph(g, pick);
    CHECK(sub.label == 1);
    CHECK(sub.key_mask == std::vector<char>{0, 1, 1});
    CHECK(sub.node_meta[2].kind == "K5");
}

TEST_CASE("induced_subgraph rejects malformed index lists") {
    std::mt19937_64 rng(4);
    const LabeledGraph g = oracle::random_graph(rng, 5, 2, 0.5);
    CHECK_THROWS_AS(induced_subgraph(g, std::vector<int>{}), InputError);
    CHECK_THROWS_AS(induced_subgraph(g, std::vector<int>{1, 1}), InputError);
    CHECK_THROWS_AS(induced_subgraph(g, std::vector<int>{2, 1}), InputError);
    CHECK_THROWS_AS(induced_subgraph(g, std::vector<int>{0, 5}), InputError);
}

TEST_CASE("induced_subgraph matches the edge-filter oracle") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 10;
        const LabeledGraph g = oracle::random_graph(rng, n, 2, 0.35);
        std::vector<int> idx;
        std::bernoulli_distribution coin(0.5);
        for (int i = 0; i < n; ++i) {
            if (coin(rng)) {
                idx.push_back(i);
            }
        }
        if (idx.empty()) {
            idx.push_back(0);
        }
        const LabeledGraph s = induced_subgraph(g, idx);
        const Matrix full = g.adjacency.dense();
        const Matrix got = s.adjacency.dense();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < idx.size(); ++j) {
                CHECK(got(i, j) == full(idx[i], idx[j]));
            }
        }
        CHECK(s.adjacency.nnz() <= g.adjacency.nnz());

        // composing two selections equals one composed selection
        std::vector<int> inner;
        for (std::size_t i = 0; i < idx.size(); i += 2) {
            inner.push_back(static_cast<int>(i));
        }
        std::vector<int> composed;
        for (int i : inner) {
            composed.push_back(idx[static_cast<std::size_t>(i)]);
        }
        CHECK(structurally_equal(induced_subgraph(s, inner), induced_subgraph(g, composed)));
    }
}

TEST_CASE("LabeledGraph validation") {
    LabeledGraph g;
    g.features = Matrix::Zero(2, 2);
    g.adjacency = build_adjacency(std::vector<Edge>{{0, 1}}, 2);
    CHECK_NOTHROW(g.validate());
    g.label = 2;
    CHECK_THROWS_AS(g.validate(), InputError);
    g.label = 0;
    g.features(0, 0) = std::nan("");
    CHECK_THROWS_AS(g.validate(), InputError);
    g.features(0, 0) = 0.0;
    g.key_mask = {1};
    CHECK_THROWS_AS(g.validate(), InputError);
    g.key_mask.clear();
    g.adjacency = build_adjacency(std::vector<Edge>{}, 3);
    CHECK_THROWS_AS(g.validate(), InputError);
}

TEST_CASE("Adjacency::from_dense validates") {
    Matrix not_binary(2, 2);
    not_binary << 0, 0.5, 0.5, 0;
    CHECK_THROWS_AS(Adjacency::from_dense(not_binary), InputError);
    CHECK_THROWS_AS(Adjacency::from_dense(Matrix::Zero(2, 3)), InputError);
}

TEST_CASE("permute_graph moves node i to perm[i]") {
    std::mt19937_64 rng(9);
    const LabeledGraph g = oracle::random_graph(rng, 7, 3, 0.4);
    const std::vector<int> perm = oracle::random_permutation(rng, 7);
    const LabeledGraph p = permute_graph(g, perm);
    for (int i = 0; i < 7; ++i) {
        CHECK(p.features.row(perm[i]) == g.features.row(i));
        for (int j = 0; j < 7; ++j) {
            CHECK(p.adjacency.has_edge(perm[i], perm[j]) == g.adjacency.has_edge(i, j));
        }
    }
    CHECK_THROWS_AS(permute_graph(g, std::vector<int>{0, 0, 1, 2, 3, 4, 5}), InputError);
}

} // TEST_SUITE

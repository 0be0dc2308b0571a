#include <doctest.h>

#include "../support/oracles.hpp"
#include "vulngraph/encoder.hpp"
#include "vulngraph/errors.hpp"

using namespace vulngraph;
using namespace vulngraph::encoder;

namespace {

EncoderParams params(int hidden, int layers, int heads, std::uint64_t seed) {
    Rng rng(seed);
    return EncoderParams::init(hidden, layers, heads, rng);
}

/// Random layer-norm affine terms so the oracle exercises them.
void jitter_norms(EncoderParams& p, std::mt19937_64& r) {
    for (auto& b : p.blocks) {
        b.ln1_scale += 0.3 * oracle::random_matrix(r, 1, static_cast<int>(b.ln1_scale.cols()));
        b.ln1_shift = 0.3 * oracle::random_matrix(r, 1, static_cast<int>(b.ln1_shift.cols()));
        b.ln2_scale += 0.3 * oracle::random_matrix(r, 1, static_cast<int>(b.ln2_scale.cols()));
        b.ln2_shift = 0.3 * oracle::random_matrix(r, 1, static_cast<int>(b.ln2_shift.cols()));
    }
}

} // namespace

TEST_SUITE("encoder") {

TEST_CASE("parameter shapes and initialization") {
    const EncoderParams p = params(64, 5, 4, 1);
    CHECK(p.blocks.size() == 5);
    CHECK(p.hidden() == 64);
    for (const auto& b : p.blocks) {
        CHECK(b.heads.size() == 4);
        CHECK(b.heads[0].w_q.rows() == 64);
        CHECK(b.heads[0].w_q.cols() == 16);
        CHECK(b.w_f1.cols() == 256);
        CHECK(b.w_f2.rows() == 256);
        CHECK(b.ln1_scale.isOnes());
        CHECK(b.ln2_shift.isZero());
        const double bound = std::sqrt(6.0 / (64 + 64));
        CHECK(b.w_g.cwiseAbs().maxCoeff() <= bound);
    }
    Rng rng(1);
    CHECK_THROWS_AS(EncoderParams::init(10, 2, 4, rng), InputError);
}

TEST_CASE("gcn_layer") {
    Matrix one(1, 3);
    one << -1, 2, 0.5;
    Matrix relu_one(1, 3);
    relu_one << 0, 2, 0.5;
    CHECK(gcn_layer(one, normalize_adjacency(Matrix::Zero(1, 1)), Matrix::Identity(3, 3)) == relu_one);

    std::mt19937_64 r(2);
    const auto a = oracle::random_adjacency(r, 5, 0.5);
    CHECK(gcn_layer(-oracle::random_matrix(r, 5, 3).cwiseAbs(), normalize_adjacency(oracle::matrix(a)),
                    Matrix::Identity(3, 3))
              .isZero());

    for (int trial = 0; trial < 30; ++trial) {
        const auto adj = oracle::random_adjacency(r, 5, 0.4);
        const Matrix x = oracle::random_matrix(r, 5, 4);
        const Matrix w = oracle::random_matrix(r, 4, 4);
        const Matrix got = gcn_layer(x, normalize_adjacency(oracle::matrix(adj)), w);
        CHECK(oracle::max_abs_diff(got, oracle::matrix(oracle::gcn(oracle::grid(x), adj, oracle::grid(w)))) < 1e-12);
    }
    CHECK_THROWS_AS(gcn_layer(Matrix::Zero(5, 3), normalize_adjacency(oracle::matrix(a)), Matrix::Zero(4, 4)),
                    InputError);
}

TEST_CASE("multi_head_attention") {
    const EncoderParams p = params(8, 1, 2, 3);
    const auto& heads = p.blocks[0].heads;
    std::mt19937_64 r(4);

    const Matrix single = oracle::random_matrix(r, 1, 8);
    Matrix expected(1, 8);
    expected << single * heads[0].w_v, single * heads[1].w_v;
    CHECK(oracle::max_abs_diff(multi_head_attention(single, heads), expected) < 1e-14);
    for (const Matrix& w : attention_weights(single, heads)) {
        CHECK(w(0, 0) == 1.0);
    }

    Matrix twins(2, 8);
    twins.row(0) = oracle::random_matrix(r, 1, 8);
    twins.row(1) = twins.row(0);
    for (const Matrix& w : attention_weights(twins, heads)) {
        CHECK((w.array() - 0.5).abs().maxCoeff() < 1e-15);
    }

    for (int trial = 0; trial < 30; ++trial) {
        const Matrix x = oracle::random_matrix(r, 4, 8);
        CHECK(oracle::max_abs_diff(multi_head_attention(x, heads), oracle::matrix(oracle::mha(oracle::grid(x), heads))) <
              1e-12);
        for (const Matrix& w : attention_weights(x, heads)) {
            CHECK(w.minCoeff() >= 0.0);
            CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        }
    }
    CHECK_THROWS_AS(multi_head_attention(Matrix::Zero(3, 5), heads), InputError);
}

TEST_CASE("feed_forward") {
    EncoderParams p = params(8, 1, 2, 5);
    CHECK(feed_forward(Matrix::Zero(3, 8), p.blocks[0]).isZero());

    std::mt19937_64 r(6);
    // LN1 with unit scale and zero shift standardizes each row
    const Matrix x = oracle::random_matrix(r, 3, 8, 4.0);
    const auto ln = oracle::layer_norm(oracle::grid(x), p.blocks[0].ln1_scale, p.blocks[0].ln1_shift, kLayerNormEps);
    for (const auto& row : ln) {
        double mean = 0.0, var = 0.0;
        for (double v : row) {
            mean += v;
        }
        mean /= 8.0;
        for (double v : row) {
            var += (v - mean) * (v - mean);
        }
        CHECK(std::abs(mean) < 1e-12);
        CHECK(std::abs(var / 8.0 - 1.0) < 1e-5);
    }

    jitter_norms(p, r);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix xx = oracle::random_matrix(r, 5, 8);
        CHECK(oracle::max_abs_diff(feed_forward(xx, p.blocks[0]), oracle::matrix(oracle::ffn(oracle::grid(xx), p.blocks[0]))) <
              1e-12);
    }
}

TEST_CASE("gnn_gt_block") {
    EncoderParams p = params(8, 1, 2, 7);
    std::mt19937_64 r(8);
    const auto adj = oracle::random_adjacency(r, 6, 0.4);
    const NormalizedAdjacency na = normalize_adjacency(oracle::matrix(adj));
    const Matrix x = oracle::random_matrix(r, 6, 8);

    EncoderBlock zeroed = p.blocks[0];
    for (auto& h : zeroed.heads) {
        h.w_q.setZero();
        h.w_k.setZero();
        h.w_v.setZero();
    }
    zeroed.w_f1.setZero();
    zeroed.w_f2.setZero();
    CHECK(gnn_gt_block(x, na, zeroed) == gcn_layer(x, na, zeroed.w_g));

    jitter_norms(p, r);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = oracle::random_adjacency(r, 6, 0.4);
        const Matrix xx = oracle::random_matrix(r, 6, 8);
        const Matrix got = gnn_gt_block(xx, normalize_adjacency(oracle::matrix(a)), p.blocks[0]);
        CHECK(oracle::max_abs_diff(got, oracle::matrix(oracle::block(oracle::grid(xx), a, p.blocks[0]))) < 1e-10);
    }

    // disabled sublayers become identities
    EncoderOptions no_gt{true, false};
    CHECK(gnn_gt_block(x, na, p.blocks[0], no_gt) == gcn_layer(x, na, p.blocks[0].w_g));
    EncoderOptions no_gnn{false, true};
    const Matrix x2 = multi_head_attention(x, p.blocks[0].heads) + x;
    CHECK(oracle::max_abs_diff(gnn_gt_block(x, na, p.blocks[0], no_gnn), feed_forward(x2, p.blocks[0]) + x2) < 1e-14);
    CHECK(gnn_gt_block(x, na, p.blocks[0], EncoderOptions{false, false}) == x);
}

TEST_CASE("encode_graph") {
    EncoderParams p = params(8, 3, 2, 9);
    std::mt19937_64 r(10);
    jitter_norms(p, r);

    const Matrix one = oracle::random_matrix(r, 1, 8);
    const NormalizedAdjacency n1 = normalize_adjacency(Matrix::Zero(1, 1));
    Matrix h = one;
    for (const auto& b : p.blocks) {
        h = gnn_gt_block(h, n1, b);
    }
    CHECK(oracle::max_abs_diff(encode_graph(one, n1, p), h) < 1e-14);

    // identical rows on a complete graph stay identical
    Matrix same(5, 8);
    for (int i = 0; i < 5; ++i) {
        same.row(i) = one.row(0);
    }
    const Matrix complete = Matrix::Ones(5, 5) - Matrix::Identity(5, 5);
    const RowVector o = encode_graph(same, normalize_adjacency(complete), p);
    CHECK(oracle::max_abs_diff(o, h) < 1e-10);

    for (int trial = 0; trial < 20; ++trial) {
        const auto a = oracle::random_adjacency(r, 6, 0.4);
        const Matrix x = oracle::random_matrix(r, 6, 8);
        const RowVector got = encode_graph(x, normalize_adjacency(oracle::matrix(a)), p);
        const auto want = oracle::encode(oracle::grid(x), a, p);
        for (int j = 0; j < 8; ++j) {
            CHECK(std::abs(got(j) - want[static_cast<std::size_t>(j)]) < 1e-10);
        }
    }
}

TEST_CASE("encode_graph is permutation invariant") {
    const EncoderParams p = params(16, 3, 4, 11);
    std::mt19937_64 r(12);
    for (int trial = 0; trial < 20; ++trial) {
        const LabeledGraph g = oracle::random_graph(r, 12, 16, 0.3);
        const LabeledGraph pg = permute_graph(g, oracle::random_permutation(r, 12));
        const RowVector a = encode_graph(g.features, normalize_adjacency(g.adjacency), p);
        const RowVector b = encode_graph(pg.features, normalize_adjacency(pg.adjacency), p);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
    }
}

} // TEST_SUITE

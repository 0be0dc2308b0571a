#include <doctest.h>

#include "../support/oracles.hpp"
#include "vulngraph/autograd.hpp"
#include "vulngraph/errors.hpp"

using namespace vulngraph;

namespace {

/// Central-difference check of d sum(w .* f(x)) / dx for a unary op.
template <class F>
double unary_error(F&& f, const Matrix& x0, std::uint64_t seed) {
    std::mt19937_64 r(seed);
    ad::Tape probe(false);
    const Matrix w = oracle::random_matrix(r, static_cast<int>(f(probe.constant(x0)).rows()),
                                           static_cast<int>(f(probe.constant(x0)).cols()));
    auto loss = [&](const Matrix& x) {
        ad::Tape t(false);
        return f(t.constant(x)).value().cwiseProduct(w).sum();
    };
    ad::Tape tape(true);
    const ad::Var x = tape.variable(x0);
    const ad::Var y = f(x);
    const ad::Var l = ad::matmul(ad::matmul(tape.constant(Matrix::Ones(1, y.rows())), ad::hadamard(y, tape.constant(w))),
                                 tape.constant(Matrix::Ones(y.cols(), 1)));
    tape.backward(l);
    const Matrix g = tape.grad(x);
    double worst = 0.0, scale = 1e-6;
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        Matrix xp = x0, xm = x0;
        xp.data()[i] += 1e-6;
        xm.data()[i] -= 1e-6;
        const double num = (loss(xp) - loss(xm)) / 2e-6;
        worst = std::max(worst, std::abs(num - g.data()[i]));
        scale = std::max(scale, std::abs(num));
    }
    return worst / scale;
}

} // namespace

TEST_SUITE("autograd") {

TEST_CASE("op gradients match central differences") {
    std::mt19937_64 r(1);
    const Matrix x = oracle::random_matrix(r, 4, 5);
    const Matrix b = oracle::random_matrix(r, 5, 3);
    const Matrix c = oracle::random_matrix(r, 6, 5);
    const Matrix gamma = oracle::random_matrix(r, 1, 5);
    const Matrix beta = oracle::random_matrix(r, 1, 5);
    const Matrix s = oracle::random_matrix(r, 4, 1);
    const auto adj = std::make_shared<const SparseMatrix>(
        normalize_adjacency(oracle::matrix(oracle::random_adjacency(r, 4, 0.5))).matrix);
    const std::vector<int> idx{0, 2, 3};

    using V = ad::Var;
    CHECK(unary_error([&](V v) { return ad::matmul(v, v.tape().constant(b)); }, x, 2) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::matmul_nt(v, v.tape().constant(c)); }, x, 3) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::spmm(adj, v); }, x, 4) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::relu(v); }, x, 5) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::sigmoid(v); }, x, 6) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::softmax_rows(v); }, x, 7) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::layer_norm_rows(v, v.tape().constant(gamma), v.tape().constant(beta), 1e-5); },
                      x, 8) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::mean_rows(v); }, x, 9) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::gather_rows(v, idx); }, x, 10) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::row_scale(v, v.tape().constant(s)); }, x, 11) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::row_scale(v.tape().constant(x), ad::gather_rows(ad::matmul(v, v.tape().constant(Matrix::Ones(5, 1))), std::vector<int>{3, 2, 1, 0})); },
                      x, 12) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::appnp(v, adj, 8, 0.2); }, x, 13) < 1e-6);
    CHECK(unary_error([&](V v) { return ad::normalize(ad::matmul(v, v.tape().constant(Matrix::Ones(5, 1)))); }, x, 14) <
          1e-6);
    CHECK(unary_error([&](V v) { return ad::scale(ad::add(v, v), 0.3); }, x, 15) < 1e-6);
    CHECK(unary_error(
              [&](V v) {
                  const std::vector<V> parts{v, ad::relu(v)};
                  return ad::concat_cols(parts);
              },
              x, 16) < 1e-6);
}

TEST_CASE("parameter gradients accumulate into sinks across tapes") {
    Matrix w = Matrix::Constant(2, 1, 0.5);
    Matrix sink = Matrix::Zero(2, 1);
    for (int rep = 0; rep < 2; ++rep) {
        ad::Tape t(true);
        const ad::Var pw = t.parameter(w, &sink);
        const ad::Var y = ad::matmul(t.constant(Matrix::Ones(1, 2)), pw);
        t.backward(y, 0.5);
    }
    CHECK(sink == Matrix::Constant(2, 1, 1.0));
}

TEST_CASE("misuse is reported") {
    ad::Tape t(true);
    CHECK_THROWS_AS(ad::matmul(t.constant(Matrix::Zero(2, 3)), t.constant(Matrix::Zero(2, 3))), InputError);
    CHECK_THROWS_AS(t.backward(t.constant(Matrix::Zero(2, 1))), InputError);
    CHECK_THROWS_AS(ad::normalize(t.constant(Matrix::Zero(3, 1))), NumericalError);
    ad::Tape other(true);
    CHECK_THROWS_AS(ad::add(t.constant(Matrix::Zero(1, 1)), other.constant(Matrix::Zero(1, 1))), InputError);
    ad::Tape inference(false);
    CHECK_THROWS_AS(inference.backward(inference.constant(Matrix::Zero(1, 1))), InputError);
}

TEST_CASE("dropout is the identity at rate zero and keeps the expectation") {
    ad::Tape t(false);
    Rng rng(3);
    const Matrix x = Matrix::Ones(200, 50);
    CHECK(ad::dropout(t.constant(x), 0.0, rng).value() == x);
    const Matrix d = ad::dropout(t.constant(x), 0.2, rng).value();
    CHECK(std::abs(d.mean() - 1.0) < 0.02);
    CHECK(((d.array() == 0.0) || (d.array() == 1.25)).all());
}

} // TEST_SUITE

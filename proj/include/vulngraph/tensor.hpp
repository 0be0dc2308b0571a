#ifndef VULNGRAPH_TENSOR_HPP
#define VULNGRAPH_TENSOR_HPP

#include <cstdint>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace vulngraph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Rng = std::mt19937_64;

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Derives an independent stream seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

} // namespace vulngraph

#endif // VULNGRAPH_TENSOR_HPP

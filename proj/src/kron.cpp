#include "kronsolve/kron.hpp"

#include <string>

#include "kronsolve/errors.hpp"

namespace kronsolve {

namespace {

// Strides of mode k in the vectorized layout.
struct Strides {
  Index before, after;
};

Strides strides_for(const std::vector<Index>& dims, Index mode) {
  Strides s{1, 1};
  for (Index k = 0; k < mode; ++k) s.before *= dims[static_cast<std::size_t>(k)];
  for (Index k = mode + 1; k < static_cast<Index>(dims.size()); ++k)
    s.after *= dims[static_cast<std::size_t>(k)];
  return s;
}

}  // namespace

Eigen::MatrixXd kron_sum_dense(const SylvesterFactors& factors, Index cap) {
  const std::vector<Index> dims = factors.dims();
  const Index d = factors.total_dim();
  if (d > cap)
    throw DimensionError("kron_sum_dense: total dimension " + std::to_string(d) +
                         " exceeds the dense cap " + std::to_string(cap) +
                         " (dense materialization is an oracle, not a production path)");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (Index k = 0; k < factors.order(); ++k) {
    const auto [sb, sa] = strides_for(dims, k);
    const Index dk = dims[static_cast<std::size_t>(k)];
    for (const auto& [ij, v] : factors.factors[static_cast<std::size_t>(k)].stored()) {
      const auto [i, j] = ij;
      for (Index a = 0; a < sa; ++a)
        for (Index b = 0; b < sb; ++b) {
          const Index row = b + i * sb + a * sb * dk;
          const Index col = b + j * sb + a * sb * dk;
          m(row, col) += v;
          if (i != j) m(col, row) += v;
        }
    }
  }
  return m;
}

Eigen::SparseMatrix<double> kron_sum_sparse(const SylvesterFactors& factors) {
  const std::vector<Index> dims = factors.dims();
  const Index d = factors.total_dim();
  std::vector<Eigen::Triplet<double>> trip;
  for (Index k = 0; k < factors.order(); ++k) {
    const auto [sb, sa] = strides_for(dims, k);
    const Index dk = dims[static_cast<std::size_t>(k)];
    for (const auto& [ij, v] : factors.factors[static_cast<std::size_t>(k)].stored()) {
      const auto [i, j] = ij;
      for (Index a = 0; a < sa; ++a)
        for (Index b = 0; b < sb; ++b) {
          const Index row = b + i * sb + a * sb * dk;
          const Index col = b + j * sb + a * sb * dk;
          trip.emplace_back(row, col, v);
          if (i != j) trip.emplace_back(col, row, v);
        }
    }
  }
  Eigen::SparseMatrix<double> m(d, d);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::VectorXd kron_sum_apply(const std::vector<Eigen::MatrixXd>& dense_factors,
                               const std::vector<Index>& dims, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != checked_product(dims))
    throw DimensionError("kron_sum_apply: vector length does not match dimensions");
  DenseTensor t(dims, x);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (Index k = 0; k < static_cast<Index>(dims.size()); ++k)
    add_kmode_product(t, dense_factors[static_cast<std::size_t>(k)], k, y);
  return y;
}

Eigen::VectorXd kron_sum_apply(const SylvesterFactors& factors, const Eigen::VectorXd& x) {
  std::vector<Eigen::MatrixXd> dense;
  dense.reserve(factors.factors.size());
  for (const auto& f : factors.factors) dense.push_back(f.to_dense());
  return kron_sum_apply(dense, factors.dims(), x);
}

Eigen::MatrixXd kron_product_dense(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd m(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      m.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return m;
}

}  // namespace kronsolve

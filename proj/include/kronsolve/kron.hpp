#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "kronsolve/sym_sparse.hpp"
#include "kronsolve/tensor.hpp"

namespace kronsolve {

// Maximum total dimension for dense Kronecker materialization. The dense
// form is a test oracle; production paths stay matrix-free.
inline constexpr Index kDenseKronCap = 4096;

// Dense Kronecker sum sum_k I x Psi_k x I (identity padding over the other
// modes). Throws DimensionError above the cap.
Eigen::MatrixXd kron_sum_dense(const SylvesterFactors& factors, Index cap = kDenseKronCap);

// Sparse assembly of the same operator, for direct factorizations.
Eigen::SparseMatrix<double> kron_sum_sparse(const SylvesterFactors& factors);

// Matrix-free y = (sum_k I x Psi_k x I) x, evaluated as vec(sum_k X x_k Psi_k)
// without materializing the d x d operator.
Eigen::VectorXd kron_sum_apply(const SylvesterFactors& factors, const Eigen::VectorXd& x);

// Same, with pre-densified factors (hot loops prepare these once).
Eigen::VectorXd kron_sum_apply(const std::vector<Eigen::MatrixXd>& dense_factors,
                               const std::vector<Index>& dims, const Eigen::VectorXd& x);

// Dense Kronecker product A x B (oracle helper).
Eigen::MatrixXd kron_product_dense(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Matrix-free conjugate gradient for SPD operators.
struct CgResult {
  Eigen::VectorXd x;
  Index iterations = 0;
  double residual = 0.0;  // relative to the right-hand side norm
  bool converged = false;
};

template <typename ApplyFn>
CgResult conjugate_gradient(ApplyFn&& apply, const Eigen::VectorXd& rhs, double tol,
                            Index max_iters) {
  CgResult res;
  const Index n = rhs.size();
  res.x = Eigen::VectorXd::Zero(n);
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    res.converged = true;
    return res;
  }
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  for (Index it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd ap = apply(p);
    const double alpha = rr / p.dot(ap);
    res.x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    res.iterations = it + 1;
    res.residual = std::sqrt(rr_new) / rhs_norm;
    if (res.residual < tol) {
      res.converged = true;
      return res;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return res;
}

}  // namespace kronsolve

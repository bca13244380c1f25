#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <map>
#include <utility>
#include <vector>

#include "kronsolve/tensor.hpp"

namespace kronsolve {

// Symmetric sparse matrix storing only the upper triangle plus diagonal;
// accessors present the full symmetric view, so the symmetry invariant is
// structural rather than checked.
class SymSparseMatrix {
 public:
  SymSparseMatrix() = default;
  explicit SymSparseMatrix(Index dim);

  static SymSparseMatrix identity(Index dim);
  // Keeps entries with |value| > tol of the symmetrized input (m + m^T)/2.
  static SymSparseMatrix from_dense(const Eigen::MatrixXd& m, double tol = 0.0);

  Index dim() const { return dim_; }
  double operator()(Index i, Index j) const;
  // set(i, j, v) also sets (j, i); a zero value erases the entry.
  void set(Index i, Index j, double v);
  void add(Index i, Index j, double v);

  Index nnz_stored() const { return static_cast<Index>(entries_.size()); }
  Index nnz_offdiag_stored() const;

  Eigen::MatrixXd to_dense() const;
  Eigen::SparseMatrix<double> to_sparse() const;
  Eigen::VectorXd diagonal() const;

  // Stored (upper-triangle) entries as ((i, j), value) with i <= j.
  const std::map<std::pair<Index, Index>, double>& stored() const { return entries_; }

 private:
  Index dim_ = 0;
  std::map<std::pair<Index, Index>, double> entries_;
};

// Ordered factor list (Psi_1 ... Psi_K) of the Sylvester model; factor k
// parameterizes mode k of a (d_1, ..., d_K) tensor.
struct SylvesterFactors {
  std::vector<SymSparseMatrix> factors;

  SylvesterFactors() = default;
  explicit SylvesterFactors(std::vector<SymSparseMatrix> f) : factors(std::move(f)) {}

  Index order() const { return static_cast<Index>(factors.size()); }
  std::vector<Index> dims() const;
  // Total vectorized dimension d = prod d_k.
  Index total_dim() const;
  void check_dims(const std::vector<Index>& dims) const;
};

}  // namespace kronsolve

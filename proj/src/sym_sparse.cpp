#include "kronsolve/sym_sparse.hpp"

#include <cmath>
#include <string>

#include "kronsolve/errors.hpp"

namespace kronsolve {

SymSparseMatrix::SymSparseMatrix(Index dim) : dim_(dim) {
  if (dim < 1) throw DimensionError("matrix dimension must be positive");
}

SymSparseMatrix SymSparseMatrix::identity(Index dim) {
  SymSparseMatrix m(dim);
  for (Index i = 0; i < dim; ++i) m.set(i, i, 1.0);
  return m;
}

SymSparseMatrix SymSparseMatrix::from_dense(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw DimensionError("from_dense requires a square matrix");
  SymSparseMatrix out(m.rows());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = i; j < m.cols(); ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      if (std::abs(v) > tol) out.set(i, j, v);
    }
  return out;
}

double SymSparseMatrix::operator()(Index i, Index j) const {
  if (i > j) std::swap(i, j);
  auto it = entries_.find({i, j});
  return it == entries_.end() ? 0.0 : it->second;
}

void SymSparseMatrix::set(Index i, Index j, double v) {
  if (i < 0 || j < 0 || i >= dim_ || j >= dim_)
    throw DimensionError("entry index out of range");
  if (i > j) std::swap(i, j);
  if (v == 0.0)
    entries_.erase({i, j});
  else
    entries_[{i, j}] = v;
}

void SymSparseMatrix::add(Index i, Index j, double v) { set(i, j, (*this)(i, j) + v); }

Index SymSparseMatrix::nnz_offdiag_stored() const {
  Index n = 0;
  for (const auto& [ij, v] : entries_)
    if (ij.first != ij.second) ++n;
  return n;
}

Eigen::MatrixXd SymSparseMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
  for (const auto& [ij, v] : entries_) {
    m(ij.first, ij.second) = v;
    m(ij.second, ij.first) = v;
  }
  return m;
}

Eigen::SparseMatrix<double> SymSparseMatrix::to_sparse() const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(entries_.size() * 2);
  for (const auto& [ij, v] : entries_) {
    trip.emplace_back(ij.first, ij.second, v);
    if (ij.first != ij.second) trip.emplace_back(ij.second, ij.first, v);
  }
  Eigen::SparseMatrix<double> m(dim_, dim_);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::VectorXd SymSparseMatrix::diagonal() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(dim_);
  for (const auto& [ij, v] : entries_)
    if (ij.first == ij.second) d[ij.first] = v;
  return d;
}

std::vector<Index> SylvesterFactors::dims() const {
  std::vector<Index> d;
  d.reserve(factors.size());
  for (const auto& f : factors) d.push_back(f.dim());
  return d;
}

Index SylvesterFactors::total_dim() const {
  return static_cast<Index>(checked_product(dims()));
}

void SylvesterFactors::check_dims(const std::vector<Index>& target) const {
  if (dims() != target)
    throw DimensionError("factor dimensions do not match tensor dimensions");
}

}  // namespace kronsolve

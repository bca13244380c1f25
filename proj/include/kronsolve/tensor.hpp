#pragma once

#include <Eigen/Dense>
#include <vector>

namespace kronsolve {

using Eigen::Index;

// Dense K-way tensor stored in vectorized order: the first mode varies
// fastest, so flat(i_0,...,i_{K-1}) = i_0 + d_0*(i_1 + d_1*(i_2 + ...)).
// Every file format and oracle in this project uses this one layout.
class DenseTensor {
 public:
  DenseTensor() = default;
  // Zero-initialized tensor of the given shape.
  explicit DenseTensor(std::vector<Index> dims);
  DenseTensor(std::vector<Index> dims, Eigen::VectorXd values);

  Index order() const { return static_cast<Index>(dims_.size()); }
  const std::vector<Index>& dims() const { return dims_; }
  Index dim(Index k) const { return dims_[static_cast<std::size_t>(k)]; }
  Index size() const { return values_.size(); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  double operator()(const std::vector<Index>& idx) const { return values_[flat_index(idx)]; }
  double& operator()(const std::vector<Index>& idx) { return values_[flat_index(idx)]; }

  Index flat_index(const std::vector<Index>& idx) const;
  std::vector<Index> multi_index(Index flat) const;

  bool same_shape(const DenseTensor& other) const { return dims_ == other.dims_; }

 private:
  std::vector<Index> dims_;
  Eigen::VectorXd values_;
};

// vec(t): the flat vector in first-mode-fastest order (identity on storage).
const Eigen::VectorXd& vec(const DenseTensor& t);

// devec: rebuilds a tensor of shape `dims` from a flat vector.
DenseTensor devec(const std::vector<Index>& dims, const Eigen::VectorXd& v);

// Mode-k matricization (k is 0-based): rows index mode k, columns enumerate
// the remaining modes in vec order. vec(matricize(t, 0)) == vec(t).
Eigen::MatrixXd matricize(const DenseTensor& t, Index mode);

// Inverse of matricize for a tensor of shape `dims`.
DenseTensor fold(const Eigen::MatrixXd& m, const std::vector<Index>& dims, Index mode);

// k-mode product: contracts mode k of t with the columns of A (J x d_k),
// replacing d_k by J. matricize(result, k) == A * matricize(t, k).
DenseTensor kmode_product(const DenseTensor& t, const Eigen::MatrixXd& a, Index mode);

// In-place variant accumulating into out.values(): out += X x_k A with A square.
void add_kmode_product(const DenseTensor& t, const Eigen::MatrixXd& a, Index mode,
                       Eigen::VectorXd& out);

std::size_t checked_product(const std::vector<Index>& dims);

}  // namespace kronsolve

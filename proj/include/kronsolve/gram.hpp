#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "kronsolve/sym_sparse.hpp"
#include "kronsolve/tensor.hpp"

namespace kronsolve {

// N independent tensor observations sharing one shape.
struct SampleSet {
  std::vector<Index> dims;
  std::vector<DenseTensor> samples;

  SampleSet() = default;
  SampleSet(std::vector<Index> d, std::vector<DenseTensor> s);

  Index n() const { return static_cast<Index>(samples.size()); }
  Index order() const { return static_cast<Index>(dims.size()); }
  Index total_dim() const { return static_cast<Index>(checked_product(dims)); }

  // Interprets the last mode of t as the observation mode and slices it
  // into per-sample tensors of the remaining modes.
  static SampleSet from_tensor_last_mode(const DenseTensor& t);
  DenseTensor to_tensor_last_mode() const;

  // Removes the per-entry mean across samples (optional preprocessing;
  // the model itself assumes zero mean and the statistics use data as-is).
  void center_per_entry();
};

// S_k = (1/N) sum_i X^i_(k) X^i_(k)^T.
Eigen::MatrixXd mode_gram(const SampleSet& data, Index mode);

// S_{j,k} = (1/N) sum_i matricize(X^i x_j Psi_j, k) matricize(X^i, k)^T for
// j != k, realized through the k-mode product rather than explicit
// identity-padded Kronecker matrices. Symmetric and linear in Psi_j.
Eigen::MatrixXd cross_gram(const SampleSet& data, const SylvesterFactors& factors, Index j,
                           Index k);
Eigen::MatrixXd cross_gram(const SampleSet& data, const Eigen::MatrixXd& psi_j, Index j,
                           Index k);

// Dense S = (1/N) sum_i vec(X^i) vec(X^i)^T, desk scale only.
Eigen::MatrixXd sample_covariance(const SampleSet& data, Index cap = 4096);

// Data statistics backend shared by the solvers. Mode Grams are always
// precomputed; for pairs (j,l) with d_j*d_l within the cap the pairwise
// Gram C_{j,l} = (1/N) sum_i X_(j,l) X_(j,l)^T is cached as well, which
// turns every later cross-Gram into a contraction independent of N and d.
// Pairs above the cap fall back to streaming over the samples.
class GramCache {
 public:
  explicit GramCache(const SampleSet& data, Index pair_cache_cap = 4096);

  Index n() const { return data_.n(); }
  Index order() const { return data_.order(); }
  const std::vector<Index>& dims() const { return data_.dims; }
  const SampleSet& data() const { return data_; }

  const Eigen::MatrixXd& mode_gram(Index k) const;

  // S_{j,k} given a dense Psi_j.
  Eigen::MatrixXd cross(Index j, Index k, const Eigen::MatrixXd& psi_j) const;

  // sum over j != k of S_{j,k} with the provided factor set.
  Eigen::MatrixXd cross_sum(Index k, const std::vector<Eigen::MatrixXd>& psi) const;

  // (1/N) sum_i <X^i x_j Psi_j, X^i x_l Psi_l> for j != l.
  double pair_cross(Index j, Index l, const Eigen::MatrixXd& psi_j,
                    const Eigen::MatrixXd& psi_l) const;

 private:
  const Eigen::MatrixXd* pair_gram(Index j, Index l) const;  // nullptr if not cached

  SampleSet data_;
  std::vector<Eigen::MatrixXd> mode_grams_;
  // Upper-triangular pair table keyed by (min, max).
  std::vector<std::vector<std::optional<Eigen::MatrixXd>>> pair_grams_;
};

}  // namespace kronsolve

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "kronsolve/gram.hpp"
#include "kronsolve/sgpalm.hpp"
#include "kronsolve/tensor.hpp"

namespace kronsolve {

// Nodewise cyclic coordinate descent for the same penalized pseudolikelihood
// as SG-PALM, parameterized by the off-diagonals of each factor plus a free
// positive W tensor (the diagonal surrogate). Off-diagonal entries have
// closed-form soft-threshold updates; W entries solve a per-entry quadratic.

struct SyGlassoConfig {
  Index max_sweeps = 200;
  double rel_tol = 1e-6;
  std::vector<double> lambda;  // per-mode penalty weight (same convention as SG-PALM)
  // When set, W is held fixed at the given tensor (theory-faithful mode)
  // instead of being re-estimated each sweep.
  std::optional<Eigen::VectorXd> fixed_w;

  void validate(Index order) const;
};

struct SyGlassoResult {
  SylvesterFactors offdiag_factors;  // zero diagonals by construction
  DenseTensor w;                     // estimated (or fixed) W tensor
  SolveTrace trace;
  bool converged = false;
  double objective = 0.0;
};

// Objective Q_N(W, {Psi_k^off}): -N sum_i log W_i
//   + (1/2) sum_s || W o X^s + sum_k X^s x_k Psi_k^off ||^2
//   + sum_k lambda_k ||Psi_k||_{1,off}.
// Equals the SG-PALM objective when W is the Kronecker sum of the factor
// diagonals.
double syglasso_objective(const SampleSet& data, const std::vector<Eigen::MatrixXd>& psi_off,
                          const Eigen::VectorXd& w, const std::vector<double>& lambda);

// Closed-form minimizer of Q_N in the single symmetric coordinate
// (Psi_k)_{ij} = (Psi_k)_{ji}, i < j, holding everything else fixed.
// Pure streaming implementation; the fit engine maintains the same
// quantities incrementally.
double offdiag_update(const SampleSet& data, const std::vector<Eigen::MatrixXd>& psi_off,
                      const Eigen::VectorXd& w, Index k, Index i, Index j, double lambda_k);

// Entrywise positive root of a W^2 + b W - 1 = 0 with
//   a_i = (1/N) sum_s (X^s_i)^2,  b_i = (1/N) sum_s X^s_i Y^s_i,
//   Y^s = sum_k X^s x_k Psi_k^off.
// Throws DomainError when some a_i <= 0 (degenerate data at that index).
Eigen::VectorXd diag_update(const SampleSet& data, const std::vector<Eigen::MatrixXd>& psi_off);

SyGlassoResult syglasso_fit(const SampleSet& data, const SyGlassoConfig& config);

}  // namespace kronsolve

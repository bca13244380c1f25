#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "kronsolve/gram.hpp"
#include "kronsolve/penalties.hpp"
#include "kronsolve/sym_sparse.hpp"

namespace kronsolve {

// Proximal alternating linearized minimization for the penalized negative
// log-pseudolikelihood
//   L(Psi) = -(N/2) log|(kronsum_k diag(Psi_k))^2|
//            + (N/2) tr(S (kronsum_k Psi_k)^2) + sum_k P_k(Psi_k),
// with cyclic block prox-gradient sweeps, backtracking line search and
// Barzilai-Borwein initial steps.

struct SolverConfig {
  Index max_iters = 200;
  double rel_tol = 1e-6;
  double backtrack_c = 0.5;  // in (0,1)
  double eta0 = 1.0;         // initial step
  std::vector<PenaltySpec> penalties;  // one per mode
  std::uint64_t seed = 0;    // reserved for randomized initialization
  Index pair_cache_cap = 4096;

  void validate(Index order) const;
};

struct IterationRecord {
  Index iter = 0;
  double objective = 0.0;
  std::vector<double> eta;        // accepted step per mode
  std::vector<Index> nnz_offdiag; // stored off-diagonal nonzeros per mode
  std::vector<Index> ls_trials;   // line-search trials per mode
};

struct SolveTrace {
  std::vector<IterationRecord> iterations;
  std::string csv(Index order) const;  // iter,objective,eta_1..K,nnz_1..K
};

struct SgPalmResult {
  SylvesterFactors factors;
  SolveTrace trace;
  bool converged = false;
  double objective = 0.0;
};

// W tensor entries W_i = sum_k diag_k[i_k] for the given per-mode diagonals.
// Throws DomainError naming the offending multi-index if an entry is not
// strictly positive.
Eigen::VectorXd w_from_diags(const std::vector<Index>& dims,
                             const std::vector<Eigen::VectorXd>& diags);

// Penalized objective L at the given (dense, symmetric) factors.
double sgpalm_objective(const GramCache& stats, const std::vector<Eigen::MatrixXd>& psi,
                        const std::vector<PenaltySpec>& penalties);

// Convenience overloads on sparse factor sets.
double sgpalm_objective(const GramCache& stats, const SylvesterFactors& factors,
                        const std::vector<PenaltySpec>& penalties);

// Gradient of the smooth part H with respect to block k:
//   -N * diag(slice sums of 1/W) + (N/2)(S_k Psi_k + Psi_k S_k)
//   + N * sum_{j != k} S_{j,k}.
Eigen::MatrixXd block_gradient(const GramCache& stats, const std::vector<Eigen::MatrixXd>& psi,
                               Index k);

// Backtracking line search on an arbitrary smooth block function. Returns the
// largest eta in {eta_init * c^j} whose prox-gradient candidate satisfies
//   h(cand) <= h(x) + <grad, cand - x> + ||cand - x||_F^2 / (2 eta).
// h may return +inf to reject infeasible candidates.
struct LineSearchResult {
  double eta = 0.0;
  Eigen::MatrixXd candidate;
  Index trials = 0;
};

LineSearchResult line_search(const std::function<double(const Eigen::MatrixXd&)>& h,
                             const Eigen::MatrixXd& x, double h_at_x,
                             const Eigen::MatrixXd& grad,
                             const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double)>&
                                 prox,  // (gradient step point, eta) -> candidate
                             double eta_init, double c);

// Barzilai-Borwein step ||dPsi||_F^2 / tr(dPsi^T dGrad); falls back to
// `fallback` when the denominator is nonpositive or the ratio nonfinite.
double bb_step(const Eigen::MatrixXd& delta_psi, const Eigen::MatrixXd& delta_grad,
               double fallback);

SgPalmResult sgpalm_fit(const SampleSet& data, const SolverConfig& config);
SgPalmResult sgpalm_fit(const GramCache& stats, const SolverConfig& config);

}  // namespace kronsolve

#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "kronsolve/sym_sparse.hpp"
#include "kronsolve/tensor.hpp"

namespace kronsolve {

// Per-factor boolean masks of off-diagonal nonzeros; symmetric, diagonal
// excluded. Entries with |value| > threshold count as edges.
struct SupportMask {
  std::vector<Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>> masks;

  static SupportMask from_factors(const SylvesterFactors& factors, double threshold = 1e-8);
  static SupportMask from_dense(const std::vector<Eigen::MatrixXd>& mats,
                                double threshold = 1e-8);
};

struct ConfusionCounts {
  Index tp = 0, tn = 0, fp = 0, fn = 0;
};

// Counts over the upper-triangle off-diagonal entries of all factors pooled.
ConfusionCounts pooled_confusion(const SupportMask& est, const SupportMask& truth);

// Matthews correlation coefficient over the pooled counts; 0 when any
// denominator factor vanishes.
double mcc(const SupportMask& est, const SupportMask& truth);
double mcc_from_counts(const ConfusionCounts& c);
std::vector<double> mcc_per_factor(const SupportMask& est, const SupportMask& truth);

// RMSE over all entries divided by (max - min) of the truth. Errors on a
// constant truth field.
double nrmse(const DenseTensor& pred, const DenseTensor& truth);
// Per-entry |pred - truth| / (max - min of truth).
DenseTensor nrmse_per_entry(const DenseTensor& pred, const DenseTensor& truth);

// ||est - truth||_F / ||truth||_F; log10 with a floor of -16 when requested.
double fnorm_rel_error(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth,
                       bool log_scale = false);

// (FPR, FNR) with the 0/0 -> 0 convention.
std::pair<double, double> fpr_fnr(const SupportMask& est, const SupportMask& truth);

}  // namespace kronsolve

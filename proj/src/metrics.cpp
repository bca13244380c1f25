#include "kronsolve/metrics.hpp"

#include <cmath>

#include "kronsolve/errors.hpp"

namespace kronsolve {

SupportMask SupportMask::from_dense(const std::vector<Eigen::MatrixXd>& mats, double threshold) {
  SupportMask out;
  out.masks.reserve(mats.size());
  for (const auto& m : mats) {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask(m.rows(), m.cols());
    mask.setConstant(false);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        if (i != j && std::abs(m(i, j)) > threshold) mask(i, j) = true;
    out.masks.push_back(std::move(mask));
  }
  return out;
}

SupportMask SupportMask::from_factors(const SylvesterFactors& factors, double threshold) {
  std::vector<Eigen::MatrixXd> dense;
  dense.reserve(factors.factors.size());
  for (const auto& f : factors.factors) dense.push_back(f.to_dense());
  return from_dense(dense, threshold);
}

ConfusionCounts pooled_confusion(const SupportMask& est, const SupportMask& truth) {
  if (est.masks.size() != truth.masks.size())
    throw DimensionError("support masks have different factor counts");
  ConfusionCounts c;
  for (std::size_t k = 0; k < est.masks.size(); ++k) {
    const auto& e = est.masks[k];
    const auto& t = truth.masks[k];
    if (e.rows() != t.rows()) throw DimensionError("support masks have different dimensions");
    for (Index i = 0; i < e.rows(); ++i)
      for (Index j = i + 1; j < e.cols(); ++j) {
        if (e(i, j) && t(i, j)) ++c.tp;
        else if (e(i, j) && !t(i, j)) ++c.fp;
        else if (!e(i, j) && t(i, j)) ++c.fn;
        else ++c.tn;
      }
  }
  return c;
}

double mcc_from_counts(const ConfusionCounts& c) {
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom <= 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

double mcc(const SupportMask& est, const SupportMask& truth) {
  return mcc_from_counts(pooled_confusion(est, truth));
}

std::vector<double> mcc_per_factor(const SupportMask& est, const SupportMask& truth) {
  std::vector<double> out;
  out.reserve(est.masks.size());
  for (std::size_t k = 0; k < est.masks.size(); ++k) {
    SupportMask e, t;
    e.masks.push_back(est.masks[k]);
    t.masks.push_back(truth.masks[k]);
    out.push_back(mcc(e, t));
  }
  return out;
}

namespace {

double truth_range(const DenseTensor& truth) {
  const double lo = truth.values().minCoeff();
  const double hi = truth.values().maxCoeff();
  if (!(hi > lo))
    throw DomainError("nrmse undefined for a constant truth field (max == min)");
  return hi - lo;
}

}  // namespace

double nrmse(const DenseTensor& pred, const DenseTensor& truth) {
  if (!pred.same_shape(truth)) throw DimensionError("nrmse: shape mismatch");
  const double range = truth_range(truth);
  const double mse = (pred.values() - truth.values()).squaredNorm() /
                     static_cast<double>(truth.size());
  return std::sqrt(mse) / range;
}

DenseTensor nrmse_per_entry(const DenseTensor& pred, const DenseTensor& truth) {
  if (!pred.same_shape(truth)) throw DimensionError("nrmse: shape mismatch");
  const double range = truth_range(truth);
  return DenseTensor(truth.dims(),
                     (pred.values() - truth.values()).cwiseAbs() / range);
}

double fnorm_rel_error(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth, bool log_scale) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols())
    throw DimensionError("fnorm_rel_error: shape mismatch");
  const double tn = truth.norm();
  if (tn == 0.0) throw DomainError("fnorm_rel_error undefined for zero truth");
  const double rel = (est - truth).norm() / tn;
  if (!log_scale) return rel;
  return rel > 0.0 ? std::max(std::log10(rel), -16.0) : -16.0;
}

std::pair<double, double> fpr_fnr(const SupportMask& est, const SupportMask& truth) {
  const ConfusionCounts c = pooled_confusion(est, truth);
  const double fpr = (c.fp + c.tn) > 0 ? static_cast<double>(c.fp) /
                                             static_cast<double>(c.fp + c.tn)
                                       : 0.0;
  const double fnr = (c.fn + c.tp) > 0 ? static_cast<double>(c.fn) /
                                             static_cast<double>(c.fn + c.tp)
                                       : 0.0;
  return {fpr, fnr};
}

}  // namespace kronsolve

#include "kronsolve/sgpalm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "kronsolve/errors.hpp"

namespace kronsolve {

namespace {

constexpr double kEtaUnderflow = 1e-12;

std::string multi_index_string(const std::vector<Index>& dims, Index flat) {
  std::string s = "(";
  for (std::size_t k = 0; k < dims.size(); ++k) {
    s += std::to_string(flat % dims[k]);
    flat /= dims[k];
    s += (k + 1 < dims.size()) ? "," : ")";
  }
  return s;
}

// Per-mode slice sums of 1/W: out[i] = sum over multi-indices with mode-k
// coordinate i of 1/W. O(d) per mode, never a matrix inversion.
Eigen::VectorXd reciprocal_slice_sums(const std::vector<Index>& dims, const Eigen::VectorXd& w,
                                      Index mode) {
  Index sb = 1;
  for (Index k = 0; k < mode; ++k) sb *= dims[static_cast<std::size_t>(k)];
  const Index dk = dims[static_cast<std::size_t>(mode)];
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dk);
  for (Index f = 0; f < w.size(); ++f) out[(f / sb) % dk] += 1.0 / w[f];
  return out;
}

std::vector<Eigen::MatrixXd> to_dense(const SylvesterFactors& f) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(f.factors.size());
  for (const auto& m : f.factors) out.push_back(m.to_dense());
  return out;
}

}  // namespace

void SolverConfig::validate(Index order) const {
  if (max_iters < 1) throw DomainError("max_iters must be positive");
  if (rel_tol <= 0.0) throw DomainError("rel_tol must be positive");
  if (backtrack_c <= 0.0 || backtrack_c >= 1.0)
    throw DomainError("backtracking constant must lie in (0,1)");
  if (eta0 <= 0.0) throw DomainError("initial step must be positive");
  if (static_cast<Index>(penalties.size()) != order)
    throw DimensionError("need one penalty spec per mode");
  for (const auto& p : penalties) p.validate();
}

Eigen::VectorXd w_from_diags(const std::vector<Index>& dims,
                             const std::vector<Eigen::VectorXd>& diags) {
  const Index d = static_cast<Index>(checked_product(dims));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Index sb = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const Index dk = dims[k];
    const Eigen::VectorXd& diag = diags[k];
    for (Index f = 0; f < d; ++f) w[f] += diag[(f / sb) % dk];
    sb *= dk;
  }
  for (Index f = 0; f < d; ++f)
    if (!(w[f] > 0.0))
      throw DomainError("W tensor entry at " + multi_index_string(dims, f) +
                        " is not strictly positive (" + std::to_string(w[f]) + ")");
  return w;
}

double sgpalm_objective(const GramCache& stats, const std::vector<Eigen::MatrixXd>& psi,
                        const std::vector<PenaltySpec>& penalties) {
  const Index order = stats.order();
  const double n = static_cast<double>(stats.n());
  std::vector<Eigen::VectorXd> diags;
  diags.reserve(psi.size());
  for (const auto& m : psi) diags.push_back(m.diagonal());
  const Eigen::VectorXd w = w_from_diags(stats.dims(), diags);

  double logdet = 0.0;
  for (Index f = 0; f < w.size(); ++f) logdet += std::log(w[f]);

  double trace = 0.0;
  for (Index k = 0; k < order; ++k) {
    const auto& pk = psi[static_cast<std::size_t>(k)];
    trace += (pk * stats.mode_gram(k) * pk).trace();
  }
  for (Index j = 0; j < order; ++j)
    for (Index l = j + 1; l < order; ++l)
      trace += 2.0 * stats.pair_cross(j, l, psi[static_cast<std::size_t>(j)],
                                      psi[static_cast<std::size_t>(l)]);

  double pen = 0.0;
  for (Index k = 0; k < order; ++k)
    pen += penalty_value(penalties[static_cast<std::size_t>(k)], psi[static_cast<std::size_t>(k)]);

  return -n * logdet + 0.5 * n * trace + pen;
}

double sgpalm_objective(const GramCache& stats, const SylvesterFactors& factors,
                        const std::vector<PenaltySpec>& penalties) {
  return sgpalm_objective(stats, to_dense(factors), penalties);
}

Eigen::MatrixXd block_gradient(const GramCache& stats, const std::vector<Eigen::MatrixXd>& psi,
                               Index k) {
  const double n = static_cast<double>(stats.n());
  std::vector<Eigen::VectorXd> diags;
  diags.reserve(psi.size());
  for (const auto& m : psi) diags.push_back(m.diagonal());
  const Eigen::VectorXd w = w_from_diags(stats.dims(), diags);

  const auto& pk = psi[static_cast<std::size_t>(k)];
  const Eigen::MatrixXd& sk = stats.mode_gram(k);
  Eigen::MatrixXd g = 0.5 * n * (sk * pk + pk * sk);
  g += n * stats.cross_sum(k, psi);
  g -= (n * reciprocal_slice_sums(stats.dims(), w, k)).asDiagonal();
  return 0.5 * (g + g.transpose());
}

LineSearchResult line_search(
    const std::function<double(const Eigen::MatrixXd&)>& h, const Eigen::MatrixXd& x,
    double h_at_x, const Eigen::MatrixXd& grad,
    const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double)>& prox, double eta_init,
    double c) {
  if (eta_init <= 0.0) throw DomainError("line search needs a positive initial step");
  double eta = eta_init;
  bool have_decrease = false;
  LineSearchResult best_decrease;
  for (Index trial = 1;; ++trial) {
    Eigen::MatrixXd cand = prox(x - eta * grad, eta);
    const Eigen::MatrixXd delta = cand - x;
    const double h_new = h(cand);
    const double q = h_at_x + grad.cwiseProduct(delta).sum() +
                     delta.squaredNorm() / (2.0 * eta);
    if (h_new <= q) return {eta, std::move(cand), trial};
    if (h_new <= h_at_x && !have_decrease) {
      // Keep the best plainly-decreasing candidate in case the quadratic
      // test never passes within floating-point resolution.
      best_decrease = {eta, cand, trial};
      have_decrease = true;
    }
    eta *= c;
    if (eta < kEtaUnderflow) {
      if (have_decrease) return best_decrease;
      throw NumericalError(
          "line search step underflow below 1e-12: gradient and objective are inconsistent");
    }
  }
}

double bb_step(const Eigen::MatrixXd& delta_psi, const Eigen::MatrixXd& delta_grad,
               double fallback) {
  const double denom = delta_psi.cwiseProduct(delta_grad).sum();
  if (denom <= 0.0) return fallback;
  const double eta = delta_psi.squaredNorm() / denom;
  if (!std::isfinite(eta) || eta <= 0.0) return fallback;
  return eta;
}

namespace {

// Per-block state for one fit: factors kept dense and symmetric; W tracked
// as a flat vector.
class SgPalmEngine {
 public:
  SgPalmEngine(const GramCache& stats, const SolverConfig& config)
      : stats_(stats), cfg_(config), dims_(stats.dims()), order_(stats.order()) {
    cfg_.validate(order_);
    n_ = static_cast<double>(stats_.n());
    for (Index k = 0; k < order_; ++k)
      psi_.push_back(Eigen::MatrixXd::Identity(dims_[static_cast<std::size_t>(k)],
                                               dims_[static_cast<std::size_t>(k)]));
    refresh_w();
  }

  SgPalmResult run() {
    SgPalmResult result;
    double obj = objective();
    std::vector<double> eta_accepted(static_cast<std::size_t>(order_), cfg_.eta0);
    double eta_init = cfg_.eta0;

    for (Index t = 1; t <= cfg_.max_iters; ++t) {
      IterationRecord rec;
      rec.iter = t;
      rec.eta.resize(static_cast<std::size_t>(order_));
      rec.nnz_offdiag.resize(static_cast<std::size_t>(order_));
      rec.ls_trials.resize(static_cast<std::size_t>(order_));
      std::vector<double> eta_bb(static_cast<std::size_t>(order_));

      for (Index k = 0; k < order_; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const PenaltySpec& pen = cfg_.penalties[ku];
        const Eigen::MatrixXd cross = stats_.cross_sum(k, psi_);
        const Eigen::MatrixXd grad = smooth_block_gradient(k, psi_[ku], cross);
        const double h_old = partial_smooth(k, psi_[ku], cross);

        auto h = [&](const Eigen::MatrixXd& cand) { return partial_smooth(k, cand, cross); };
        auto prox = [&](const Eigen::MatrixXd& point, double eta) {
          Eigen::MatrixXd c = prox_offdiag(PenaltySpec::l1(pen.lambda), point, eta * pen.lambda);
          return Eigen::MatrixXd(0.5 * (c + c.transpose()));
        };
        LineSearchResult ls = line_search(h, psi_[ku], h_old, grad, prox, eta_init,
                                          cfg_.backtrack_c);

        const Eigen::MatrixXd delta = ls.candidate - psi_[ku];
        psi_[ku] = ls.candidate;
        refresh_w();
        const Eigen::MatrixXd grad_after = smooth_block_gradient(k, psi_[ku], cross);
        eta_bb[ku] = bb_step(delta, grad_after - grad, ls.eta);

        rec.eta[ku] = ls.eta;
        rec.ls_trials[ku] = ls.trials;
        eta_accepted[ku] = ls.eta;
      }
      eta_init = *std::min_element(eta_bb.begin(), eta_bb.end());

      const double obj_new = objective();
      for (Index k = 0; k < order_; ++k) {
        Index nnz = 0;
        const auto& m = psi_[static_cast<std::size_t>(k)];
        for (Index i = 0; i < m.rows(); ++i)
          for (Index j = i + 1; j < m.cols(); ++j)
            if (m(i, j) != 0.0) ++nnz;
        rec.nnz_offdiag[static_cast<std::size_t>(k)] = nnz;
      }
      rec.objective = obj_new;
      result.trace.iterations.push_back(rec);

      const bool converged = std::abs(obj_new - obj) <= cfg_.rel_tol * std::max(1.0, std::abs(obj));
      obj = obj_new;
      if (converged) {
        result.converged = true;
        break;
      }
    }

    result.objective = obj;
    std::vector<SymSparseMatrix> out;
    out.reserve(psi_.size());
    for (const auto& m : psi_) out.push_back(SymSparseMatrix::from_dense(m));
    result.factors = SylvesterFactors(std::move(out));
    return result;
  }

 private:
  double objective() const { return sgpalm_objective(stats_, psi_, cfg_.penalties); }

  void refresh_w() {
    std::vector<Eigen::VectorXd> diags;
    diags.reserve(psi_.size());
    for (const auto& m : psi_) diags.push_back(m.diagonal());
    w_ = w_from_diags(dims_, diags);
  }

  // W entries with block k's diagonal replaced by `diag`; returns false if
  // any entry would leave the positive domain.
  bool w_with_block_diag(Index k, const Eigen::VectorXd& diag, Eigen::VectorXd& out) const {
    Index sb = 1;
    for (Index j = 0; j < k; ++j) sb *= dims_[static_cast<std::size_t>(j)];
    const Index dk = dims_[static_cast<std::size_t>(k)];
    const Eigen::VectorXd cur = psi_[static_cast<std::size_t>(k)].diagonal();
    out.resize(w_.size());
    for (Index f = 0; f < w_.size(); ++f) {
      const Index i = (f / sb) % dk;
      out[f] = w_[f] - cur[i] + diag[i];
      if (!(out[f] > 0.0)) return false;
    }
    return true;
  }

  // The part of the (possibly non-convex-corrected) smooth function that
  // depends on block k alone:
  //   -N sum log W + (N/2)(tr(Psi S_k Psi) + 2 tr(Psi cross)) + corr_k(Psi),
  // up to a constant in the other blocks. +inf flags an infeasible W.
  double partial_smooth(Index k, const Eigen::MatrixXd& cand,
                        const Eigen::MatrixXd& cross) const {
    Eigen::VectorXd w;
    if (!w_with_block_diag(k, cand.diagonal(), w))
      return std::numeric_limits<double>::infinity();
    double logdet = 0.0;
    for (Index f = 0; f < w.size(); ++f) logdet += std::log(w[f]);
    const Eigen::MatrixXd& sk = stats_.mode_gram(k);
    double val = -n_ * logdet +
                 0.5 * n_ * ((cand * sk * cand).trace() + 2.0 * cross.cwiseProduct(cand).sum());
    const PenaltySpec& pen = cfg_.penalties[static_cast<std::size_t>(k)];
    if (pen.kind != PenaltyKind::L1) val += nonconvex_value(pen, cand);
    return val;
  }

  // Gradient of the same partial function (equals the full block gradient up
  // to the constant terms).
  Eigen::MatrixXd smooth_block_gradient(Index k, const Eigen::MatrixXd& cand,
                                        const Eigen::MatrixXd& cross) const {
    Eigen::VectorXd w;
    if (!w_with_block_diag(k, cand.diagonal(), w))
      throw DomainError("gradient requested at an infeasible iterate");
    const Eigen::MatrixXd& sk = stats_.mode_gram(k);
    Eigen::MatrixXd g = 0.5 * n_ * (sk * cand + cand * sk) + n_ * cross;
    g -= (n_ * reciprocal_slice_sums(dims_, w, k)).asDiagonal();
    const PenaltySpec& pen = cfg_.penalties[static_cast<std::size_t>(k)];
    if (pen.kind != PenaltyKind::L1) g += nonconvex_correction(pen, cand);
    return 0.5 * (g + g.transpose());
  }

  const GramCache& stats_;
  SolverConfig cfg_;
  std::vector<Index> dims_;
  Index order_;
  double n_ = 0.0;
  std::vector<Eigen::MatrixXd> psi_;
  Eigen::VectorXd w_;
};

}  // namespace

std::string SolveTrace::csv(Index order) const {
  std::ostringstream out;
  out.precision(17);
  out << "iter,objective";
  for (Index k = 1; k <= order; ++k) out << ",eta_" << k;
  for (Index k = 1; k <= order; ++k) out << ",nnz_" << k;
  out << "\n";
  for (const auto& rec : iterations) {
    out << rec.iter << "," << rec.objective;
    for (double e : rec.eta) out << "," << e;
    for (Index z : rec.nnz_offdiag) out << "," << z;
    out << "\n";
  }
  return out.str();
}

SgPalmResult sgpalm_fit(const GramCache& stats, const SolverConfig& config) {
  SgPalmEngine engine(stats, config);
  return engine.run();
}

SgPalmResult sgpalm_fit(const SampleSet& data, const SolverConfig& config) {
  GramCache stats(data, config.pair_cache_cap);
  return sgpalm_fit(stats, config);
}

}  // namespace kronsolve

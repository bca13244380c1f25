#include "kronsolve/syglasso.hpp"

#include <cmath>
#include <string>

#include "kronsolve/errors.hpp"
#include "kronsolve/penalties.hpp"

namespace kronsolve {

namespace {

// Y^s = sum_k X^s x_k Psi_k^off for one sample.
Eigen::VectorXd response(const DenseTensor& x, const std::vector<Eigen::MatrixXd>& psi_off) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (Index k = 0; k < x.order(); ++k)
    add_kmode_product(x, psi_off[static_cast<std::size_t>(k)], k, y);
  return y;
}

void check_positive_w(const Eigen::VectorXd& w) {
  for (Index f = 0; f < w.size(); ++f)
    if (!(w[f] > 0.0))
      throw DomainError("W entry " + std::to_string(f) + " is not strictly positive");
}

}  // namespace

void SyGlassoConfig::validate(Index order) const {
  if (max_sweeps < 1) throw DomainError("max_sweeps must be positive");
  if (rel_tol <= 0.0) throw DomainError("rel_tol must be positive");
  if (static_cast<Index>(lambda.size()) != order)
    throw DimensionError("need one lambda per mode");
  for (double l : lambda)
    if (l < 0.0) throw DomainError("lambda must be nonnegative");
}

double syglasso_objective(const SampleSet& data, const std::vector<Eigen::MatrixXd>& psi_off,
                          const Eigen::VectorXd& w, const std::vector<double>& lambda) {
  check_positive_w(w);
  const double n = static_cast<double>(data.n());
  double logdet = 0.0;
  for (Index f = 0; f < w.size(); ++f) logdet += std::log(w[f]);
  double quad = 0.0;
  for (const auto& x : data.samples) {
    const Eigen::VectorXd r = w.cwiseProduct(x.values()) + response(x, psi_off);
    quad += r.squaredNorm();
  }
  double pen = 0.0;
  for (std::size_t k = 0; k < psi_off.size(); ++k)
    pen += penalty_value(PenaltySpec::l1(lambda[k]), psi_off[k]);
  return -n * logdet + 0.5 * quad + pen;
}

double offdiag_update(const SampleSet& data, const std::vector<Eigen::MatrixXd>& psi_off,
                      const Eigen::VectorXd& w, Index k, Index i, Index j, double lambda_k) {
  if (k < 0 || k >= data.order()) throw DimensionError("offdiag_update: mode out of range");
  const Index dk = data.dims[static_cast<std::size_t>(k)];
  if (i < 0 || j < 0 || i >= dk || j >= dk || i == j)
    throw DimensionError("offdiag_update needs distinct indices inside mode " +
                         std::to_string(k));
  check_positive_w(w);
  const double n = static_cast<double>(data.n());
  const double psi_old = psi_off[static_cast<std::size_t>(k)](i, j);

  // Accumulate the matricized inner products that make up the closed form;
  // phi is the derivative of the smooth part at psi = 0 divided by N.
  double m1 = 0.0, same = 0.0, cross = 0.0, denom = 0.0;
  for (const auto& x : data.samples) {
    const Eigen::MatrixXd xk = matricize(x, k);
    const Eigen::VectorXd wx = w.cwiseProduct(x.values());
    const Eigen::MatrixXd wxk = matricize(DenseTensor(data.dims, wx), k);
    m1 += wxk.row(i).dot(xk.row(j)) + wxk.row(j).dot(xk.row(i));

    // Same-mode term with entry (i,j) zeroed out of Psi_k^off.
    const Eigen::MatrixXd& pk = psi_off[static_cast<std::size_t>(k)];
    const Eigen::RowVectorXd pxi = pk.row(i) * xk;  // row i of Psi X_(k)
    const Eigen::RowVectorXd pxj = pk.row(j) * xk;
    same += pxi.dot(xk.row(j)) - psi_old * xk.row(j).dot(xk.row(j));
    same += pxj.dot(xk.row(i)) - psi_old * xk.row(i).dot(xk.row(i));

    for (Index l = 0; l < data.order(); ++l) {
      if (l == k) continue;
      const Eigen::MatrixXd vl = matricize(
          kmode_product(x, psi_off[static_cast<std::size_t>(l)], l), k);
      cross += vl.row(i).dot(xk.row(j)) + vl.row(j).dot(xk.row(i));
    }
    denom += xk.row(i).squaredNorm() + xk.row(j).squaredNorm();
  }
  m1 /= n;
  same /= n;
  cross /= n;
  denom /= n;
  if (!(denom > 0.0))
    throw DomainError("offdiag_update: data degenerate along mode-" + std::to_string(k) +
                      " fibers " + std::to_string(i) + " and " + std::to_string(j));
  const double f = -(m1 + same + cross);
  // Penalty counts both symmetric entries, hence the factor 2 on lambda.
  return soft_threshold(f, 2.0 * lambda_k / n) / denom;
}

Eigen::VectorXd diag_update(const SampleSet& data, const std::vector<Eigen::MatrixXd>& psi_off) {
  const double n = static_cast<double>(data.n());
  const Index d = data.total_dim();
  Eigen::VectorXd a = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (const auto& x : data.samples) {
    const Eigen::VectorXd y = response(x, psi_off);
    a += x.values().cwiseAbs2();
    b += x.values().cwiseProduct(y);
  }
  a /= n;
  b /= n;
  Eigen::VectorXd w(d);
  for (Index f = 0; f < d; ++f) {
    if (!(a[f] > 0.0))
      throw DomainError("diag_update: degenerate data at flat index " + std::to_string(f) +
                        " (zero second moment)");
    w[f] = (-b[f] + std::sqrt(b[f] * b[f] + 4.0 * a[f])) / (2.0 * a[f]);
  }
  return w;
}

SyGlassoResult syglasso_fit(const SampleSet& data, const SyGlassoConfig& config) {
  const Index order = data.order();
  config.validate(order);
  const double n = static_cast<double>(data.n());
  const Index d = data.total_dim();

  // Degenerate-data guard: every entry needs a positive second moment.
  {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(d);
    for (const auto& x : data.samples) a += x.values().cwiseAbs2();
    for (Index f = 0; f < d; ++f)
      if (!(a[f] > 0.0))
        throw DomainError("syglasso: degenerate data at flat index " + std::to_string(f) +
                          " (zero second moment; a = 0)");
  }

  std::vector<Eigen::MatrixXd> psi(static_cast<std::size_t>(order));
  std::vector<Eigen::MatrixXd> mode_grams(static_cast<std::size_t>(order));
  for (Index k = 0; k < order; ++k) {
    const Index dk = data.dims[static_cast<std::size_t>(k)];
    psi[static_cast<std::size_t>(k)] = Eigen::MatrixXd::Zero(dk, dk);
    mode_grams[static_cast<std::size_t>(k)] = mode_gram(data, k);
  }

  Eigen::VectorXd w;
  if (config.fixed_w) {
    w = *config.fixed_w;
    if (w.size() != d) throw DimensionError("fixed W tensor has the wrong size");
    check_positive_w(w);
  } else {
    // Matched initial iterate with SG-PALM's identity factors: W = K.
    w = Eigen::VectorXd::Constant(d, static_cast<double>(order));
  }

  SyGlassoResult result;
  double obj = syglasso_objective(data, psi, w, config.lambda);

  for (Index sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    for (Index k = 0; k < order; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const Index dk = data.dims[ku];
      const Eigen::MatrixXd& sk = mode_grams[ku];

      // Per-sweep constants for mode k: the W-weighted Gram and the
      // cross-mode Grams do not change while mode k's entries update.
      Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(dk, dk);
      Eigen::MatrixXd cg = Eigen::MatrixXd::Zero(dk, dk);
      for (const auto& x : data.samples) {
        const Eigen::MatrixXd xk = matricize(x, k);
        const Eigen::MatrixXd wxk =
            matricize(DenseTensor(data.dims, w.cwiseProduct(x.values())), k);
        m1.noalias() += wxk * xk.transpose();
        for (Index l = 0; l < order; ++l) {
          if (l == k) continue;
          const Eigen::MatrixXd vl =
              matricize(kmode_product(x, psi[static_cast<std::size_t>(l)], l), k);
          cg.noalias() += vl * xk.transpose();
        }
      }
      m1 /= n;
      cg /= n;

      // G = S_k Psi_k^off, maintained incrementally across coordinate
      // updates within this sweep.
      Eigen::MatrixXd g = sk * psi[ku];

      for (Index i = 0; i < dk; ++i) {
        for (Index j = i + 1; j < dk; ++j) {
          const double denom = sk(i, i) + sk(j, j);
          if (!(denom > 0.0))
            throw DomainError("syglasso: data degenerate along mode-" + std::to_string(k) +
                              " fibers " + std::to_string(i) + " and " + std::to_string(j));
          const double psi_old = psi[ku](i, j);
          const double phi = m1(i, j) + m1(j, i) + g(i, j) + g(j, i) - psi_old * denom +
                             cg(i, j) + cg(j, i);
          const double f = -phi;
          const double psi_new = soft_threshold(f, 2.0 * config.lambda[ku] / n) / denom;
          const double delta = psi_new - psi_old;
          if (delta != 0.0) {
            psi[ku](i, j) = psi_new;
            psi[ku](j, i) = psi_new;
            g.col(j) += delta * sk.col(i);
            g.col(i) += delta * sk.col(j);
          }
        }
      }

      // Drift guard on the incremental residual quantities.
      const Eigen::MatrixXd g_fresh = sk * psi[ku];
      const double drift = (g - g_fresh).cwiseAbs().maxCoeff();
      const double scale = std::max(1.0, g_fresh.cwiseAbs().maxCoeff());
      if (drift > 1e-8 * scale)
        throw NumericalError("syglasso: incremental residual drift " + std::to_string(drift) +
                             " exceeds tolerance");
    }

    if (!config.fixed_w) w = diag_update(data, psi);

    const double obj_new = syglasso_objective(data, psi, w, config.lambda);
    IterationRecord rec;
    rec.iter = sweep;
    rec.objective = obj_new;
    rec.eta.assign(static_cast<std::size_t>(order), 0.0);
    rec.ls_trials.assign(static_cast<std::size_t>(order), 0);
    rec.nnz_offdiag.resize(static_cast<std::size_t>(order));
    for (Index k = 0; k < order; ++k) {
      Index nnz = 0;
      const auto& m = psi[static_cast<std::size_t>(k)];
      for (Index i = 0; i < m.rows(); ++i)
        for (Index j = i + 1; j < m.cols(); ++j)
          if (m(i, j) != 0.0) ++nnz;
      rec.nnz_offdiag[static_cast<std::size_t>(k)] = nnz;
    }
    result.trace.iterations.push_back(rec);

    const bool converged = std::abs(obj_new - obj) <= config.rel_tol * std::max(1.0, std::abs(obj));
    obj = obj_new;
    if (converged) {
      result.converged = true;
      break;
    }
  }

  result.objective = obj;
  std::vector<SymSparseMatrix> out;
  out.reserve(psi.size());
  for (const auto& m : psi) out.push_back(SymSparseMatrix::from_dense(m));
  result.offdiag_factors = SylvesterFactors(std::move(out));
  result.w = DenseTensor(data.dims, w);
  return result;
}

}  // namespace kronsolve

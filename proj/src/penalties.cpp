#include "kronsolve/penalties.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "kronsolve/errors.hpp"

namespace kronsolve {

PenaltyKind penalty_kind_from_string(const std::string& s) {
  if (s == "l1") return PenaltyKind::L1;
  if (s == "scad") return PenaltyKind::Scad;
  if (s == "mcp") return PenaltyKind::Mcp;
  throw Error("unknown penalty '" + s + "' (expected l1, scad or mcp)");
}

void PenaltySpec::validate() const {
  if (lambda < 0.0) throw DomainError("penalty lambda must be nonnegative");
  if (kind == PenaltyKind::Scad && a <= 2.0) throw DomainError("SCAD requires shape a > 2");
  if (kind == PenaltyKind::Mcp && a <= 0.0) throw DomainError("MCP requires shape a > 0");
}

double soft_threshold(double x, double tau) {
  const double m = std::abs(x) - tau;
  return m > 0.0 ? std::copysign(m, x) : 0.0;
}

double penalty_g(const PenaltySpec& p, double t) {
  const double at = std::abs(t), l = p.lambda, a = p.a;
  switch (p.kind) {
    case PenaltyKind::L1:
      return l * at;
    case PenaltyKind::Scad:
      if (at <= l) return l * at;
      if (at <= a * l) return -(at * at - 2.0 * a * l * at + l * l) / (2.0 * (a - 1.0));
      return (a + 1.0) * l * l / 2.0;
    case PenaltyKind::Mcp:
      if (at <= a * l) return l * at - t * t / (2.0 * a);
      return a * l * l / 2.0;
  }
  return 0.0;
}

namespace {

// f(x) = step * g(x) + (x - v)^2 / 2, the scalar prox objective.
double prox_objective(const PenaltySpec& p, double v, double step, double x) {
  return step * penalty_g(p, x) + 0.5 * (x - v) * (x - v);
}

double pick_best(const PenaltySpec& p, double v, double step, const std::vector<double>& cands) {
  double best_x = cands.front();
  double best_f = prox_objective(p, v, step, best_x);
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const double f = prox_objective(p, v, step, cands[i]);
    // Ties go to the smaller magnitude (more shrinkage).
    if (f < best_f || (f == best_f && std::abs(cands[i]) < std::abs(best_x))) {
      best_f = f;
      best_x = cands[i];
    }
  }
  return best_x;
}

}  // namespace

double scalar_prox(const PenaltySpec& p, double v, double step) {
  p.validate();
  if (step < 0.0) throw DomainError("prox step must be nonnegative");
  const double l = p.lambda, a = p.a;
  if (step == 0.0 || l == 0.0) return v;
  if (p.kind == PenaltyKind::L1) return soft_threshold(v, step * l);

  const double s = std::copysign(1.0, v);
  const double av = std::abs(v);
  std::vector<double> cands;
  auto push_clamped = [&](double x, double lo, double hi) {
    cands.push_back(s * std::clamp(x, lo, hi));
  };
  cands.push_back(0.0);
  if (p.kind == PenaltyKind::Scad) {
    // Branch |x| <= l: soft threshold.
    push_clamped(std::max(av - step * l, 0.0), 0.0, l);
    // Branch l < |x| <= a*l: stationary point of the quadratic piece.
    const double denom = a - 1.0 - step;
    if (denom != 0.0) push_clamped(((a - 1.0) * av - step * a * l) / denom, l, a * l);
    push_clamped(l, l, a * l);
    push_clamped(a * l, l, a * l);
    // Branch |x| > a*l: g constant, identity.
    if (av > a * l) cands.push_back(v);
  } else {  // MCP
    const double denom = a - step;
    if (denom != 0.0) push_clamped(a * (av - step * l) / denom, 0.0, a * l);
    push_clamped(a * l, 0.0, a * l);
    if (av > a * l) cands.push_back(v);
  }
  return pick_best(p, v, step, cands);
}

double penalty_value(const PenaltySpec& p, const Eigen::MatrixXd& m) {
  p.validate();
  double acc = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j) acc += penalty_g(p, m(i, j));
  return acc;
}

double penalty_value(const PenaltySpec& p, const SymSparseMatrix& m) {
  p.validate();
  double acc = 0.0;
  for (const auto& [ij, v] : m.stored())
    if (ij.first != ij.second) acc += 2.0 * penalty_g(p, v);
  return acc;
}

Eigen::MatrixXd prox_offdiag(const PenaltySpec& p, const Eigen::MatrixXd& m, double tau) {
  p.validate();
  if (tau < 0.0) throw DomainError("prox tau must be nonnegative");
  const double step = (p.lambda > 0.0) ? tau / p.lambda : 0.0;
  Eigen::MatrixXd out = m;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      if (i == j) continue;
      out(i, j) = (p.kind == PenaltyKind::L1) ? soft_threshold(m(i, j), tau)
                                              : scalar_prox(p, m(i, j), step);
    }
  return out;
}

SymSparseMatrix prox_offdiag(const PenaltySpec& p, const SymSparseMatrix& m, double tau) {
  return SymSparseMatrix::from_dense(prox_offdiag(p, m.to_dense(), tau));
}

double nonconvex_q_derivative(const PenaltySpec& p, double t) {
  if (p.kind == PenaltyKind::L1 || t == 0.0) return 0.0;
  const double at = std::abs(t), l = p.lambda, a = p.a, s = std::copysign(1.0, t);
  if (p.kind == PenaltyKind::Scad) {
    if (at <= l) return 0.0;
    if (at <= a * l) return (l * s - t) / (a - 1.0);
    return -l * s;
  }
  // MCP
  if (at <= a * l) return -t / a;
  return -l * s;
}

Eigen::MatrixXd nonconvex_correction(const PenaltySpec& p, const Eigen::MatrixXd& m) {
  p.validate();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  if (p.kind == PenaltyKind::L1) return out;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j) out(i, j) = nonconvex_q_derivative(p, m(i, j));
  return out;
}

double nonconvex_value(const PenaltySpec& p, const Eigen::MatrixXd& m) {
  if (p.kind == PenaltyKind::L1) return 0.0;
  double acc = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j) acc += penalty_g(p, m(i, j)) - p.lambda * std::abs(m(i, j));
  return acc;
}

double theorem_lambda(double scale, Index dk, Index total_dim, Index n_samples) {
  // The objective keeps the N-scaled data terms, so the per-sample rate
  // C sqrt(d_k log d / N) is multiplied by N to live on the same scale.
  const double n = static_cast<double>(n_samples);
  return scale * n *
         std::sqrt(static_cast<double>(dk) * std::log(static_cast<double>(total_dim)) / n);
}

}  // namespace kronsolve

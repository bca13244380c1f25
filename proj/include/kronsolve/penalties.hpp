#pragma once

#include <Eigen/Dense>

#include "kronsolve/sym_sparse.hpp"

namespace kronsolve {

enum class PenaltyKind { L1, Scad, Mcp };

PenaltyKind penalty_kind_from_string(const std::string& s);

// Elementwise penalty g_lambda applied to off-diagonal entries. SCAD needs
// a > 2, MCP needs a > 0; lambda >= 0.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::L1;
  double lambda = 0.0;
  double a = 3.7;  // conventional defaults: SCAD 3.7, MCP 3.0

  static PenaltySpec l1(double lambda) { return {PenaltyKind::L1, lambda, 3.7}; }
  static PenaltySpec scad(double lambda, double a = 3.7) { return {PenaltyKind::Scad, lambda, a}; }
  static PenaltySpec mcp(double lambda, double a = 3.0) { return {PenaltyKind::Mcp, lambda, a}; }

  void validate() const;
  PenaltySpec with_lambda(double l) const {
    PenaltySpec p = *this;
    p.lambda = l;
    return p;
  }
};

// sign(x) * max(|x| - tau, 0).
double soft_threshold(double x, double tau);

// Scalar penalty value g_lambda(t).
double penalty_g(const PenaltySpec& p, double t);

// argmin_x step * g_lambda(x) + (x - v)^2 / 2, exact over the closed-form
// branch candidates; ties between branch minimizers resolve toward the
// smaller magnitude.
double scalar_prox(const PenaltySpec& p, double v, double step);

// sum of g over off-diagonal entries (both triangles).
double penalty_value(const PenaltySpec& p, const Eigen::MatrixXd& m);
double penalty_value(const PenaltySpec& p, const SymSparseMatrix& m);

// Off-diagonal proximal map with tau = step * lambda: diagonal entries pass
// through, off-diagonals get the scalar prox of step * g_lambda.
Eigen::MatrixXd prox_offdiag(const PenaltySpec& p, const Eigen::MatrixXd& m, double tau);
SymSparseMatrix prox_offdiag(const PenaltySpec& p, const SymSparseMatrix& m, double tau);

// q'_lambda(t) = d/dt (g_lambda(t) - lambda |t|), with q'(0) = 0. Zero for L1.
double nonconvex_q_derivative(const PenaltySpec& p, double t);

// Elementwise q' on off-diagonals, zero diagonal.
Eigen::MatrixXd nonconvex_correction(const PenaltySpec& p, const Eigen::MatrixXd& m);

// Off-diagonal sum of (g_lambda - lambda|t|); the non-smooth residual used
// by the non-convex line search.
double nonconvex_value(const PenaltySpec& p, const Eigen::MatrixXd& m);

// Theorem-scaled per-mode default: lambda_k = C * sqrt(d_k * log(d) / N).
double theorem_lambda(double scale, Index dk, Index total_dim, Index n_samples);

}  // namespace kronsolve

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <memory>
#include <vector>

#include "kronsolve/sym_sparse.hpp"
#include "kronsolve/tensor.hpp"

namespace kronsolve {

// Rectangular space grid plus time stepping for the synthetic dynamics.
struct GridSpec {
  Index d1 = 8;
  Index d2 = 8;
  double h = 1.0;    // mesh spacing
  double dt = 0.0;   // time step; <= 0 selects the model default (K-S)
  Index steps = 50;  // number of simulated steps T

  void validate() const;
};

enum class DynamicsKind { PoissonAr1, ConvectionDiffusion, KuramotoSivashinsky };

DynamicsKind dynamics_kind_from_string(const std::string& s);

struct DynamicsModel {
  DynamicsKind kind = DynamicsKind::PoissonAr1;
  double a = 0.5;        // AR(1) coefficient, |a| < 1
  double sigma_w = 1.0;  // driving noise standard deviation, >= 0
  double theta = 1.0;    // diffusivity, > 0
  double epsilon = 0.0;  // convection velocity

  void validate() const;
};

// Dirichlet 1-D Laplacian stencil: 2 on the diagonal, -1 off.
SymSparseMatrix laplacian_1d(Index n);

// Symmetric part of the one-sided first-difference stencil:
// 1 on the diagonal, -1/2 off. (The central-difference stencil is skew,
// so its symmetric part vanishes; this is the symmetrization that keeps a
// first-order term in the operator.)
SymSparseMatrix first_difference_sym(Index n);

// Convection-diffusion evolution factors
//   A~_d = 1/2 I + (dt*theta/h^2) A_d + (dt*eps/(2h)) D_d
// with A_d the Laplacian stencil and D_d = first_difference_sym(d).
SylvesterFactors convection_diffusion_factors(const GridSpec& grid, const DynamicsModel& model);

struct SimulationResult {
  std::vector<DenseTensor> states;  // T fields of shape (d1, d2)
  SylvesterFactors factor_pair;     // exact operator factors (empty for K-S)
};

// Z^0 = 0; Z^k = a Z^{k-1} + W^k with i.i.d. N(0, sigma_w^2) entries;
// (A_{d1} (+) A_{d2}) vec(U^k) = vec(Z^k) via a sparse factorization.
SimulationResult simulate_poisson_ar(const GridSpec& grid, const DynamicsModel& model,
                                     std::uint64_t seed);

// (A~_{d1} (+) A~_{d2}) vec(U^k) = vec(U^{k-1}) + optional N(0, forcing_std^2)
// right-hand-side forcing. Rejects parameter sets whose operator condition
// estimate exceeds 1e12.
SimulationResult simulate_convection_diffusion(const GridSpec& grid, const DynamicsModel& model,
                                               std::uint64_t seed, double forcing_std = 0.0,
                                               const DenseTensor* initial = nullptr);

// Kuramoto-Sivashinsky u_t + Lap u + Lap^2 u + |grad u|^2/2 = 0 on a periodic
// grid: implicit linear part through a precomputed sparse factorization,
// explicit central-difference nonlinearity. The only randomness is the
// i.i.d. N(0, 0.01) initial perturbation. Aborts on |u| > 1e6.
SimulationResult simulate_ks(const GridSpec& grid, const DynamicsModel& model,
                             std::uint64_t seed);

// Default K-S time step 0.1 * h^4 / 32 (one tenth of the explicit
// bi-Laplacian stability bound 2 h^4 / 64).
double ks_default_dt(double h);

// Joint space-time precision of the stacked Poisson-AR(1) trajectory:
// sigma_w^{-2} M^T M with M = B^T (x) (A_{d1} (+) A_{d2}) and B the
// upper-bidiagonal AR matrix (1 on the diagonal, -a above). Desk scale.
Eigen::MatrixXd blocked_precision(const DynamicsModel& model, const GridSpec& grid,
                                  Index cap = 4096);

// Deterministic one-step propagator (forcing disabled) reused by the
// ensemble filter's forecast.
class DynamicsStepper {
 public:
  virtual ~DynamicsStepper() = default;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& state) const = 0;
  virtual Index state_dim() const = 0;

  static std::unique_ptr<DynamicsStepper> make(const GridSpec& grid, const DynamicsModel& model);
};

}  // namespace kronsolve

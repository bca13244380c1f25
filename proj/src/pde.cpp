#include "kronsolve/pde.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <string>

#include "kronsolve/errors.hpp"
#include "kronsolve/kron.hpp"
#include "kronsolve/rng.hpp"

namespace kronsolve {

void GridSpec::validate() const {
  if (d1 < 1 || d2 < 1) throw DomainError("grid sizes must be positive");
  if (h <= 0.0) throw DomainError("mesh spacing must be positive");
  if (steps < 1) throw DomainError("step count must be positive");
}

DynamicsKind dynamics_kind_from_string(const std::string& s) {
  if (s == "poisson-ar") return DynamicsKind::PoissonAr1;
  if (s == "convection-diffusion") return DynamicsKind::ConvectionDiffusion;
  if (s == "ks") return DynamicsKind::KuramotoSivashinsky;
  throw Error("unknown dynamics model '" + s +
              "' (expected poisson-ar, convection-diffusion or ks)");
}

void DynamicsModel::validate() const {
  if (std::abs(a) >= 1.0) throw DomainError("AR coefficient must satisfy |a| < 1");
  if (sigma_w < 0.0) throw DomainError("noise standard deviation must be nonnegative");
  if (theta <= 0.0) throw DomainError("diffusivity must be positive");
}

SymSparseMatrix laplacian_1d(Index n) {
  if (n < 1) throw DomainError("laplacian_1d needs n >= 1");
  SymSparseMatrix m(n);
  for (Index i = 0; i < n; ++i) {
    m.set(i, i, 2.0);
    if (i + 1 < n) m.set(i, i + 1, -1.0);
  }
  return m;
}

SymSparseMatrix first_difference_sym(Index n) {
  if (n < 1) throw DomainError("first_difference_sym needs n >= 1");
  SymSparseMatrix m(n);
  for (Index i = 0; i < n; ++i) {
    m.set(i, i, 1.0);
    if (i + 1 < n) m.set(i, i + 1, -0.5);
  }
  return m;
}

namespace {

SymSparseMatrix cd_factor(Index n, const GridSpec& grid, const DynamicsModel& model) {
  const double dt = grid.dt > 0.0 ? grid.dt : 1.0;
  const double diff = dt * model.theta / (grid.h * grid.h);
  const double conv = dt * model.epsilon / (2.0 * grid.h);
  SymSparseMatrix m(n);
  const SymSparseMatrix lap = laplacian_1d(n);
  const SymSparseMatrix fd = first_difference_sym(n);
  for (Index i = 0; i < n; ++i) {
    m.set(i, i, 0.5 + diff * lap(i, i) + conv * fd(i, i));
    if (i + 1 < n) m.set(i, i + 1, diff * lap(i, i + 1) + conv * fd(i, i + 1));
  }
  return m;
}

// Eigenvalue range of a Kronecker sum from the per-factor spectra.
std::pair<double, double> kron_sum_eig_range(const SylvesterFactors& f) {
  double lo = 0.0, hi = 0.0;
  for (const auto& m : f.factors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.to_dense(), Eigen::EigenvaluesOnly);
    lo += es.eigenvalues().minCoeff();
    hi += es.eigenvalues().maxCoeff();
  }
  return {lo, hi};
}

void factorize(Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& solver,
               const SylvesterFactors& f) {
  solver.compute(kron_sum_sparse(f));
  if (solver.info() != Eigen::Success)
    throw NumericalError("sparse factorization of the Kronecker-sum operator failed");
}

Eigen::VectorXd gaussian_vector(CounterRng& rng, Index n, double std_dev) {
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = std_dev * rng.gaussian();
  return v;
}

}  // namespace

SylvesterFactors convection_diffusion_factors(const GridSpec& grid, const DynamicsModel& model) {
  return SylvesterFactors({cd_factor(grid.d1, grid, model), cd_factor(grid.d2, grid, model)});
}

SimulationResult simulate_poisson_ar(const GridSpec& grid, const DynamicsModel& model,
                                     std::uint64_t seed) {
  grid.validate();
  model.validate();
  if (model.kind != DynamicsKind::PoissonAr1)
    throw DomainError("simulate_poisson_ar called with a different model kind");
  SylvesterFactors factors({laplacian_1d(grid.d1), laplacian_1d(grid.d2)});
  // A_n is SPD (eigenvalues 2 - 2 cos(j pi / (n+1)) > 0), so the sum is too.
  const auto [lo, hi] = kron_sum_eig_range(factors);
  if (!(lo > 0.0)) throw NumericalError("Poisson operator unexpectedly singular");
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  factorize(solver, factors);

  const Index d = grid.d1 * grid.d2;
  CounterRng root(seed);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
  SimulationResult result;
  result.factor_pair = factors;
  result.states.reserve(static_cast<std::size_t>(grid.steps));
  for (Index k = 0; k < grid.steps; ++k) {
    CounterRng rng = root.substream(static_cast<std::uint64_t>(k));
    z = model.a * z + gaussian_vector(rng, d, model.sigma_w);
    Eigen::VectorXd u = solver.solve(z);
    result.states.emplace_back(std::vector<Index>{grid.d1, grid.d2}, std::move(u));
  }
  return result;
}

SimulationResult simulate_convection_diffusion(const GridSpec& grid, const DynamicsModel& model,
                                               std::uint64_t seed, double forcing_std,
                                               const DenseTensor* initial) {
  grid.validate();
  model.validate();
  if (model.kind != DynamicsKind::ConvectionDiffusion)
    throw DomainError("simulate_convection_diffusion called with a different model kind");
  SylvesterFactors factors = convection_diffusion_factors(grid, model);
  const auto [lo, hi] = kron_sum_eig_range(factors);
  if (!(lo > 0.0) || hi / lo > 1e12)
    throw DomainError("convection-diffusion operator is near singular (condition estimate " +
                      std::to_string(lo > 0.0 ? hi / lo : -1.0) + "); reject parameters");
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  factorize(solver, factors);

  const Index d = grid.d1 * grid.d2;
  CounterRng root(seed);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
  if (initial != nullptr) {
    if (initial->size() != d) throw DimensionError("initial field has the wrong size");
    u = initial->values();
  }
  SimulationResult result;
  result.factor_pair = factors;
  result.states.reserve(static_cast<std::size_t>(grid.steps));
  for (Index k = 0; k < grid.steps; ++k) {
    Eigen::VectorXd rhs = u;
    if (forcing_std > 0.0) {
      CounterRng rng = root.substream(static_cast<std::uint64_t>(k));
      rhs += gaussian_vector(rng, d, forcing_std);
    }
    u = solver.solve(rhs);
    result.states.emplace_back(std::vector<Index>{grid.d1, grid.d2}, u);
  }
  return result;
}

namespace {

// Periodic 2-D Laplacian (divided by h^2) on a d1 x d2 grid in vec order.
Eigen::SparseMatrix<double> periodic_laplacian_2d(Index d1, Index d2, double h) {
  const Index d = d1 * d2;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(5 * d));
  const double s = 1.0 / (h * h);
  auto flat = [&](Index i, Index j) { return i + d1 * j; };
  for (Index j = 0; j < d2; ++j)
    for (Index i = 0; i < d1; ++i) {
      const Index f = flat(i, j);
      trip.emplace_back(f, f, -4.0 * s);
      trip.emplace_back(f, flat((i + 1) % d1, j), s);
      trip.emplace_back(f, flat((i + d1 - 1) % d1, j), s);
      trip.emplace_back(f, flat(i, (j + 1) % d2), s);
      trip.emplace_back(f, flat(i, (j + d2 - 1) % d2), s);
    }
  Eigen::SparseMatrix<double> m(d, d);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

// Central-difference gradient magnitude term |grad u|^2 / 2, periodic.
Eigen::VectorXd ks_nonlinearity(const Eigen::VectorXd& u, Index d1, Index d2, double h) {
  Eigen::VectorXd out(u.size());
  auto flat = [&](Index i, Index j) { return i + d1 * j; };
  const double inv2h = 1.0 / (2.0 * h);
  for (Index j = 0; j < d2; ++j)
    for (Index i = 0; i < d1; ++i) {
      const double gx = (u[flat((i + 1) % d1, j)] - u[flat((i + d1 - 1) % d1, j)]) * inv2h;
      const double gy = (u[flat(i, (j + 1) % d2)] - u[flat(i, (j + d2 - 1) % d2)]) * inv2h;
      out[flat(i, j)] = 0.5 * (gx * gx + gy * gy);
    }
  return out;
}

class KsStepperImpl {
 public:
  KsStepperImpl(const GridSpec& grid) : d1_(grid.d1), d2_(grid.d2), h_(grid.h) {
    dt_ = grid.dt > 0.0 ? grid.dt : ks_default_dt(grid.h);
    // The implicit operator I + dt (L + L^2) stays positive definite only
    // for dt < 4 (the symbol dips to 1 - dt/4); checked at construction.
    if (dt_ >= 4.0)
      throw DomainError("K-S time step " + std::to_string(dt_) +
                        " violates the implicit-operator stability bound dt < 4");
    const Eigen::SparseMatrix<double> lap = periodic_laplacian_2d(d1_, d2_, h_);
    Eigen::SparseMatrix<double> ident(d1_ * d2_, d1_ * d2_);
    ident.setIdentity();
    const Eigen::SparseMatrix<double> op =
        ident + dt_ * lap + dt_ * Eigen::SparseMatrix<double>(lap * lap);
    solver_.compute(op);
    if (solver_.info() != Eigen::Success)
      throw NumericalError("K-S implicit operator factorization failed");
  }

  Eigen::VectorXd step(const Eigen::VectorXd& u, Index step_index) const {
    const Eigen::VectorXd rhs = u - dt_ * ks_nonlinearity(u, d1_, d2_, h_);
    Eigen::VectorXd next = solver_.solve(rhs);
    if (next.cwiseAbs().maxCoeff() > 1e6)
      throw NumericalError("K-S trajectory blow-up detected at step " +
                           std::to_string(step_index));
    return next;
  }

  double dt() const { return dt_; }

 private:
  Index d1_, d2_;
  double h_, dt_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

}  // namespace

double ks_default_dt(double h) { return 0.1 * h * h * h * h / 32.0; }

SimulationResult simulate_ks(const GridSpec& grid, const DynamicsModel& model,
                             std::uint64_t seed) {
  grid.validate();
  model.validate();
  if (model.kind != DynamicsKind::KuramotoSivashinsky)
    throw DomainError("simulate_ks called with a different model kind");
  KsStepperImpl stepper(grid);

  const Index d = grid.d1 * grid.d2;
  CounterRng rng(seed);
  Eigen::VectorXd u = gaussian_vector(rng, d, 0.1);  // i.i.d. N(0, 0.01)
  SimulationResult result;
  result.states.reserve(static_cast<std::size_t>(grid.steps));
  for (Index k = 0; k < grid.steps; ++k) {
    u = stepper.step(u, k);
    result.states.emplace_back(std::vector<Index>{grid.d1, grid.d2}, u);
  }
  return result;
}

Eigen::MatrixXd blocked_precision(const DynamicsModel& model, const GridSpec& grid, Index cap) {
  grid.validate();
  model.validate();
  if (model.kind != DynamicsKind::PoissonAr1)
    throw DomainError("blocked_precision covers the Poisson-AR(1) model only");
  const Index total = grid.d1 * grid.d2 * grid.steps;
  if (total > cap)
    throw DimensionError("blocked_precision: stacked dimension " + std::to_string(total) +
                         " exceeds dense cap " + std::to_string(cap));
  if (model.sigma_w <= 0.0) throw DomainError("blocked_precision needs sigma_w > 0");

  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(grid.steps, grid.steps);
  for (Index t = 0; t + 1 < grid.steps; ++t) b(t, t + 1) = -model.a;
  const Eigen::MatrixXd space =
      kron_sum_dense(SylvesterFactors({laplacian_1d(grid.d1), laplacian_1d(grid.d2)}), cap);
  const Eigen::MatrixXd m = kron_product_dense(b.transpose(), space);
  return (m.transpose() * m) / (model.sigma_w * model.sigma_w);
}

namespace {

class PoissonArStepper : public DynamicsStepper {
 public:
  PoissonArStepper(const GridSpec& grid, const DynamicsModel& model)
      : a_(model.a),
        factors_({laplacian_1d(grid.d1), laplacian_1d(grid.d2)}),
        dim_(grid.d1 * grid.d2) {
    factorize(solver_, factors_);
    dense_.reserve(2);
    for (const auto& f : factors_.factors) dense_.push_back(f.to_dense());
    dims_ = {grid.d1, grid.d2};
  }

  // u -> a u, routed through the model kernels: reconstruct the source
  // z = (A (+) A) u, advance the AR part without forcing, solve back.
  Eigen::VectorXd step(const Eigen::VectorXd& state) const override {
    const Eigen::VectorXd z = kron_sum_apply(dense_, dims_, state);
    return solver_.solve(a_ * z);
  }
  Index state_dim() const override { return dim_; }

 private:
  double a_;
  SylvesterFactors factors_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  std::vector<Eigen::MatrixXd> dense_;
  std::vector<Index> dims_;
  Index dim_;
};

class ConvectionDiffusionStepper : public DynamicsStepper {
 public:
  ConvectionDiffusionStepper(const GridSpec& grid, const DynamicsModel& model)
      : dim_(grid.d1 * grid.d2) {
    SylvesterFactors factors = convection_diffusion_factors(grid, model);
    const auto [lo, hi] = kron_sum_eig_range(factors);
    if (!(lo > 0.0) || hi / lo > 1e12)
      throw DomainError("convection-diffusion operator is near singular; reject parameters");
    factorize(solver_, factors);
  }

  Eigen::VectorXd step(const Eigen::VectorXd& state) const override {
    return solver_.solve(state);
  }
  Index state_dim() const override { return dim_; }

 private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  Index dim_;
};

class KsStepper : public DynamicsStepper {
 public:
  KsStepper(const GridSpec& grid) : impl_(grid), dim_(grid.d1 * grid.d2) {}
  Eigen::VectorXd step(const Eigen::VectorXd& state) const override {
    return impl_.step(state, -1);
  }
  Index state_dim() const override { return dim_; }

 private:
  KsStepperImpl impl_;
  Index dim_;
};

}  // namespace

std::unique_ptr<DynamicsStepper> DynamicsStepper::make(const GridSpec& grid,
                                                       const DynamicsModel& model) {
  grid.validate();
  model.validate();
  switch (model.kind) {
    case DynamicsKind::PoissonAr1:
      return std::make_unique<PoissonArStepper>(grid, model);
    case DynamicsKind::ConvectionDiffusion:
      return std::make_unique<ConvectionDiffusionStepper>(grid, model);
    case DynamicsKind::KuramotoSivashinsky:
      return std::make_unique<KsStepper>(grid);
  }
  throw Error("unreachable dynamics kind");
}

}  // namespace kronsolve

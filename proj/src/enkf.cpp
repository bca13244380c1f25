#include "kronsolve/enkf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "kronsolve/errors.hpp"
#include "kronsolve/kron.hpp"
#include "kronsolve/kten.hpp"
#include "kronsolve/sgpalm.hpp"
#include "kronsolve/syglasso.hpp"

namespace kronsolve {

void ObservationModel::validate() const {
  if (q_diag.size() < 1) throw DimensionError("observation model needs a state dimension");
  if (r() > d()) throw DimensionError("cannot observe more rows than state entries");
  if (r_diag.size() != r()) throw DimensionError("R diagonal size must match observed rows");
  for (Index i = 0; i < r_diag.size(); ++i)
    if (!(r_diag[i] > 0.0)) throw DomainError("R diagonal entries must be positive");
  for (Index i = 0; i < q_diag.size(); ++i)
    if (q_diag[i] < 0.0) throw DomainError("Q diagonal entries must be nonnegative");
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i] < 0 || observed[i] >= d())
      throw DimensionError("observed index out of range");
    if (i > 0 && observed[i] <= observed[i - 1])
      throw DimensionError("observed indices must be strictly increasing");
  }
}

Eigen::VectorXd ObservationModel::project(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(r());
  for (Index i = 0; i < r(); ++i) y[i] = x[observed[static_cast<std::size_t>(i)]];
  return y;
}

Eigen::VectorXd ObservationModel::lift(const Eigen::VectorXd& y) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d());
  for (Index i = 0; i < r(); ++i) x[observed[static_cast<std::size_t>(i)]] = y[i];
  return x;
}

namespace {

class IdentityEstimator : public EnsembleEstimator {
 public:
  std::string id() const override { return "identity"; }
  EstimatorOutput estimate(const SampleSet& anomalies) const override {
    const Index d = anomalies.total_dim();
    return {OperatorForm::Covariance,
            std::make_shared<DenseOperator>(Eigen::MatrixXd::Identity(d, d))};
  }
};

// Anomaly Gram plus a trace-scaled ridge, applied matrix-free.
class SampleRidgeOp : public LinearOperator {
 public:
  SampleRidgeOp(Eigen::MatrixXd anomalies, double ridge)
      : a_(std::move(anomalies)), ridge_(ridge) {}
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    return a_ * (a_.transpose() * x) / static_cast<double>(a_.cols()) + ridge_ * x;
  }
  Index dim() const override { return a_.rows(); }

 private:
  Eigen::MatrixXd a_;
  double ridge_;
};

class SampleRidgeEstimator : public EnsembleEstimator {
 public:
  explicit SampleRidgeEstimator(double ridge_scale) : ridge_scale_(ridge_scale) {}
  std::string id() const override { return "sample"; }
  EstimatorOutput estimate(const SampleSet& anomalies) const override {
    const Index d = anomalies.total_dim();
    const Index n = anomalies.n();
    Eigen::MatrixXd a(d, n);
    for (Index i = 0; i < n; ++i) a.col(i) = anomalies.samples[static_cast<std::size_t>(i)].values();
    const double trace = a.squaredNorm() / static_cast<double>(n);
    const double ridge = ridge_scale_ * trace / static_cast<double>(d);
    return {OperatorForm::Covariance, std::make_shared<SampleRidgeOp>(std::move(a), ridge)};
  }

 private:
  double ridge_scale_;
};

// (kronsum Psi_k + diag(w))^2 applied matrix-free; w may be empty when the
// factor diagonals already carry the diagonal part.
class KronSumSquaredOp : public LinearOperator {
 public:
  KronSumSquaredOp(std::vector<Eigen::MatrixXd> factors, std::vector<Index> dims,
                   Eigen::VectorXd w)
      : factors_(std::move(factors)), dims_(std::move(dims)), w_(std::move(w)) {
    dim_ = static_cast<Index>(checked_product(dims_));
  }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    return once(once(x));
  }
  Index dim() const override { return dim_; }

 private:
  Eigen::VectorXd once(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = kron_sum_apply(factors_, dims_, x);
    if (w_.size() > 0) y += w_.cwiseProduct(x);
    return y;
  }
  std::vector<Eigen::MatrixXd> factors_;
  std::vector<Index> dims_;
  Eigen::VectorXd w_;
  Index dim_;
};

std::vector<double> theorem_lambdas(const std::vector<Index>& dims, Index n, double scale) {
  const Index d = static_cast<Index>(checked_product(dims));
  std::vector<double> out;
  out.reserve(dims.size());
  for (Index dk : dims) out.push_back(theorem_lambda(scale, dk, d, n));
  return out;
}

class SgPalmEstimator : public EnsembleEstimator {
 public:
  explicit SgPalmEstimator(EstimatorOptions opt) : opt_(opt) {}
  std::string id() const override { return "sgpalm"; }
  EstimatorOutput estimate(const SampleSet& anomalies) const override {
    SolverConfig cfg;
    cfg.max_iters = opt_.max_iters;
    cfg.rel_tol = opt_.rel_tol;
    const auto lambdas = theorem_lambdas(anomalies.dims, anomalies.n(), opt_.lambda_scale);
    for (double l : lambdas) cfg.penalties.push_back(PenaltySpec::l1(l));
    const SgPalmResult fit = sgpalm_fit(anomalies, cfg);
    std::vector<Eigen::MatrixXd> dense;
    dense.reserve(fit.factors.factors.size());
    for (const auto& f : fit.factors.factors) dense.push_back(f.to_dense());
    return {OperatorForm::Precision,
            std::make_shared<KronSumSquaredOp>(std::move(dense), anomalies.dims,
                                               Eigen::VectorXd())};
  }

 private:
  EstimatorOptions opt_;
};

class SyGlassoEstimator : public EnsembleEstimator {
 public:
  explicit SyGlassoEstimator(EstimatorOptions opt) : opt_(opt) {}
  std::string id() const override { return "syglasso"; }
  EstimatorOutput estimate(const SampleSet& anomalies) const override {
    SyGlassoConfig cfg;
    cfg.max_sweeps = opt_.max_iters;
    cfg.rel_tol = opt_.rel_tol;
    cfg.lambda = theorem_lambdas(anomalies.dims, anomalies.n(), opt_.lambda_scale);
    const SyGlassoResult fit = syglasso_fit(anomalies, cfg);
    std::vector<Eigen::MatrixXd> dense;
    dense.reserve(fit.offdiag_factors.factors.size());
    for (const auto& f : fit.offdiag_factors.factors) dense.push_back(f.to_dense());
    // The free W tensor carries the diagonal of the Sylvester operator.
    return {OperatorForm::Precision,
            std::make_shared<KronSumSquaredOp>(std::move(dense), anomalies.dims,
                                               fit.w.values())};
  }

 private:
  EstimatorOptions opt_;
};

class FixedCovarianceEstimator : public EnsembleEstimator {
 public:
  explicit FixedCovarianceEstimator(Eigen::MatrixXd sigma) : sigma_(std::move(sigma)) {}
  std::string id() const override { return "fixed"; }
  EstimatorOutput estimate(const SampleSet&) const override {
    return {OperatorForm::Covariance, std::make_shared<DenseOperator>(sigma_)};
  }

 private:
  Eigen::MatrixXd sigma_;
};

}  // namespace

std::unique_ptr<EnsembleEstimator> make_estimator(const std::string& id,
                                                  const EstimatorOptions& options) {
  if (id == "identity") return std::make_unique<IdentityEstimator>();
  if (id == "sample") return std::make_unique<SampleRidgeEstimator>(options.ridge_scale);
  if (id == "sgpalm") return std::make_unique<SgPalmEstimator>(options);
  if (id == "syglasso") return std::make_unique<SyGlassoEstimator>(options);
  throw Error("unknown estimator '" + id + "' (expected sgpalm, syglasso, sample or identity)");
}

std::unique_ptr<EnsembleEstimator> make_fixed_covariance_estimator(Eigen::MatrixXd sigma) {
  return std::make_unique<FixedCovarianceEstimator>(std::move(sigma));
}

Eigen::VectorXd apply_gain(const EstimatorOutput& est, const ObservationModel& obs,
                           const Eigen::VectorXd& innovation, double tol) {
  if (obs.r() == 0) return Eigen::VectorXd::Zero(obs.d());
  if (innovation.size() != obs.r()) throw DimensionError("innovation has wrong length");
  const LinearOperator& op = *est.op;
  const Index d = obs.d();
  if (op.dim() != d) throw DimensionError("estimator operator dimension mismatch");

  if (est.form == OperatorForm::Precision) {
    // (Omega + H^T R^-1 H) x = H^T R^-1 v.
    const Eigen::VectorXd rhs = obs.lift(innovation.cwiseQuotient(obs.r_diag));
    auto apply = [&](const Eigen::VectorXd& x) {
      Eigen::VectorXd y = op.apply(x);
      const Eigen::VectorXd hx = obs.project(x);
      y += obs.lift(hx.cwiseQuotient(obs.r_diag));
      return y;
    };
    const CgResult cg = conjugate_gradient(apply, rhs, tol, 20 * d + 100);
    if (!cg.converged)
      throw NumericalError(
          "precision-form gain solve did not converge; estimator operator is ill-conditioned");
    return cg.x;
  }

  // Covariance form: w = (H Sigma H^T + R)^-1 v, then Sigma H^T w.
  auto apply_obs = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd y = obs.project(op.apply(obs.lift(w)));
    y += obs.r_diag.cwiseProduct(w);
    return y;
  };
  const CgResult cg = conjugate_gradient(apply_obs, innovation, tol, 20 * obs.r() + 100);
  if (!cg.converged)
    throw NumericalError(
        "covariance-form gain solve did not converge; estimator operator is ill-conditioned");
  return op.apply(obs.lift(cg.x));
}

Eigen::MatrixXd kalman_gain_dense(const EstimatorOutput& est, const ObservationModel& obs,
                                  double tol) {
  Eigen::MatrixXd k(obs.d(), obs.r());
  for (Index i = 0; i < obs.r(); ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(obs.r());
    e[i] = 1.0;
    k.col(i) = apply_gain(est, obs, e, tol);
  }
  return k;
}

EnsembleState forecast(const EnsembleState& ensemble, const DynamicsStepper& dynamics,
                       const Eigen::VectorXd& q_diag, const CounterRng& rng) {
  if (dynamics.state_dim() != ensemble.d())
    throw DimensionError("dynamics dimension does not match ensemble");
  if (q_diag.size() != ensemble.d()) throw DimensionError("Q diagonal has wrong length");
  const Eigen::VectorXd q_std = q_diag.cwiseSqrt();
  EnsembleState out;
  out.t = ensemble.t + 1;
  out.members.resize(ensemble.d(), ensemble.n());
  for (Index i = 0; i < ensemble.n(); ++i) {
    Eigen::VectorXd x = dynamics.step(ensemble.members.col(i));
    CounterRng member_rng = rng.substream(static_cast<std::uint64_t>(i));
    for (Index f = 0; f < x.size(); ++f)
      if (q_std[f] > 0.0) x[f] += q_std[f] * member_rng.gaussian();
    out.members.col(i) = x;
  }
  return out;
}

EnsembleState analysis_update(const EnsembleState& ensemble, const EstimatorOutput& est,
                              const ObservationModel& obs, const Eigen::VectorXd& y,
                              const CounterRng& rng, double gain_tol) {
  EnsembleState out = ensemble;
  if (obs.r() == 0) return out;
  if (y.size() != obs.r()) throw DimensionError("observation vector has wrong length");
  const Eigen::VectorXd r_std = obs.r_diag.cwiseSqrt();
  for (Index i = 0; i < ensemble.n(); ++i) {
    CounterRng member_rng = rng.substream(static_cast<std::uint64_t>(i));
    Eigen::VectorXd v(obs.r());
    for (Index f = 0; f < obs.r(); ++f) v[f] = r_std[f] * member_rng.gaussian();
    const Eigen::VectorXd innovation = y + v - obs.project(ensemble.members.col(i));
    out.members.col(i) += apply_gain(est, obs, innovation, gain_tol);
  }
  return out;
}

SampleSet ensemble_anomalies(const EnsembleState& ensemble, const std::vector<Index>& dims) {
  if (static_cast<Index>(checked_product(dims)) != ensemble.d())
    throw DimensionError("tensor dims do not match ensemble state dimension");
  if (ensemble.n() < 2) throw DimensionError("anomalies need at least two members");
  const Eigen::VectorXd mean = ensemble.mean();
  // Scaled so the estimator-side Gram (1/N) sum a a^T equals the unbiased
  // sample covariance sum (x - mean)(x - mean)^T / (N - 1).
  const double scale = std::sqrt(static_cast<double>(ensemble.n()) /
                                 static_cast<double>(ensemble.n() - 1));
  std::vector<DenseTensor> samples;
  samples.reserve(static_cast<std::size_t>(ensemble.n()));
  for (Index i = 0; i < ensemble.n(); ++i)
    samples.emplace_back(dims, Eigen::VectorXd((ensemble.members.col(i) - mean) * scale));
  return SampleSet(dims, std::move(samples));
}

namespace {

double member_rmse(const Eigen::VectorXd& member, const Eigen::VectorXd& truth) {
  return std::sqrt((member - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

std::string metrics_csv(const std::vector<StepMetrics>& metrics) {
  std::ostringstream out;
  out.precision(17);
  out << "step,rmse_mean,rmse_member_p05,rmse_member_p95,estimator_seconds\n";
  for (const auto& m : metrics)
    out << m.step << "," << m.rmse_mean << "," << m.rmse_member_p05 << ","
        << m.rmse_member_p95 << "," << m.estimator_seconds << "\n";
  return out.str();
}

FilterResult run_filter_core(const DynamicsStepper& dynamics,
                             const std::vector<Eigen::VectorXd>& truth,
                             const std::vector<Eigen::VectorXd>& observations,
                             const ObservationModel& obs, const EnsembleEstimator& estimator,
                             const std::vector<Index>& tensor_dims, Index n_members,
                             double init_spread, Index refit_every, std::uint64_t seed,
                             const std::string& dump_dir) {
  obs.validate();
  if (truth.size() != observations.size())
    throw DimensionError("truth and observation sequences differ in length");
  if (n_members < 2) throw DomainError("ensemble needs at least two members");
  if (refit_every < 1) throw DomainError("refit interval must be positive");
  const Index d = obs.d();
  const Index steps = static_cast<Index>(truth.size());

  CounterRng root(seed);
  CounterRng init_rng = root.substream(3);

  EnsembleState ens;
  ens.t = 0;
  ens.members.resize(d, n_members);
  for (Index i = 0; i < n_members; ++i) {
    CounterRng rng = init_rng.substream(static_cast<std::uint64_t>(i));
    for (Index f = 0; f < d; ++f) ens.members(f, i) = init_spread * rng.gaussian();
  }

  FilterResult result;
  EstimatorOutput gain_operator;
  for (Index t = 0; t < steps; ++t) {
    const CounterRng forecast_rng = root.substream(100 + static_cast<std::uint64_t>(t));
    ens = forecast(ens, dynamics, obs.q_diag, forecast_rng);

    StepMetrics sm;
    sm.step = t + 1;
    if (t % refit_every == 0 || !gain_operator.op) {
      const auto t0 = std::chrono::steady_clock::now();
      gain_operator = estimator.estimate(ensemble_anomalies(ens, tensor_dims));
      sm.estimator_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    const CounterRng update_rng = root.substream(200000 + static_cast<std::uint64_t>(t));
    ens = analysis_update(ens, gain_operator, obs, observations[static_cast<std::size_t>(t)],
                          update_rng);

    std::vector<double> rmses(static_cast<std::size_t>(n_members));
    for (Index i = 0; i < n_members; ++i)
      rmses[static_cast<std::size_t>(i)] =
          member_rmse(ens.members.col(i), truth[static_cast<std::size_t>(t)]);
    sm.rmse_mean = member_rmse(ens.mean(), truth[static_cast<std::size_t>(t)]);
    sm.rmse_member_p05 = percentile(rmses, 0.05);
    sm.rmse_member_p95 = percentile(rmses, 0.95);
    result.metrics.push_back(sm);
    result.ensemble_means.push_back(ens.mean());

    if (!dump_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "/step_%04d.kten", static_cast<int>(t + 1));
      write_kten(ens.members, dump_dir + name);
    }
  }
  result.final_ensemble = ens;
  return result;
}

void FilterConfig::validate() const {
  grid.validate();
  model.validate();
  if (ensemble < 2) throw DomainError("ensemble size must be at least 2");
  if (obs_frac < 0.0 || obs_frac > 1.0) throw DomainError("obs-frac must lie in [0,1]");
  if (obs_noise_std <= 0.0) throw DomainError("observation noise must be positive");
  if (process_noise_std < 0.0) throw DomainError("process noise must be nonnegative");
  if (refit_every < 1) throw DomainError("refit interval must be positive");
}

FilterResult run_filter(const FilterConfig& config) {
  config.validate();
  const Index d = config.grid.d1 * config.grid.d2;
  CounterRng root(config.seed);

  // Truth and observations come from the same dynamics with independent
  // substreams (1 and 2); the filter never sees these streams.
  const std::uint64_t truth_seed = root.substream(1).next_u64();
  SimulationResult sim;
  switch (config.model.kind) {
    case DynamicsKind::PoissonAr1:
      sim = simulate_poisson_ar(config.grid, config.model, truth_seed);
      break;
    case DynamicsKind::ConvectionDiffusion:
      sim = simulate_convection_diffusion(config.grid, config.model, truth_seed,
                                          config.model.sigma_w);
      break;
    case DynamicsKind::KuramotoSivashinsky:
      sim = simulate_ks(config.grid, config.model, truth_seed);
      break;
  }

  // Random half (or obs_frac) of the entries, drawn once per run.
  CounterRng mask_rng = root.substream(4);
  std::vector<Index> all(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) all[static_cast<std::size_t>(i)] = i;
  for (Index i = d - 1; i > 0; --i)
    std::swap(all[static_cast<std::size_t>(i)],
              all[static_cast<std::size_t>(mask_rng.uniform_index(static_cast<std::uint64_t>(i + 1)))]);
  const Index r = static_cast<Index>(std::llround(config.obs_frac * static_cast<double>(d)));
  std::vector<Index> observed(all.begin(), all.begin() + r);
  std::sort(observed.begin(), observed.end());

  ObservationModel obs;
  obs.observed = std::move(observed);
  obs.r_diag = Eigen::VectorXd::Constant(r, config.obs_noise_std * config.obs_noise_std);
  obs.q_diag =
      Eigen::VectorXd::Constant(d, config.process_noise_std * config.process_noise_std);
  obs.validate();

  CounterRng obs_rng = root.substream(2);
  std::vector<Eigen::VectorXd> truth, ys;
  truth.reserve(sim.states.size());
  ys.reserve(sim.states.size());
  for (std::size_t t = 0; t < sim.states.size(); ++t) {
    truth.push_back(sim.states[t].values());
    CounterRng rng = obs_rng.substream(t);
    Eigen::VectorXd y = obs.project(truth.back());
    for (Index i = 0; i < y.size(); ++i) y[i] += config.obs_noise_std * rng.gaussian();
    ys.push_back(std::move(y));
  }

  const auto dynamics = DynamicsStepper::make(config.grid, config.model);
  const auto estimator = make_estimator(config.estimator_id, config.est_options);
  return run_filter_core(*dynamics, truth, ys, obs, *estimator,
                         {config.grid.d1, config.grid.d2}, config.ensemble,
                         config.init_spread, config.refit_every, config.seed, config.dump_dir);
}

}  // namespace kronsolve

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kronsolve/gram.hpp"
#include "kronsolve/pde.hpp"
#include "kronsolve/rng.hpp"

namespace kronsolve {

// Row-selection measurement operator with diagonal noise covariances.
struct ObservationModel {
  std::vector<Index> observed;  // rows of H: observed state indices, sorted
  Eigen::VectorXd r_diag;       // observation noise variances, > 0, size r
  Eigen::VectorXd q_diag;       // process noise variances, >= 0, size d

  Index r() const { return static_cast<Index>(observed.size()); }
  Index d() const { return q_diag.size(); }
  void validate() const;

  Eigen::VectorXd project(const Eigen::VectorXd& x) const;  // H x
  Eigen::VectorXd lift(const Eigen::VectorXd& y) const;     // H^T y
};

// Abstract SPD operator produced by an estimator.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Eigen::VectorXd apply(const Eigen::VectorXd& x) const = 0;
  virtual Index dim() const = 0;
};

class DenseOperator : public LinearOperator {
 public:
  explicit DenseOperator(Eigen::MatrixXd m) : m_(std::move(m)) {}
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override { return m_ * x; }
  Index dim() const override { return m_.rows(); }
  const Eigen::MatrixXd& matrix() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

enum class OperatorForm { Precision, Covariance };

struct EstimatorOutput {
  OperatorForm form = OperatorForm::Covariance;
  std::shared_ptr<const LinearOperator> op;
};

struct EstimatorOptions {
  double lambda_scale = 0.3;  // theorem-scaled penalty constant
  Index max_iters = 50;
  double rel_tol = 1e-5;
  double ridge_scale = 1e-3;  // sample covariance ridge: delta = scale * trace / d
};

// Maps the forecast-anomaly ensemble to a covariance or precision operator.
// Anomalies arrive as a SampleSet in the model's tensor layout, scaled so
// that the estimator's internal Gram (1/N) sum a a^T equals the unbiased
// sample covariance (i.e. each column is (x_i - mean) * sqrt(N/(N-1))).
class EnsembleEstimator {
 public:
  virtual ~EnsembleEstimator() = default;
  virtual std::string id() const = 0;
  virtual EstimatorOutput estimate(const SampleSet& anomalies) const = 0;
};

// Built-ins: "identity", "sample" (anomaly Gram + ridge), "sgpalm",
// "syglasso" (both return (kronsum)^2-structured precision operators).
std::unique_ptr<EnsembleEstimator> make_estimator(const std::string& id,
                                                  const EstimatorOptions& options);

// Fixed covariance injected directly (oracle / test use).
std::unique_ptr<EnsembleEstimator> make_fixed_covariance_estimator(Eigen::MatrixXd sigma);

// Kalman gain applied to one innovation vector:
//   precision form:  solve (Omega + H^T R^-1 H) x = H^T R^-1 v  (CG, matrix-free)
//   covariance form: x = Sigma H^T w,  (H Sigma H^T + R) w = v   (CG, matrix-free)
// The two agree by the Woodbury identity when Omega = Sigma^-1.
Eigen::VectorXd apply_gain(const EstimatorOutput& est, const ObservationModel& obs,
                           const Eigen::VectorXd& innovation, double tol = 1e-8);

// Dense d x r gain (desk-scale oracle; r = 0 yields an empty operator).
Eigen::MatrixXd kalman_gain_dense(const EstimatorOutput& est, const ObservationModel& obs,
                                  double tol = 1e-10);

// N state vectors of dimension d at one filter time step.
struct EnsembleState {
  Eigen::MatrixXd members;  // d x N
  Index t = 0;

  Index d() const { return members.rows(); }
  Index n() const { return members.cols(); }
  Eigen::VectorXd mean() const { return members.rowwise().mean(); }
};

// Evolves each member through the deterministic one-step map plus
// independent N(0, Q) noise; member i draws from rng.substream(i).
EnsembleState forecast(const EnsembleState& ensemble, const DynamicsStepper& dynamics,
                       const Eigen::VectorXd& q_diag, const CounterRng& rng);

// Stochastic (perturbed-observation) update
//   x_i <- x_i + K(y + v_i - H x_i), v_i ~ N(0, R) from rng.substream(i).
EnsembleState analysis_update(const EnsembleState& ensemble, const EstimatorOutput& est,
                              const ObservationModel& obs, const Eigen::VectorXd& y,
                              const CounterRng& rng, double gain_tol = 1e-8);

// Anomaly SampleSet (columns minus mean, scaled by sqrt(N/(N-1))) reshaped
// to the given tensor dims.
SampleSet ensemble_anomalies(const EnsembleState& ensemble, const std::vector<Index>& dims);

struct StepMetrics {
  Index step = 0;
  double rmse_mean = 0.0;
  double rmse_member_p05 = 0.0;
  double rmse_member_p95 = 0.0;
  double estimator_seconds = 0.0;
};

std::string metrics_csv(const std::vector<StepMetrics>& metrics);

struct FilterConfig {
  GridSpec grid;
  DynamicsModel model;
  Index ensemble = 15;
  double obs_frac = 0.5;
  double obs_noise_std = 0.1;
  double process_noise_std = 0.1;
  double init_spread = 1.0;
  std::string estimator_id = "sample";
  EstimatorOptions est_options;
  Index refit_every = 1;  // re-estimate every m steps, reuse in between
  std::uint64_t seed = 0;
  std::string dump_dir;  // when nonempty, per-step ensembles land here as KTEN

  void validate() const;
};

struct FilterResult {
  std::vector<StepMetrics> metrics;
  std::vector<Eigen::VectorXd> ensemble_means;  // per step
  EnsembleState final_ensemble;
};

// Core loop on explicit truth/observations (tests inject toy systems here).
FilterResult run_filter_core(const DynamicsStepper& dynamics,
                             const std::vector<Eigen::VectorXd>& truth,
                             const std::vector<Eigen::VectorXd>& observations,
                             const ObservationModel& obs, const EnsembleEstimator& estimator,
                             const std::vector<Index>& tensor_dims, Index n_members,
                             double init_spread, Index refit_every, std::uint64_t seed,
                             const std::string& dump_dir = "");

// Full pipeline: simulate truth and observations from the configured
// dynamics (independent seed substreams), then track.
FilterResult run_filter(const FilterConfig& config);

}  // namespace kronsolve

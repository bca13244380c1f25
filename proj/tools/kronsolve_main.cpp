// kronsolve: sparse Kronecker-structured precision estimation and multiway
// ensemble Kalman filtering for PDE-driven fields.
//
// Subcommands: simulate, estimate, track, eval. Exit codes: 0 success,
// 1 runtime error, 2 usage error.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "kronsolve/enkf.hpp"
#include "kronsolve/errors.hpp"
#include "kronsolve/factor_gen.hpp"
#include "kronsolve/kten.hpp"
#include "kronsolve/metrics.hpp"
#include "kronsolve/pde.hpp"
#include "kronsolve/kron.hpp"
#include "kronsolve/sgpalm.hpp"
#include "kronsolve/syglasso.hpp"

namespace ks = kronsolve;

namespace {

// All floating-point output carries 17 significant digits so files
// round-trip bit-exactly through text.
std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string strip_kten_suffix(std::string path) {
  const std::string suffix = ".kten";
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
    path.erase(path.size() - suffix.size());
  return path;
}

void write_config_sidecar(const CLI::App* sub, const std::string& out_path) {
  ks::write_text_atomic(sub->config_to_str(true, false), out_path + ".config");
}

void write_factor_files(const ks::SylvesterFactors& factors, const std::string& stem) {
  for (std::size_t k = 0; k < factors.factors.size(); ++k)
    ks::write_kten(factors.factors[k].to_dense(),
                   stem + ".psi" + std::to_string(k + 1) + ".kten");
}

ks::SylvesterFactors read_factor_files(const std::string& stem_in) {
  const std::string stem = strip_kten_suffix(stem_in);
  std::vector<ks::SymSparseMatrix> factors;
  for (std::size_t k = 1;; ++k) {
    const std::string path = stem + ".psi" + std::to_string(k) + ".kten";
    if (!std::filesystem::exists(path)) break;
    const ks::DenseTensor t = ks::read_kten(path);
    if (t.order() != 2 || t.dim(0) != t.dim(1))
      throw ks::IoError("'" + path + "' does not hold a square matrix");
    Eigen::MatrixXd m(t.dim(0), t.dim(1));
    for (ks::Index j = 0; j < t.dim(1); ++j)
      for (ks::Index i = 0; i < t.dim(0); ++i) m(i, j) = t.values()[i + t.dim(0) * j];
    factors.push_back(ks::SymSparseMatrix::from_dense(m));
  }
  if (factors.empty())
    throw ks::IoError("no factor files found at '" + stem + ".psi1.kten'");
  return ks::SylvesterFactors(std::move(factors));
}

struct SimulateArgs {
  std::string model = "poisson-ar";
  std::vector<ks::Index> grid{8, 8};
  ks::Index steps = 50;
  double a = 0.5, sigma = 1.0, theta = 1.0, eps = 0.0, h = 1.0, dt = 0.0;
  double forcing_std = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string dump_factors;
  // Sylvester-model sampling
  std::vector<ks::Index> dims;
  std::string factor_kind = "er";
  double rho = 0.6;
  ks::Index block = 16;
  ks::Index edges = 16;
  ks::Index samples = 100;
};

int run_simulate(const SimulateArgs& a, const CLI::App* sub) {
  if (a.model == "sylvester") {
    std::vector<ks::FactorGraphSpec> specs;
    for (ks::Index d : a.dims) {
      ks::FactorGraphSpec s;
      s.kind = ks::factor_kind_from_string(a.factor_kind);
      s.dim = d;
      s.rho = a.rho;
      s.block = a.block;
      s.edges = a.edges;
      specs.push_back(s);
    }
    if (specs.empty()) throw ks::Error("sylvester model needs --dims");
    const ks::SylvesterFactors truth = ks::generate_factors(specs, a.seed);
    const ks::SampleSet data = ks::sample_sylvester(truth, a.samples, a.seed + 1);
    ks::write_kten(data.to_tensor_last_mode(), a.out);
    if (!a.dump_factors.empty()) write_factor_files(truth, strip_kten_suffix(a.dump_factors));
    write_config_sidecar(sub, a.out);
    return 0;
  }

  ks::GridSpec grid;
  grid.d1 = a.grid.at(0);
  grid.d2 = a.grid.at(1);
  grid.h = a.h;
  grid.dt = a.dt;
  grid.steps = a.steps;
  ks::DynamicsModel model;
  model.kind = ks::dynamics_kind_from_string(a.model);
  model.a = a.a;
  model.sigma_w = a.sigma;
  model.theta = a.theta;
  model.epsilon = a.eps;

  ks::SimulationResult sim;
  switch (model.kind) {
    case ks::DynamicsKind::PoissonAr1:
      sim = ks::simulate_poisson_ar(grid, model, a.seed);
      break;
    case ks::DynamicsKind::ConvectionDiffusion:
      sim = ks::simulate_convection_diffusion(grid, model, a.seed, a.forcing_std);
      break;
    case ks::DynamicsKind::KuramotoSivashinsky:
      sim = ks::simulate_ks(grid, model, a.seed);
      break;
  }
  // States stored as one (d1, d2, T) tensor.
  std::vector<ks::Index> dims{grid.d1, grid.d2};
  ks::SampleSet stacked(dims, sim.states);
  ks::write_kten(stacked.to_tensor_last_mode(), a.out);
  if (!a.dump_factors.empty()) {
    if (sim.factor_pair.factors.empty())
      std::cerr << "note: the K-S model has no exact factor pair; nothing dumped\n";
    else
      write_factor_files(sim.factor_pair, strip_kten_suffix(a.dump_factors));
  }
  write_config_sidecar(sub, a.out);
  return 0;
}

struct EstimateArgs {
  std::string method = "sgpalm";
  std::string input;
  std::string penalty = "l1";
  double lambda_scale = 0.3;
  double lambda_abs = -1.0;
  double shape = 0.0;
  double tol = 1e-6;
  ks::Index max_iter = 200;
  std::string out;
  std::string trace_path;
  std::string fixed_w;
  bool center = false;
  std::uint64_t seed = 0;
};

int run_estimate(const EstimateArgs& a, const CLI::App* sub) {
  ks::SampleSet data = ks::SampleSet::from_tensor_last_mode(ks::read_kten(a.input));
  if (a.center) data.center_per_entry();
  const ks::Index order = data.order();

  std::vector<double> lambdas;
  for (ks::Index k = 0; k < order; ++k)
    lambdas.push_back(a.lambda_abs >= 0.0
                          ? a.lambda_abs
                          : ks::theorem_lambda(a.lambda_scale, data.dims[k], data.total_dim(),
                                               data.n()));

  const std::string stem = strip_kten_suffix(a.out);
  ks::SolveTrace trace;
  if (a.method == "sgpalm") {
    ks::SolverConfig cfg;
    cfg.max_iters = a.max_iter;
    cfg.rel_tol = a.tol;
    cfg.seed = a.seed;
    const ks::PenaltyKind kind = ks::penalty_kind_from_string(a.penalty);
    for (double l : lambdas) {
      ks::PenaltySpec p;
      p.kind = kind;
      p.lambda = l;
      p.a = a.shape > 0.0 ? a.shape : (kind == ks::PenaltyKind::Mcp ? 3.0 : 3.7);
      cfg.penalties.push_back(p);
    }
    const ks::SgPalmResult fit = ks::sgpalm_fit(data, cfg);
    write_factor_files(fit.factors, stem);
    trace = fit.trace;
  } else if (a.method == "syglasso") {
    if (a.penalty != "l1") throw ks::Error("syglasso supports the l1 penalty only");
    ks::SyGlassoConfig cfg;
    cfg.max_sweeps = a.max_iter;
    cfg.rel_tol = a.tol;
    cfg.lambda = lambdas;
    if (!a.fixed_w.empty()) cfg.fixed_w = ks::read_kten(a.fixed_w).values();
    const ks::SyGlassoResult fit = ks::syglasso_fit(data, cfg);
    write_factor_files(fit.offdiag_factors, stem);
    ks::write_kten(fit.w, stem + ".w.kten");
    trace = fit.trace;
  } else {
    throw ks::Error("unknown method '" + a.method + "' (expected sgpalm or syglasso)");
  }
  if (!a.trace_path.empty()) ks::write_text_atomic(trace.csv(order), a.trace_path);
  write_config_sidecar(sub, stem);
  return 0;
}

struct TrackArgs {
  std::string model = "poisson-ar";
  std::vector<ks::Index> grid{8, 8};
  ks::Index steps = 50;
  ks::Index ensemble = 15;
  double obs_frac = 0.5;
  std::string estimator = "sample";
  std::uint64_t seed = 0;
  std::string metrics_path;
  std::string dump_dir;
  double a = 0.5, sigma = 1.0, theta = 1.0, eps = 0.0, h = 1.0, dt = 0.0;
  double obs_noise = 0.1, process_noise = 0.1, init_spread = 1.0;
  double est_lambda_scale = 0.3;
  ks::Index est_max_iter = 50;
  ks::Index refit_every = 1;
};

int run_track(const TrackArgs& a, const CLI::App* sub) {
  ks::FilterConfig cfg;
  cfg.grid.d1 = a.grid.at(0);
  cfg.grid.d2 = a.grid.at(1);
  cfg.grid.h = a.h;
  cfg.grid.dt = a.dt;
  cfg.grid.steps = a.steps;
  cfg.model.kind = ks::dynamics_kind_from_string(a.model);
  cfg.model.a = a.a;
  cfg.model.sigma_w = a.sigma;
  cfg.model.theta = a.theta;
  cfg.model.epsilon = a.eps;
  cfg.ensemble = a.ensemble;
  cfg.obs_frac = a.obs_frac;
  cfg.obs_noise_std = a.obs_noise;
  cfg.process_noise_std = a.process_noise;
  cfg.init_spread = a.init_spread;
  cfg.estimator_id = a.estimator;
  cfg.est_options.lambda_scale = a.est_lambda_scale;
  cfg.est_options.max_iters = a.est_max_iter;
  cfg.refit_every = a.refit_every;
  cfg.seed = a.seed;
  cfg.dump_dir = a.dump_dir;
  if (!a.dump_dir.empty()) std::filesystem::create_directories(a.dump_dir);

  const ks::FilterResult result = ks::run_filter(cfg);
  ks::write_text_atomic(ks::metrics_csv(result.metrics), a.metrics_path);
  write_config_sidecar(sub, a.metrics_path);
  return 0;
}

struct EvalArgs {
  std::string est;
  std::string truth;
  std::string metric = "mcc";
  double threshold = 1e-8;
};

int run_eval(const EvalArgs& a) {
  const ks::SylvesterFactors est = read_factor_files(a.est);
  const ks::SylvesterFactors truth = read_factor_files(a.truth);
  std::ostringstream out;
  out.precision(17);
  if (a.metric == "mcc") {
    const ks::SupportMask em = ks::SupportMask::from_factors(est, a.threshold);
    const ks::SupportMask tm = ks::SupportMask::from_factors(truth, a.threshold);
    const auto per = ks::mcc_per_factor(em, tm);
    out << "mcc_pooled";
    for (std::size_t k = 1; k <= per.size(); ++k) out << ",mcc_" << k;
    out << "\n" << fmt(ks::mcc(em, tm));
    for (double v : per) out << "," << fmt(v);
    out << "\n";
  } else if (a.metric == "fnorm") {
    // Compare the identifiable object: the squared Kronecker sums.
    const Eigen::MatrixXd oe = ks::kron_sum_dense(est);
    const Eigen::MatrixXd ot = ks::kron_sum_dense(truth);
    out << "fnorm\n" << fmt(ks::fnorm_rel_error(oe * oe, ot * ot)) << "\n";
  } else if (a.metric == "fprfnr") {
    const ks::SupportMask em = ks::SupportMask::from_factors(est, a.threshold);
    const ks::SupportMask tm = ks::SupportMask::from_factors(truth, a.threshold);
    const auto [fpr, fnr] = ks::fpr_fnr(em, tm);
    out << "fpr,fnr\n" << fmt(fpr) << "," << fmt(fnr) << "\n";
  } else {
    throw ks::Error("unknown metric '" + a.metric + "' (expected mcc, fnorm or fprfnr)");
  }
  std::cout << out.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sylvester-model precision estimation and multiway ensemble Kalman filtering"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; command-line flags win");

  int threads = 0;
  app.add_option("--threads", threads, "cap internal parallelism (env KRONSOLVE_THREADS)")
      ->envname("KRONSOLVE_THREADS");

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate synthetic trajectories or samples");
  simulate->add_option("--model", sim.model,
                       "poisson-ar | convection-diffusion | ks | sylvester");
  simulate->add_option("--grid", sim.grid, "spatial grid sizes D1 D2")->expected(2);
  simulate->add_option("--steps", sim.steps, "number of time steps");
  simulate->add_option("--a", sim.a, "AR(1) coefficient");
  simulate->add_option("--sigma", sim.sigma, "driving noise std");
  simulate->add_option("--theta", sim.theta, "diffusivity");
  simulate->add_option("--eps", sim.eps, "convection velocity");
  simulate->add_option("--h", sim.h, "mesh spacing");
  simulate->add_option("--dt", sim.dt, "time step (<=0: model default)");
  simulate->add_option("--forcing-std", sim.forcing_std, "convection-diffusion forcing std");
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--out", sim.out, "output KTEN path")->required();
  simulate->add_option("--dump-factors", sim.dump_factors, "also write the exact factor pair");
  simulate->add_option("--dims", sim.dims, "sylvester model: tensor dims");
  simulate->add_option("--factor-kind", sim.factor_kind, "sylvester model: ar1 | sb | er");
  simulate->add_option("--rho", sim.rho, "ar1/sb correlation");
  simulate->add_option("--block", sim.block, "sb sub-block size");
  simulate->add_option("--edges", sim.edges, "er edge count per factor");
  simulate->add_option("--samples", sim.samples, "sylvester model: sample count");

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand("estimate", "fit Sylvester factors to tensor samples");
  estimate->add_option("--method", est.method, "sgpalm | syglasso");
  estimate->add_option("--input", est.input, "KTEN data, last mode = observations")->required();
  estimate->add_option("--penalty", est.penalty, "l1 | scad | mcp");
  estimate->add_option("--lambda-scale", est.lambda_scale,
                       "C in lambda_k = C sqrt(d_k log d / N)");
  estimate->add_option("--lambda", est.lambda_abs, "absolute lambda for all modes (overrides)");
  estimate->add_option("--shape", est.shape, "SCAD/MCP shape parameter");
  estimate->add_option("--tol", est.tol, "relative objective-change stop");
  estimate->add_option("--max-iter", est.max_iter, "iteration cap");
  estimate->add_option("--out", est.out, "output stem; writes <stem>.psiK.kten")->required();
  estimate->add_option("--trace", est.trace_path, "per-iteration trace CSV");
  estimate->add_option("--fixed-w", est.fixed_w, "syglasso: hold W fixed at this KTEN tensor");
  estimate->add_flag("--center", est.center, "remove the per-entry mean across samples");
  estimate->add_option("--seed", est.seed, "RNG seed");

  TrackArgs trk;
  CLI::App* track = app.add_subcommand("track", "multiway ensemble Kalman filter");
  track->add_option("--model", trk.model, "poisson-ar | convection-diffusion | ks");
  track->add_option("--grid", trk.grid, "spatial grid sizes D1 D2")->expected(2);
  track->add_option("--steps", trk.steps, "number of filter steps");
  track->add_option("--ensemble", trk.ensemble, "ensemble size N");
  track->add_option("--obs-frac", trk.obs_frac, "fraction of observed entries");
  track->add_option("--estimator", trk.estimator, "sgpalm | syglasso | sample | identity");
  track->add_option("--seed", trk.seed, "RNG seed");
  track->add_option("--metrics", trk.metrics_path, "metrics CSV output")->required();
  track->add_option("--dump-ensemble", trk.dump_dir, "directory for per-step ensemble dumps");
  track->add_option("--a", trk.a, "AR(1) coefficient");
  track->add_option("--sigma", trk.sigma, "driving noise std");
  track->add_option("--theta", trk.theta, "diffusivity");
  track->add_option("--eps", trk.eps, "convection velocity");
  track->add_option("--h", trk.h, "mesh spacing");
  track->add_option("--dt", trk.dt, "time step (<=0: model default)");
  track->add_option("--obs-noise", trk.obs_noise, "observation noise std");
  track->add_option("--process-noise", trk.process_noise, "filter process noise std");
  track->add_option("--init-spread", trk.init_spread, "initial ensemble spread");
  track->add_option("--est-lambda-scale", trk.est_lambda_scale, "estimator penalty scale");
  track->add_option("--est-max-iter", trk.est_max_iter, "estimator iteration cap");
  track->add_option("--refit-every", trk.refit_every, "re-estimate every m steps");

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "compare estimated factors against truth");
  eval->add_option("--est", ev.est, "estimated factor stem")->required();
  eval->add_option("--truth", ev.truth, "truth factor stem")->required();
  eval->add_option("--metric", ev.metric, "mcc | fnorm | fprfnr");
  eval->add_option("--threshold", ev.threshold, "support threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (threads > 0) Eigen::setNbThreads(threads);

  try {
    if (simulate->parsed()) return run_simulate(sim, simulate);
    if (estimate->parsed()) return run_estimate(est, estimate);
    if (track->parsed()) return run_track(trk, track);
    if (eval->parsed()) return run_eval(ev);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

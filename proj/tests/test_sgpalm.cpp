#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "kronsolve/errors.hpp"
#include "kronsolve/factor_gen.hpp"
#include "kronsolve/kron.hpp"
#include "kronsolve/metrics.hpp"
#include "kronsolve/rng.hpp"
#include "kronsolve/sgpalm.hpp"

using namespace kronsolve;

namespace {

SampleSet random_samples(std::vector<Index> dims, Index n, std::uint64_t seed) {
  CounterRng root(seed);
  std::vector<DenseTensor> samples;
  for (Index s = 0; s < n; ++s) {
    CounterRng rng = root.substream(static_cast<std::uint64_t>(s));
    DenseTensor t(dims);
    for (Index i = 0; i < t.size(); ++i) t.values()[i] = rng.gaussian();
    samples.push_back(std::move(t));
  }
  return SampleSet(dims, std::move(samples));
}

// Random symmetric factor with a dominant positive diagonal so W stays
// positive.
Eigen::MatrixXd random_factor(Index dim, std::uint64_t seed) {
  CounterRng rng(seed);
  Eigen::MatrixXd m(dim, dim);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = 0.3 * rng.gaussian();
  m = (0.5 * (m + m.transpose())).eval();
  m.diagonal().array() = 1.0 + 0.2 * Eigen::ArrayXd::NullaryExpr(dim, [&](Index) {
                           return rng.uniform01();
                         });
  return m;
}

std::vector<PenaltySpec> l1_penalties(Index order, double lambda) {
  return std::vector<PenaltySpec>(static_cast<std::size_t>(order), PenaltySpec::l1(lambda));
}

// Smooth part H = objective minus the penalty terms.
double smooth_h(const GramCache& stats, const std::vector<Eigen::MatrixXd>& psi) {
  return sgpalm_objective(stats, psi, l1_penalties(stats.order(), 0.0));
}

}  // namespace

TEST_CASE("objective at identity factors with zero data is -N d log K") {
  std::vector<DenseTensor> zeros(4, DenseTensor({3, 2, 2}));
  SampleSet data({3, 2, 2}, zeros);
  GramCache stats(data);
  std::vector<Eigen::MatrixXd> psi{Eigen::MatrixXd::Identity(3, 3),
                                   Eigen::MatrixXd::Identity(2, 2),
                                   Eigen::MatrixXd::Identity(2, 2)};
  const double got = sgpalm_objective(stats, psi, l1_penalties(3, 0.0));
  const double want = -4.0 * 12.0 * std::log(3.0);
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("objective matches the dense-oracle evaluation") {
  const SampleSet data = random_samples({3, 4, 2}, 5, 3);
  GramCache stats(data);
  std::vector<Eigen::MatrixXd> psi{random_factor(3, 11), random_factor(4, 12),
                                   random_factor(2, 13)};
  const double lambda = 0.3;
  const double got = sgpalm_objective(stats, psi, l1_penalties(3, lambda));

  // Dense oracle: materialize S and the Kronecker sums.
  SylvesterFactors sf({SymSparseMatrix::from_dense(psi[0]), SymSparseMatrix::from_dense(psi[1]),
                       SymSparseMatrix::from_dense(psi[2])});
  SylvesterFactors diag_only;
  for (const auto& m : psi) {
    Eigen::MatrixXd d = m.diagonal().asDiagonal();
    diag_only.factors.push_back(SymSparseMatrix::from_dense(d));
  }
  const Eigen::MatrixXd op = kron_sum_dense(sf);
  const Eigen::MatrixXd diag_op = kron_sum_dense(diag_only);
  const Eigen::MatrixXd s = sample_covariance(data);
  const double n = 5.0;
  double logdet = 0.0;
  for (Index i = 0; i < diag_op.rows(); ++i) logdet += 2.0 * std::log(diag_op(i, i));
  double pen = 0.0;
  for (const auto& m : psi) pen += penalty_value(PenaltySpec::l1(lambda), m);
  const double want = -0.5 * n * logdet + 0.5 * n * (s * op * op).trace() + pen;
  CHECK(got == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("K=1 objective reduces to the vector pseudolikelihood form") {
  const SampleSet data = random_samples({5}, 7, 17);
  GramCache stats(data);
  const Eigen::MatrixXd psi = random_factor(5, 19);
  const double lambda = 0.2;
  const double got = sgpalm_objective(stats, {psi}, l1_penalties(1, lambda));
  const Eigen::MatrixXd s = sample_covariance(data);
  double want = 0.0;
  for (Index i = 0; i < 5; ++i) want += -7.0 * std::log(psi(i, i) * psi(i, i));
  want = 0.5 * want + 0.5 * 7.0 * (s * psi * psi).trace() +
         penalty_value(PenaltySpec::l1(lambda), psi);
  CHECK(got == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("objective rejects nonpositive W naming the multi-index") {
  const SampleSet data = random_samples({2, 2}, 2, 23);
  GramCache stats(data);
  std::vector<Eigen::MatrixXd> psi{Eigen::MatrixXd::Identity(2, 2),
                                   Eigen::MatrixXd::Identity(2, 2)};
  psi[0](1, 1) = -1.0;  // W at (1, *) becomes 0
  CHECK_THROWS_WITH_AS(sgpalm_objective(stats, psi, l1_penalties(2, 0.0)),
                       doctest::Contains("(1,0)"), DomainError);
}

TEST_CASE("block gradient off-diagonals vanish on zero data") {
  std::vector<DenseTensor> zeros(3, DenseTensor({3, 4}));
  SampleSet data({3, 4}, zeros);
  GramCache stats(data);
  std::vector<Eigen::MatrixXd> psi{random_factor(3, 29), random_factor(4, 31)};
  for (Index k = 0; k < 2; ++k) {
    const Eigen::MatrixXd g = block_gradient(stats, psi, k);
    Eigen::MatrixXd off = g;
    off.diagonal().setZero();
    CHECK(off.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("block gradient matches central finite differences of H") {
  CounterRng seed_rng(37);
  for (int trial = 0; trial < 6; ++trial) {
    const Index order = 2 + static_cast<Index>(seed_rng.uniform_index(2));
    std::vector<Index> dims;
    for (Index k = 0; k < order; ++k)
      dims.push_back(2 + static_cast<Index>(seed_rng.uniform_index(5)));
    const SampleSet data = random_samples(dims, 4, 41 + trial);
    GramCache stats(data);
    std::vector<Eigen::MatrixXd> psi;
    for (Index k = 0; k < order; ++k)
      psi.push_back(random_factor(dims[static_cast<std::size_t>(k)], 100 + 10 * trial + k));

    const double h = 1e-5;
    for (Index k = 0; k < order; ++k) {
      const Eigen::MatrixXd g = block_gradient(stats, psi, k);
      const Index dk = dims[static_cast<std::size_t>(k)];
      for (Index i = 0; i < dk; ++i)
        for (Index j = 0; j < dk; ++j) {
          auto shifted = psi;
          shifted[static_cast<std::size_t>(k)](i, j) += h;
          const double up = smooth_h(stats, shifted);
          shifted[static_cast<std::size_t>(k)](i, j) -= 2.0 * h;
          const double down = smooth_h(stats, shifted);
          const double fd = (up - down) / (2.0 * h);
          const double scale = std::max({1.0, std::abs(fd), std::abs(g(i, j))});
          CHECK(std::abs(g(i, j) - fd) / scale < 1e-5);
        }
    }
  }
}

TEST_CASE("directional derivative at identity factors with zero data") {
  std::vector<DenseTensor> zeros(6, DenseTensor({3, 2, 2}));
  SampleSet data({3, 2, 2}, zeros);
  GramCache stats(data);
  std::vector<Eigen::MatrixXd> psi{Eigen::MatrixXd::Identity(3, 3),
                                   Eigen::MatrixXd::Identity(2, 2),
                                   Eigen::MatrixXd::Identity(2, 2)};
  // Along direction I in block k, H(eps) = -N d log(K + eps), so the
  // derivative at 0 is -N d / K.
  const double n = 6.0, d = 12.0, order = 3.0;
  for (Index k = 0; k < 3; ++k) {
    const Eigen::MatrixXd g = block_gradient(stats, psi, k);
    CHECK(g.trace() == doctest::Approx(-n * d / order).epsilon(1e-12));
  }
}

TEST_CASE("line search accepts the full step on a quadratic toy") {
  // H(x) = x^2/2 with unit curvature: eta = 1 satisfies the descent bound.
  auto h = [](const Eigen::MatrixXd& x) { return 0.5 * x(0, 0) * x(0, 0); };
  auto prox = [](const Eigen::MatrixXd& p, double) { return p; };
  Eigen::MatrixXd x(1, 1);
  x << 3.0;
  Eigen::MatrixXd grad(1, 1);
  grad << 3.0;
  const LineSearchResult r = line_search(h, x, h(x), grad, prox, 1.0, 0.5);
  CHECK(r.eta == 1.0);
  CHECK(r.trials == 1);
  CHECK(r.candidate(0, 0) == 0.0);
}

TEST_CASE("zero gradient accepts immediately with the prox of the block") {
  auto h = [](const Eigen::MatrixXd& x) { return x.squaredNorm(); };
  auto prox = [](const Eigen::MatrixXd& p, double) { return p; };
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, 0, 1;
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  const LineSearchResult r = line_search(h, x, h(x), zero, prox, 0.7, 0.5);
  CHECK(r.eta == 0.7);
  CHECK((r.candidate - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("accepted steps satisfy the descent inequality on re-evaluation") {
  const SampleSet data = random_samples({3, 3}, 4, 47);
  GramCache stats(data);
  std::vector<Eigen::MatrixXd> psi{random_factor(3, 53), random_factor(3, 59)};
  const double lambda = 0.15;
  for (Index k = 0; k < 2; ++k) {
    const Eigen::MatrixXd grad = block_gradient(stats, psi, k);
    auto h = [&](const Eigen::MatrixXd& cand) {
      auto shifted = psi;
      shifted[static_cast<std::size_t>(k)] = cand;
      try {
        return smooth_h(stats, shifted);
      } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    auto prox = [&](const Eigen::MatrixXd& p, double eta) {
      Eigen::MatrixXd c = prox_offdiag(PenaltySpec::l1(lambda), p, eta * lambda);
      return Eigen::MatrixXd(0.5 * (c + c.transpose()));
    };
    const double h0 = h(psi[static_cast<std::size_t>(k)]);
    const LineSearchResult r =
        line_search(h, psi[static_cast<std::size_t>(k)], h0, grad, prox, 1.0, 0.5);
    const Eigen::MatrixXd delta = r.candidate - psi[static_cast<std::size_t>(k)];
    const double q = h0 + grad.cwiseProduct(delta).sum() + delta.squaredNorm() / (2.0 * r.eta);
    CHECK(h(r.candidate) <= q + 1e-12 * std::abs(q));
  }
}

TEST_CASE("BB step recovers the quadratic curvature") {
  Eigen::MatrixXd dpsi(2, 2);
  dpsi << 1, 0.5, 0.5, -1;
  CHECK(bb_step(dpsi, dpsi, 0.1) == doctest::Approx(1.0));
  CHECK(bb_step(dpsi, Eigen::MatrixXd(4.0 * dpsi), 0.1) == doctest::Approx(0.25));
  CHECK(bb_step(dpsi, Eigen::MatrixXd::Zero(2, 2), 0.37) == 0.37);
  CHECK(bb_step(dpsi, Eigen::MatrixXd(-dpsi), 0.37) == 0.37);
}

TEST_CASE("K=1 unpenalized fit recovers the empirical pseudolikelihood optimum") {
  // Samples from a diagonal precision D: x ~ N(0, D^-2). With lambda = 0 the
  // stationary diagonal solves psi_ii = 1/sqrt(S_ii); off-diagonals stay at
  // statistical-noise scale.
  const Index n = 20000;
  CounterRng rng(61);
  const Eigen::Vector2d truth(1.5, 0.5);  // Psi = diag(1.5, 0.5)
  std::vector<DenseTensor> samples;
  for (Index s = 0; s < n; ++s) {
    DenseTensor t({2});
    t.values() << rng.gaussian() / truth[0], rng.gaussian() / truth[1];
    samples.push_back(std::move(t));
  }
  SampleSet data({2}, std::move(samples));
  GramCache stats(data);

  SolverConfig cfg;
  cfg.penalties = l1_penalties(1, 0.0);
  cfg.rel_tol = 1e-12;
  cfg.max_iters = 500;
  const SgPalmResult fit = sgpalm_fit(stats, cfg);
  const Eigen::MatrixXd psi = fit.factors.factors[0].to_dense();

  // Closed-form check against the same empirical Gram.
  const Eigen::MatrixXd s = stats.mode_gram(0);
  // Stationarity of the full optimum couples the entries; verify the
  // gradient vanishes and the diagonal is near 1/sqrt(S_ii).
  const Eigen::MatrixXd g = block_gradient(stats, {psi}, 0);
  CHECK(g.cwiseAbs().maxCoeff() / static_cast<double>(n) < 1e-8);
  CHECK(psi(0, 0) == doctest::Approx(1.0 / std::sqrt(s(0, 0))).epsilon(0.02));
  CHECK(psi(1, 1) == doctest::Approx(1.0 / std::sqrt(s(1, 1))).epsilon(0.02));
  CHECK(std::abs(psi(0, 1)) < 0.05);
  CHECK(std::abs(psi(0, 1) - psi(1, 0)) < 1e-12);
}

TEST_CASE("fit produces a monotone objective and symmetric iterates") {
  const SampleSet data = random_samples({4, 3, 2}, 6, 67);
  SolverConfig cfg;
  cfg.penalties = l1_penalties(3, 0.1);
  cfg.max_iters = 60;
  const SgPalmResult fit = sgpalm_fit(data, cfg);
  REQUIRE(fit.trace.iterations.size() > 1);
  for (std::size_t t = 1; t < fit.trace.iterations.size(); ++t)
    CHECK(fit.trace.iterations[t].objective <= fit.trace.iterations[t - 1].objective + 1e-12);
  for (const auto& f : fit.factors.factors) {
    const Eigen::MatrixXd m = f.to_dense();
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("monotone descent also holds for SCAD and MCP variants") {
  const SampleSet data = random_samples({3, 3}, 5, 71);
  for (const PenaltyKind kind : {PenaltyKind::Scad, PenaltyKind::Mcp}) {
    SolverConfig cfg;
    PenaltySpec p;
    p.kind = kind;
    p.lambda = 0.2;
    p.a = kind == PenaltyKind::Scad ? 3.7 : 3.0;
    cfg.penalties = {p, p};
    cfg.max_iters = 50;
    const SgPalmResult fit = sgpalm_fit(data, cfg);
    for (std::size_t t = 1; t < fit.trace.iterations.size(); ++t)
      CHECK(fit.trace.iterations[t].objective <=
            fit.trace.iterations[t - 1].objective + 1e-12);
  }
}

TEST_CASE("first sweep update is the prox of the gradient step") {
  // Re-derive the first block update from the public pieces and compare with
  // a single-iteration fit.
  const SampleSet data = random_samples({3, 2}, 4, 73);
  GramCache stats(data);
  const double lambda = 0.25;
  SolverConfig cfg;
  cfg.penalties = l1_penalties(2, lambda);
  cfg.max_iters = 1;
  const SgPalmResult fit = sgpalm_fit(stats, cfg);

  std::vector<Eigen::MatrixXd> psi{Eigen::MatrixXd::Identity(3, 3),
                                   Eigen::MatrixXd::Identity(2, 2)};
  for (Index k = 0; k < 2; ++k) {
    const Eigen::MatrixXd grad = block_gradient(stats, psi, k);
    auto h = [&](const Eigen::MatrixXd& cand) {
      auto shifted = psi;
      shifted[static_cast<std::size_t>(k)] = cand;
      try {
        return smooth_h(stats, shifted);
      } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    auto prox = [&](const Eigen::MatrixXd& p, double eta) {
      Eigen::MatrixXd c = prox_offdiag(PenaltySpec::l1(lambda), p, eta * lambda);
      return Eigen::MatrixXd(0.5 * (c + c.transpose()));
    };
    const LineSearchResult r = line_search(h, psi[static_cast<std::size_t>(k)],
                                           h(psi[static_cast<std::size_t>(k)]), grad, prox,
                                           cfg.eta0, cfg.backtrack_c);
    psi[static_cast<std::size_t>(k)] = r.candidate;
    const Eigen::MatrixXd got = fit.factors.factors[static_cast<std::size_t>(k)].to_dense();
    CHECK((got - r.candidate).cwiseAbs().maxCoeff() < 1e-12);
    // Off-diagonals equal the scalar prox of the gradient step; diagonals
    // take the unpenalized step.
    const Eigen::MatrixXd step =
        psi[static_cast<std::size_t>(k)];  // candidate already stored
    const Eigen::MatrixXd raw =
        (k == 0 ? Eigen::MatrixXd::Identity(3, 3) : Eigen::MatrixXd::Identity(2, 2)) -
        r.eta * grad;
    for (Index i = 0; i < step.rows(); ++i)
      for (Index j = 0; j < step.cols(); ++j) {
        if (i == j)
          CHECK(step(i, j) == doctest::Approx(raw(i, j)).epsilon(1e-12));
        else
          CHECK(step(i, j) ==
                doctest::Approx(soft_threshold(raw(i, j), r.eta * lambda)).epsilon(1e-12));
      }
  }
}

TEST_CASE("shifting identity mass between factors leaves the Kronecker sum fixed") {
  SylvesterFactors f({SymSparseMatrix::from_dense(random_factor(3, 79)),
                      SymSparseMatrix::from_dense(random_factor(2, 83))});
  const double c = 0.37;
  SylvesterFactors shifted = f;
  for (Index i = 0; i < 3; ++i) shifted.factors[0].add(i, i, c);
  for (Index i = 0; i < 2; ++i) shifted.factors[1].add(i, i, -c);
  const Eigen::MatrixXd a = kron_sum_dense(f);
  const Eigen::MatrixXd b = kron_sum_dense(shifted);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
  // And therefore the squared operator (the model precision) is unchanged.
  CHECK((a * a - b * b).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("ER-generated instance is recovered with high MCC") {
  // Smoke-scale version of the exact-model recovery experiment.
  std::vector<FactorGraphSpec> specs(2);
  for (auto& s : specs) {
    s.kind = FactorKind::ErdosRenyi;
    s.dim = 8;
    s.edges = 6;
  }
  const SylvesterFactors truth = generate_factors(specs, 5);
  const SampleSet data = sample_sylvester(truth, 400, 6);
  GramCache stats(data);

  double best = -1.0;
  for (double scale : {0.05, 0.1, 0.2, 0.4}) {
    SolverConfig cfg;
    for (Index k = 0; k < 2; ++k)
      cfg.penalties.push_back(
          PenaltySpec::l1(theorem_lambda(scale, 8, 64, data.n())));
    const SgPalmResult fit = sgpalm_fit(stats, cfg);
    best = std::max(best, mcc(SupportMask::from_factors(fit.factors),
                              SupportMask::from_factors(truth)));
  }
  CHECK(best >= 0.9);
}

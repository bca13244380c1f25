#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kronsolve/errors.hpp"
#include "kronsolve/gram.hpp"
#include "kronsolve/kron.hpp"
#include "kronsolve/rng.hpp"

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

Eigen::MatrixXd random_sym_dense(Index dim, std::uint64_t seed) {
  CounterRng rng(seed);
  Eigen::MatrixXd m(dim, dim);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
  return 0.5 * (m + m.transpose());
}

}  // namespace

TEST_CASE("mode_gram of zero samples is zero") {
  SampleSet data({3, 2}, {DenseTensor({3, 2}), DenseTensor({3, 2})});
  CHECK(mode_gram(data, 0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single K=1 sample gives the rank-1 outer product") {
  DenseTensor x({4});
  x.values() << 1, 2, 3, 4;
  SampleSet data({4}, {x});
  const Eigen::MatrixXd s = mode_gram(data, 0);
  CHECK((s - x.values() * x.values().transpose()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("mode_gram matches the naive double loop") {
  const SampleSet data = random_samples({3, 4}, 5, 11);
  for (Index k = 0; k < 2; ++k) {
    const Eigen::MatrixXd got = mode_gram(data, k);
    const Index dk = data.dims[static_cast<std::size_t>(k)];
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(dk, dk);
    for (const auto& x : data.samples) {
      const Eigen::MatrixXd xk = matricize(x, k);
      for (Index c = 0; c < xk.cols(); ++c) want += xk.col(c) * xk.col(c).transpose();
    }
    want /= static_cast<double>(data.n());
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(mode_gram(data, 2), DimensionError);
}

TEST_CASE("mode_gram agrees between matricize-based and vec-based forms") {
  const SampleSet data = random_samples({3, 4}, 4, 13);
  // vec-based: accumulate entries through flat indexing.
  for (Index k = 0; k < 2; ++k) {
    const Index dk = data.dims[static_cast<std::size_t>(k)];
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(dk, dk);
    for (const auto& x : data.samples)
      for (Index f = 0; f < x.size(); ++f)
        for (Index g = 0; g < x.size(); ++g) {
          const auto fi = x.multi_index(f), gi = x.multi_index(g);
          bool same_rest = true;
          for (Index m = 0; m < 2; ++m)
            if (m != k && fi[static_cast<std::size_t>(m)] != gi[static_cast<std::size_t>(m)])
              same_rest = false;
          if (same_rest)
            want(fi[static_cast<std::size_t>(k)], gi[static_cast<std::size_t>(k)]) +=
                x.values()[f] * x.values()[g];
        }
    want /= static_cast<double>(data.n());
    CHECK((mode_gram(data, k) - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("cross_gram with a zero factor is zero") {
  const SampleSet data = random_samples({3, 4}, 3, 17);
  CHECK(cross_gram(data, Eigen::MatrixXd::Zero(3, 3), 0, 1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cross_gram with the identity reduces to mode_gram") {
  const SampleSet data = random_samples({3, 4}, 3, 19);
  const Eigen::MatrixXd got = cross_gram(data, Eigen::MatrixXd::Identity(3, 3), 0, 1);
  CHECK((got - mode_gram(data, 1)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("cross_gram matches the dense Kronecker-padding construction") {
  const SampleSet data = random_samples({3, 4}, 4, 23);
  const Eigen::MatrixXd psi = random_sym_dense(3, 29);
  // Dense oracle for K=2, j=0, k=1: rows of X_(1) indexed by mode 1; the
  // padding acting on its columns (mode 0) is just Psi_0, giving
  // S_{0,1} = (1/N) sum X_(1) Psi_0^T X_(1)^T.
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(4, 4);
  for (const auto& x : data.samples) {
    const Eigen::MatrixXd x1 = matricize(x, 1);
    want += x1 * psi.transpose() * x1.transpose();
  }
  want /= static_cast<double>(data.n());
  const Eigen::MatrixXd got = cross_gram(data, psi, 0, 1);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((got - got.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(cross_gram(data, psi, 1, 1), DimensionError);
}

TEST_CASE("cross_gram is linear in the factor") {
  // The gradient of the pseudolikelihood needs S_{j,k} linear in Psi_j (the
  // finite-difference acceptance check pins this down).
  const SampleSet data = random_samples({3, 4}, 3, 31);
  const Eigen::MatrixXd psi = random_sym_dense(3, 37);
  const Eigen::MatrixXd one = cross_gram(data, psi, 0, 1);
  const Eigen::MatrixXd scaled = cross_gram(data, Eigen::MatrixXd(2.5 * psi), 0, 1);
  CHECK((scaled - 2.5 * one).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sample_covariance basics") {
  const SampleSet one = random_samples({2, 2}, 1, 41);
  const Eigen::MatrixXd s1 = sample_covariance(one);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s1);
  Index rank = 0;
  for (Index i = 0; i < 4; ++i)
    if (es.eigenvalues()[i] > 1e-12) ++rank;
  CHECK(rank <= 1);

  SampleSet zero({2, 2}, {DenseTensor({2, 2})});
  CHECK(sample_covariance(zero).cwiseAbs().maxCoeff() == 0.0);

  const SampleSet data = random_samples({2, 4}, 4, 43);
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(8, 8);
  for (const auto& x : data.samples) want += x.values() * x.values().transpose();
  want /= 4.0;
  CHECK((sample_covariance(data) - want).cwiseAbs().maxCoeff() < 1e-13);

  // tr(S) identity.
  double sq = 0.0;
  for (const auto& x : data.samples) sq += x.values().squaredNorm();
  CHECK(sample_covariance(data).trace() == doctest::Approx(sq / 4.0).epsilon(1e-12));

  CHECK_THROWS_AS(sample_covariance(random_samples({70, 70}, 1, 47)), DimensionError);
}

TEST_CASE("cached pair Grams agree with streaming cross computations") {
  const SampleSet data = random_samples({3, 4, 2}, 5, 53);
  GramCache cached(data, 4096);
  GramCache streamed(data, 1);  // cap forces the streaming path
  for (Index j = 0; j < 3; ++j)
    for (Index k = 0; k < 3; ++k) {
      if (j == k) continue;
      const Eigen::MatrixXd psi =
          random_sym_dense(data.dims[static_cast<std::size_t>(j)], 59 + j * 3 + k);
      const Eigen::MatrixXd a = cached.cross(j, k, psi);
      const Eigen::MatrixXd b = streamed.cross(j, k, psi);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("pair_cross matches the direct inner product") {
  const SampleSet data = random_samples({3, 4}, 4, 61);
  GramCache cache(data);
  const Eigen::MatrixXd p0 = random_sym_dense(3, 67);
  const Eigen::MatrixXd p1 = random_sym_dense(4, 71);
  double want = 0.0;
  for (const auto& x : data.samples)
    want += vec(kmode_product(x, p0, 0)).dot(vec(kmode_product(x, p1, 1)));
  want /= static_cast<double>(data.n());
  CHECK(cache.pair_cross(0, 1, p0, p1) == doctest::Approx(want).epsilon(1e-12));
  CHECK(cache.pair_cross(1, 0, p1, p0) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("per-entry centering removes the sample mean") {
  SampleSet data = random_samples({3, 2}, 6, 73);
  data.center_per_entry();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
  for (const auto& x : data.samples) mean += x.values();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("last-mode slicing round-trips") {
  const SampleSet data = random_samples({3, 2}, 4, 79);
  const DenseTensor stacked = data.to_tensor_last_mode();
  CHECK(stacked.dims() == std::vector<Index>{3, 2, 4});
  const SampleSet back = SampleSet::from_tensor_last_mode(stacked);
  CHECK(back.n() == 4);
  for (Index s = 0; s < 4; ++s)
    CHECK(back.samples[static_cast<std::size_t>(s)].values() ==
          data.samples[static_cast<std::size_t>(s)].values());
}

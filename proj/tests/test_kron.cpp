#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kronsolve/errors.hpp"
#include "kronsolve/kron.hpp"
#include "kronsolve/rng.hpp"

using namespace kronsolve;

namespace {

SymSparseMatrix random_sym(Index dim, std::uint64_t seed, double density = 0.5) {
  CounterRng rng(seed);
  SymSparseMatrix m(dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = i; j < dim; ++j)
      if (i == j || rng.uniform01() < density) m.set(i, j, rng.gaussian());
  return m;
}

}  // namespace

TEST_CASE("I (+) I = 2I") {
  SylvesterFactors f({SymSparseMatrix::identity(2), SymSparseMatrix::identity(2)});
  const Eigen::MatrixXd m = kron_sum_dense(f);
  CHECK((m - 2.0 * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("K=2 Kronecker sum follows I_{d2} x Psi_1 + Psi_2 x I_{d1}") {
  const SymSparseMatrix a = random_sym(2, 1);
  const SymSparseMatrix b = random_sym(3, 2);
  const Eigen::MatrixXd got = kron_sum_dense(SylvesterFactors({a, b}));
  const Eigen::MatrixXd expect =
      kron_product_dense(Eigen::MatrixXd::Identity(3, 3), a.to_dense()) +
      kron_product_dense(b.to_dense(), Eigen::MatrixXd::Identity(2, 2));
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("K=3 Kronecker sum equals term-by-term triple products") {
  const SymSparseMatrix a = random_sym(2, 3);
  const SymSparseMatrix b = random_sym(3, 4);
  const SymSparseMatrix c = random_sym(2, 5);
  const Eigen::MatrixXd got = kron_sum_dense(SylvesterFactors({a, b, c}));
  auto eye = [](Index n) { return Eigen::MatrixXd::Identity(n, n); };
  const Eigen::MatrixXd expect =
      kron_product_dense(eye(2), kron_product_dense(eye(3), a.to_dense())) +
      kron_product_dense(eye(2), kron_product_dense(b.to_dense(), eye(2))) +
      kron_product_dense(c.to_dense(), kron_product_dense(eye(3), eye(2)));
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("dense cap rejects oversized materialization") {
  SylvesterFactors f({SymSparseMatrix::identity(80), SymSparseMatrix::identity(80)});
  CHECK_THROWS_AS(kron_sum_dense(f, 4096), DimensionError);
}

TEST_CASE("kron_sum_dense is symmetric for symmetric factors") {
  SylvesterFactors f({random_sym(3, 6), random_sym(4, 7)});
  const Eigen::MatrixXd m = kron_sum_dense(f);
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kron_sum_apply of zero factors is the zero map") {
  SylvesterFactors f({SymSparseMatrix(3), SymSparseMatrix(4)});
  CounterRng rng(8);
  Eigen::VectorXd x(12);
  for (Index i = 0; i < 12; ++i) x[i] = rng.gaussian();
  CHECK(kron_sum_apply(f, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity factors scale by K") {
  SylvesterFactors f({SymSparseMatrix::identity(3), SymSparseMatrix::identity(2),
                      SymSparseMatrix::identity(2)});
  CounterRng rng(9);
  Eigen::VectorXd x(12);
  for (Index i = 0; i < 12; ++i) x[i] = rng.gaussian();
  CHECK((kron_sum_apply(f, x) - 3.0 * x).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("matrix-free apply matches the dense oracle") {
  CounterRng seed_rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d1 = 2 + static_cast<Index>(seed_rng.uniform_index(4));
    const Index d2 = 2 + static_cast<Index>(seed_rng.uniform_index(4));
    const Index d3 = 2 + static_cast<Index>(seed_rng.uniform_index(3));
    SylvesterFactors f({random_sym(d1, 100 + trial), random_sym(d2, 200 + trial),
                        random_sym(d3, 300 + trial)});
    const Eigen::MatrixXd dense = kron_sum_dense(f);
    CounterRng rng(400 + trial);
    Eigen::VectorXd x(d1 * d2 * d3);
    for (Index i = 0; i < x.size(); ++i) x[i] = rng.gaussian();
    const Eigen::VectorXd want = dense * x;
    const Eigen::VectorXd got = kron_sum_apply(f, x);
    CHECK((want - got).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("kron_sum_sparse agrees with the dense assembly") {
  SylvesterFactors f({random_sym(3, 20), random_sym(5, 21)});
  const Eigen::MatrixXd sparse = Eigen::MatrixXd(kron_sum_sparse(f));
  CHECK((sparse - kron_sum_dense(f)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("length mismatch is rejected") {
  SylvesterFactors f({SymSparseMatrix::identity(3), SymSparseMatrix::identity(4)});
  CHECK_THROWS_AS(kron_sum_apply(f, Eigen::VectorXd::Zero(11)), DimensionError);
}

TEST_CASE("conjugate gradient solves an SPD system") {
  CounterRng rng(30);
  Eigen::MatrixXd a(6, 6);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.gaussian();
  const Eigen::MatrixXd spd = a * a.transpose() + 6.0 * Eigen::MatrixXd::Identity(6, 6);
  Eigen::VectorXd b(6);
  for (Index i = 0; i < 6; ++i) b[i] = rng.gaussian();
  const CgResult r =
      conjugate_gradient([&](const Eigen::VectorXd& v) { return spd * v; }, b, 1e-12, 100);
  CHECK(r.converged);
  CHECK((spd * r.x - b).norm() < 1e-10 * b.norm());
}

TEST_CASE("symmetric sparse storage presents the full view") {
  SymSparseMatrix m(3);
  m.set(0, 2, 1.5);
  CHECK(m(2, 0) == 1.5);
  CHECK(m(0, 2) == 1.5);
  CHECK(m.nnz_stored() == 1);
  m.set(2, 0, 0.0);
  CHECK(m.nnz_stored() == 0);
  CHECK_THROWS_AS(m.set(3, 0, 1.0), DimensionError);
}

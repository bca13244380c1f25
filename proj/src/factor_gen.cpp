#include "kronsolve/factor_gen.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <set>
#include <string>

#include "kronsolve/errors.hpp"
#include "kronsolve/kron.hpp"
#include "kronsolve/rng.hpp"

namespace kronsolve {

FactorKind factor_kind_from_string(const std::string& s) {
  if (s == "ar1") return FactorKind::Ar1;
  if (s == "sb") return FactorKind::StarBlock;
  if (s == "er") return FactorKind::ErdosRenyi;
  throw Error("unknown factor kind '" + s + "' (expected ar1, sb or er)");
}

void FactorGraphSpec::validate() const {
  if (dim < 1) throw DomainError("factor dimension must be positive");
  if (kind != FactorKind::ErdosRenyi && (rho <= 0.0 || rho >= 1.0))
    throw DomainError("rho must lie in (0,1)");
  if (kind == FactorKind::StarBlock && block < 2)
    throw DomainError("star-block sub-block size must be at least 2");
  if (kind == FactorKind::ErdosRenyi && edges > dim * (dim - 1) / 2)
    throw DomainError("edge count exceeds the number of available pairs");
}

namespace {

// Precision of the AR1(rho) covariance (rho^{|i-j|}): the analytic
// tridiagonal inverse.
SymSparseMatrix ar1_precision(Index dim, double rho) {
  SymSparseMatrix p(dim);
  const double s = 1.0 / (1.0 - rho * rho);
  for (Index i = 0; i < dim; ++i) {
    const bool interior = (i > 0 && i + 1 < dim);
    p.set(i, i, dim == 1 ? 1.0 : (interior ? (1.0 + rho * rho) * s : s));
    if (i + 1 < dim) p.set(i, i + 1, -rho * s);
  }
  return p;
}

// Block-diagonal star-graph covariance: within each block, hub-leaf entries
// are rho and leaf-leaf entries rho^2; the precision (block inverse) is
// star-sparse.
SymSparseMatrix star_block_precision(Index dim, double rho, Index block) {
  SymSparseMatrix p(dim);
  for (Index start = 0; start < dim; start += block) {
    const Index b = std::min(block, dim - start);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(b, b, rho * rho);
    cov.diagonal().setOnes();
    cov.row(0).tail(b - 1).setConstant(rho);
    cov.col(0).tail(b - 1).setConstant(rho);
    if (b == 1) cov(0, 0) = 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("star-block covariance is not positive definite");
    const Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(b, b));
    for (Index i = 0; i < b; ++i)
      for (Index j = i; j < b; ++j) {
        const double v = 0.5 * (prec(i, j) + prec(j, i));
        if (std::abs(v) > 1e-10) p.set(start + i, start + j, v);
      }
  }
  return p;
}

SymSparseMatrix erdos_renyi_precision(const FactorGraphSpec& spec, CounterRng& rng) {
  SymSparseMatrix p(spec.dim);
  for (Index i = 0; i < spec.dim; ++i) p.set(i, i, 0.25);
  std::set<std::pair<Index, Index>> chosen;
  while (static_cast<Index>(chosen.size()) < spec.edges) {
    const Index i = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(spec.dim)));
    const Index j = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(spec.dim)));
    if (i == j) continue;
    chosen.insert({std::min(i, j), std::max(i, j)});
  }
  for (const auto& [i, j] : chosen) {
    const double psi = rng.uniform(0.6, 0.8);
    p.add(i, j, -psi);
    p.add(i, i, psi);
    p.add(j, j, psi);
  }
  // The +psi diagonal bumps on both endpoints keep the matrix strictly
  // diagonally dominant; fail loudly if that ever breaks.
  Eigen::LLT<Eigen::MatrixXd> llt(p.to_dense());
  if (llt.info() != Eigen::Success)
    throw NumericalError("Erdos-Renyi factor lost positive definiteness");
  return p;
}

}  // namespace

SylvesterFactors generate_factors(const std::vector<FactorGraphSpec>& specs, std::uint64_t seed) {
  if (specs.empty()) throw DimensionError("need at least one factor spec");
  CounterRng root(seed);
  std::vector<SymSparseMatrix> out;
  out.reserve(specs.size());
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const FactorGraphSpec& spec = specs[k];
    spec.validate();
    CounterRng rng = root.substream(k);
    switch (spec.kind) {
      case FactorKind::Ar1:
        out.push_back(ar1_precision(spec.dim, spec.rho));
        break;
      case FactorKind::StarBlock:
        out.push_back(star_block_precision(spec.dim, spec.rho, spec.block));
        break;
      case FactorKind::ErdosRenyi:
        out.push_back(erdos_renyi_precision(spec, rng));
        break;
    }
  }
  return SylvesterFactors(std::move(out));
}

SampleSet sample_sylvester(const SylvesterFactors& factors, Index n, std::uint64_t seed,
                           double cg_tol) {
  if (n < 1) throw DomainError("need at least one sample");
  // The Kronecker sum is SPD iff the per-factor minimum eigenvalues sum to a
  // positive value; that is checkable factor-by-factor at any scale.
  double min_eig_sum = 0.0;
  for (const auto& f : factors.factors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.to_dense(),
                                                      Eigen::EigenvaluesOnly);
    min_eig_sum += es.eigenvalues().minCoeff();
  }
  if (!(min_eig_sum > 0.0))
    throw DomainError("factors do not form an SPD Kronecker sum (minimum eigenvalue " +
                      std::to_string(min_eig_sum) + ")");

  const std::vector<Index> dims = factors.dims();
  const Index d = factors.total_dim();
  std::vector<Eigen::MatrixXd> dense;
  dense.reserve(factors.factors.size());
  for (const auto& f : factors.factors) dense.push_back(f.to_dense());
  auto apply = [&](const Eigen::VectorXd& v) { return kron_sum_apply(dense, dims, v); };

  CounterRng root(seed);
  std::vector<DenseTensor> samples;
  samples.reserve(static_cast<std::size_t>(n));
  for (Index s = 0; s < n; ++s) {
    CounterRng rng = root.substream(static_cast<std::uint64_t>(s));
    Eigen::VectorXd t(d);
    for (Index f = 0; f < d; ++f) t[f] = rng.gaussian();
    const CgResult cg = conjugate_gradient(apply, t, cg_tol, 10 * d);
    if (!cg.converged)
      throw NumericalError("sample_sylvester: conjugate gradient did not reach tolerance " +
                           std::to_string(cg_tol) + " within " + std::to_string(10 * d) +
                           " iterations");
    samples.emplace_back(dims, cg.x);
  }
  return SampleSet(dims, std::move(samples));
}

}  // namespace kronsolve

#pragma once

#include <cstdint>
#include <vector>

#include "kronsolve/gram.hpp"
#include "kronsolve/sym_sparse.hpp"

namespace kronsolve {

enum class FactorKind { Ar1, StarBlock, ErdosRenyi };

FactorKind factor_kind_from_string(const std::string& s);

// Synthetic factor recipes. Ar1 and StarBlock build a covariance and invert
// it; ErdosRenyi perturbs 0.25*I along randomly chosen edges.
struct FactorGraphSpec {
  FactorKind kind = FactorKind::ErdosRenyi;
  Index dim = 16;
  double rho = 0.6;  // Ar1 / StarBlock correlation, in (0,1)
  Index block = 16;  // StarBlock sub-block size
  Index edges = 16;  // ErdosRenyi edge count, <= dim(dim-1)/2

  void validate() const;
};

// Generates one SPD factor per spec. Deterministic per (specs, seed).
SylvesterFactors generate_factors(const std::vector<FactorGraphSpec>& specs, std::uint64_t seed);

// Exact draws from the Sylvester model: vec(T) ~ N(0, I) and
// (kronsum Psi_k) vec(X) = vec(T), solved matrix-free by conjugate gradient,
// so the samples have precision (kronsum Psi_k)^2. Deterministic per seed.
SampleSet sample_sylvester(const SylvesterFactors& factors, Index n, std::uint64_t seed,
                           double cg_tol = 1e-10);

}  // namespace kronsolve

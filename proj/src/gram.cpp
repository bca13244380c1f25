#include "kronsolve/gram.hpp"

#include <string>

#include "kronsolve/errors.hpp"

namespace kronsolve {

SampleSet::SampleSet(std::vector<Index> d, std::vector<DenseTensor> s)
    : dims(std::move(d)), samples(std::move(s)) {
  if (samples.empty()) throw DimensionError("sample set needs at least one sample");
  for (const auto& t : samples)
    if (t.dims() != dims) throw DimensionError("all samples must share the same dimensions");
}

SampleSet SampleSet::from_tensor_last_mode(const DenseTensor& t) {
  if (t.order() < 2)
    throw DimensionError("need at least 2 modes to slice off an observation mode");
  std::vector<Index> dims(t.dims().begin(), t.dims().end() - 1);
  const Index n = t.dims().back();
  const Index per = static_cast<Index>(checked_product(dims));
  std::vector<DenseTensor> samples;
  samples.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    samples.emplace_back(dims, t.values().segment(i * per, per));
  return SampleSet(std::move(dims), std::move(samples));
}

DenseTensor SampleSet::to_tensor_last_mode() const {
  std::vector<Index> out_dims = dims;
  out_dims.push_back(n());
  const Index per = total_dim();
  Eigen::VectorXd values(per * n());
  for (Index i = 0; i < n(); ++i) values.segment(i * per, per) = samples[i].values();
  return DenseTensor(std::move(out_dims), std::move(values));
}

void SampleSet::center_per_entry() {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(total_dim());
  for (const auto& s : samples) mean += s.values();
  mean /= static_cast<double>(n());
  for (auto& s : samples) s.values() -= mean;
}

Eigen::MatrixXd mode_gram(const SampleSet& data, Index mode) {
  if (mode < 0 || mode >= data.order()) throw DimensionError("mode_gram: mode out of range");
  const Index dk = data.dims[static_cast<std::size_t>(mode)];
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dk, dk);
  for (const auto& x : data.samples) {
    const Eigen::MatrixXd xk = matricize(x, mode);
    s.noalias() += xk * xk.transpose();
  }
  s /= static_cast<double>(data.n());
  return 0.5 * (s + s.transpose());
}

Eigen::MatrixXd cross_gram(const SampleSet& data, const Eigen::MatrixXd& psi_j, Index j,
                           Index k) {
  if (j == k) throw DimensionError("cross_gram requires distinct modes j and k");
  if (j < 0 || j >= data.order() || k < 0 || k >= data.order())
    throw DimensionError("cross_gram: mode out of range");
  if (psi_j.rows() != data.dims[static_cast<std::size_t>(j)] || psi_j.rows() != psi_j.cols())
    throw DimensionError("cross_gram: factor does not match mode " + std::to_string(j));
  const Index dk = data.dims[static_cast<std::size_t>(k)];
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dk, dk);
  for (const auto& x : data.samples) {
    const Eigen::MatrixXd vk = matricize(kmode_product(x, psi_j, j), k);
    const Eigen::MatrixXd xk = matricize(x, k);
    s.noalias() += vk * xk.transpose();
  }
  s /= static_cast<double>(data.n());
  // Exact up to roundoff; symmetrize to keep downstream symmetry structural.
  return 0.5 * (s + s.transpose());
}

Eigen::MatrixXd cross_gram(const SampleSet& data, const SylvesterFactors& factors, Index j,
                           Index k) {
  factors.check_dims(data.dims);
  return cross_gram(data, factors.factors[static_cast<std::size_t>(j)].to_dense(), j, k);
}

Eigen::MatrixXd sample_covariance(const SampleSet& data, Index cap) {
  const Index d = data.total_dim();
  if (d > cap)
    throw DimensionError("sample_covariance: dimension " + std::to_string(d) +
                         " exceeds dense cap " + std::to_string(cap));
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : data.samples) s.noalias() += x.values() * x.values().transpose();
  s /= static_cast<double>(data.n());
  return s;
}

namespace {

// Matricization along an ordered pair of modes (p, q), p < q: rows are
// (i_p, i_q) with i_p fastest, columns enumerate the other modes in vec
// order.
Eigen::MatrixXd pair_matricize(const DenseTensor& t, Index p, Index q) {
  const auto& dims = t.dims();
  const Index dp = dims[static_cast<std::size_t>(p)];
  const Index dq = dims[static_cast<std::size_t>(q)];
  const Index total = t.size();
  Eigen::MatrixXd m(dp * dq, total / (dp * dq));
  std::vector<Index> idx(dims.size(), 0);
  for (Index f = 0; f < total; ++f) {
    Index rest = 0, mult = 1;
    for (std::size_t k = 0; k < dims.size(); ++k) {
      if (static_cast<Index>(k) == p || static_cast<Index>(k) == q) continue;
      rest += mult * idx[k];
      mult *= dims[k];
    }
    m(idx[static_cast<std::size_t>(p)] + dp * idx[static_cast<std::size_t>(q)], rest) =
        t.values()[f];
    for (std::size_t k = 0; k < dims.size(); ++k) {
      if (++idx[k] < dims[k]) break;
      idx[k] = 0;
    }
  }
  return m;
}

}  // namespace

GramCache::GramCache(const SampleSet& data, Index pair_cache_cap) : data_(data) {
  const Index order = data_.order();
  mode_grams_.reserve(static_cast<std::size_t>(order));
  for (Index k = 0; k < order; ++k) mode_grams_.push_back(kronsolve::mode_gram(data_, k));

  pair_grams_.assign(static_cast<std::size_t>(order),
                     std::vector<std::optional<Eigen::MatrixXd>>(static_cast<std::size_t>(order)));
  for (Index p = 0; p < order; ++p)
    for (Index q = p + 1; q < order; ++q) {
      const Index dp = data_.dims[static_cast<std::size_t>(p)];
      const Index dq = data_.dims[static_cast<std::size_t>(q)];
      if (dp * dq > pair_cache_cap) continue;
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dp * dq, dp * dq);
      for (const auto& x : data_.samples) {
        const Eigen::MatrixXd xm = pair_matricize(x, p, q);
        c.noalias() += xm * xm.transpose();
      }
      c /= static_cast<double>(data_.n());
      pair_grams_[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] = std::move(c);
    }
}

const Eigen::MatrixXd& GramCache::mode_gram(Index k) const {
  if (k < 0 || k >= order()) throw DimensionError("mode_gram: mode out of range");
  return mode_grams_[static_cast<std::size_t>(k)];
}

const Eigen::MatrixXd* GramCache::pair_gram(Index j, Index l) const {
  const Index p = std::min(j, l), q = std::max(j, l);
  const auto& slot = pair_grams_[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
  return slot ? &*slot : nullptr;
}

Eigen::MatrixXd GramCache::cross(Index j, Index k, const Eigen::MatrixXd& psi_j) const {
  if (j == k) throw DimensionError("cross: modes must differ");
  const Eigen::MatrixXd* c = pair_gram(j, k);
  if (c == nullptr) return cross_gram(data_, psi_j, j, k);

  const Index p = std::min(j, k), q = std::max(j, k);
  const Index dp = data_.dims[static_cast<std::size_t>(p)];
  const Index dq = data_.dims[static_cast<std::size_t>(q)];
  if (j == p) {
    // Contract the first pair index (mode j) on both sides:
    // S_{j,k}[a,b] = sum_{u,v} Psi_j[v,u] * C[(u,a),(v,b)].
    Eigen::MatrixXd s(dq, dq);
    for (Index a = 0; a < dq; ++a)
      for (Index b = 0; b < dq; ++b)
        s(a, b) = c->block(dp * a, dp * b, dp, dp).cwiseProduct(psi_j.transpose()).sum();
    return s;
  }
  // j == q: contract the second pair index.
  Eigen::MatrixXd s(dp, dp);
  for (Index a = 0; a < dp; ++a)
    for (Index b = 0; b < dp; ++b) {
      double acc = 0.0;
      for (Index u = 0; u < dq; ++u)
        for (Index v = 0; v < dq; ++v) acc += psi_j(v, u) * (*c)(a + dp * u, b + dp * v);
      s(a, b) = acc;
    }
  return s;
}

Eigen::MatrixXd GramCache::cross_sum(Index k, const std::vector<Eigen::MatrixXd>& psi) const {
  const Index dk = data_.dims[static_cast<std::size_t>(k)];
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dk, dk);
  for (Index j = 0; j < order(); ++j)
    if (j != k) s += cross(j, k, psi[static_cast<std::size_t>(j)]);
  return s;
}

double GramCache::pair_cross(Index j, Index l, const Eigen::MatrixXd& psi_j,
                             const Eigen::MatrixXd& psi_l) const {
  if (j == l) throw DimensionError("pair_cross: modes must differ");
  // (1/N) sum_i <X x_j Psi_j, X x_l Psi_l> = tr(Psi_l S_{j,l}).
  return cross(j, l, psi_j).cwiseProduct(psi_l).sum();
}

}  // namespace kronsolve

#include "kronsolve/tensor.hpp"

#include <string>

#include "kronsolve/errors.hpp"

namespace kronsolve {

std::size_t checked_product(const std::vector<Index>& dims) {
  if (dims.empty()) throw DimensionError("tensor order must be at least 1");
  std::size_t p = 1;
  for (Index d : dims) {
    if (d < 1) throw DimensionError("tensor dimensions must be positive");
    p *= static_cast<std::size_t>(d);
  }
  return p;
}

DenseTensor::DenseTensor(std::vector<Index> dims) : dims_(std::move(dims)) {
  values_ = Eigen::VectorXd::Zero(static_cast<Index>(checked_product(dims_)));
}

DenseTensor::DenseTensor(std::vector<Index> dims, Eigen::VectorXd values)
    : dims_(std::move(dims)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != checked_product(dims_))
    throw DimensionError("value count " + std::to_string(values_.size()) +
                         " does not match the product of the dimensions");
}

Index DenseTensor::flat_index(const std::vector<Index>& idx) const {
  if (idx.size() != dims_.size()) throw DimensionError("multi-index order mismatch");
  Index f = 0;
  for (std::size_t k = dims_.size(); k-- > 0;) {
    if (idx[k] < 0 || idx[k] >= dims_[k]) throw DimensionError("multi-index out of range");
    f = f * dims_[k] + idx[k];
  }
  return f;
}

std::vector<Index> DenseTensor::multi_index(Index flat) const {
  std::vector<Index> idx(dims_.size());
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    idx[k] = flat % dims_[k];
    flat /= dims_[k];
  }
  return idx;
}

const Eigen::VectorXd& vec(const DenseTensor& t) { return t.values(); }

DenseTensor devec(const std::vector<Index>& dims, const Eigen::VectorXd& v) {
  return DenseTensor(dims, v);
}

namespace {

void check_mode(const DenseTensor& t, Index mode) {
  if (mode < 0 || mode >= t.order())
    throw DimensionError("mode " + std::to_string(mode) + " out of range for order " +
                         std::to_string(t.order()) + " tensor");
}

// Stride of mode `mode` and the product of the later dimensions.
struct ModeStrides {
  Index before;  // product of dims left of mode (fastest-varying block)
  Index after;   // product of dims right of mode
};

ModeStrides mode_strides(const std::vector<Index>& dims, Index mode) {
  ModeStrides s{1, 1};
  for (Index k = 0; k < mode; ++k) s.before *= dims[static_cast<std::size_t>(k)];
  for (Index k = mode + 1; k < static_cast<Index>(dims.size()); ++k)
    s.after *= dims[static_cast<std::size_t>(k)];
  return s;
}

}  // namespace

Eigen::MatrixXd matricize(const DenseTensor& t, Index mode) {
  check_mode(t, mode);
  const Index dk = t.dim(mode);
  const auto [sb, sa] = mode_strides(t.dims(), mode);
  Eigen::MatrixXd m(dk, sb * sa);
  const Eigen::VectorXd& v = t.values();
  for (Index a = 0; a < sa; ++a)
    for (Index i = 0; i < dk; ++i)
      for (Index b = 0; b < sb; ++b) m(i, b + a * sb) = v[b + i * sb + a * sb * dk];
  return m;
}

DenseTensor fold(const Eigen::MatrixXd& m, const std::vector<Index>& dims, Index mode) {
  DenseTensor t(dims);
  check_mode(t, mode);
  const Index dk = t.dim(mode);
  const auto [sb, sa] = mode_strides(dims, mode);
  if (m.rows() != dk || m.cols() != sb * sa)
    throw DimensionError("fold: matrix shape does not match target dimensions");
  Eigen::VectorXd& v = t.values();
  for (Index a = 0; a < sa; ++a)
    for (Index i = 0; i < dk; ++i)
      for (Index b = 0; b < sb; ++b) v[b + i * sb + a * sb * dk] = m(i, b + a * sb);
  return t;
}

DenseTensor kmode_product(const DenseTensor& t, const Eigen::MatrixXd& a, Index mode) {
  check_mode(t, mode);
  const Index dk = t.dim(mode);
  if (a.cols() != dk)
    throw DimensionError("kmode_product: matrix has " + std::to_string(a.cols()) +
                         " columns, mode has extent " + std::to_string(dk));
  const Index j = a.rows();
  std::vector<Index> out_dims = t.dims();
  out_dims[static_cast<std::size_t>(mode)] = j;
  DenseTensor out(out_dims);
  const auto [sb, sa] = mode_strides(t.dims(), mode);
  // Contiguous slabs: for fixed trailing index, the (before x d_k) block is
  // column-major in memory, so the contraction is a single GEMM per slab.
  for (Index s = 0; s < sa; ++s) {
    Eigen::Map<const Eigen::MatrixXd> in(t.values().data() + s * sb * dk, sb, dk);
    Eigen::Map<Eigen::MatrixXd> outm(out.values().data() + s * sb * j, sb, j);
    outm.noalias() = in * a.transpose();
  }
  return out;
}

void add_kmode_product(const DenseTensor& t, const Eigen::MatrixXd& a, Index mode,
                       Eigen::VectorXd& out) {
  check_mode(t, mode);
  const Index dk = t.dim(mode);
  if (a.rows() != dk || a.cols() != dk)
    throw DimensionError("add_kmode_product requires a square matrix");
  if (out.size() != t.size()) throw DimensionError("add_kmode_product: output size mismatch");
  const auto [sb, sa] = mode_strides(t.dims(), mode);
  for (Index s = 0; s < sa; ++s) {
    Eigen::Map<const Eigen::MatrixXd> in(t.values().data() + s * sb * dk, sb, dk);
    Eigen::Map<Eigen::MatrixXd> outm(out.data() + s * sb * dk, sb, dk);
    outm.noalias() += in * a.transpose();
  }
}

}  // namespace kronsolve

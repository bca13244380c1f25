#pragma once

#include <string>

#include "kronsolve/tensor.hpp"

namespace kronsolve {

// KTEN binary tensor format:
//   magic "KTEN" | u8 version (=1) | u8 K | K x u32 little-endian dims |
//   prod(dims) x f64 little-endian values in vec order.
// Matrices are serialized as K=2 tensors.

DenseTensor read_kten(const std::string& path);

// Atomic: writes to a temp file in the same directory, then renames.
void write_kten(const DenseTensor& t, const std::string& path);

void write_kten(const Eigen::MatrixXd& m, const std::string& path);

// Writes any text output atomically (temp file + rename).
void write_text_atomic(const std::string& content, const std::string& path);

}  // namespace kronsolve

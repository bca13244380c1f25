#include "kronsolve/kten.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "kronsolve/errors.hpp"

namespace kronsolve {

namespace {

constexpr char kMagic[4] = {'K', 'T', 'E', 'N'};
constexpr std::uint8_t kVersion = 1;

// The format is little-endian; byte-swap on big-endian hosts.
bool host_little_endian() {
  const std::uint16_t probe = 1;
  return *reinterpret_cast<const std::uint8_t*>(&probe) == 1;
}

template <typename T>
T swap_bytes(T v) {
  T out;
  auto* src = reinterpret_cast<const std::uint8_t*>(&v);
  auto* dst = reinterpret_cast<std::uint8_t*>(&out);
  for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
  return out;
}

template <typename T>
T to_le(T v) {
  return host_little_endian() ? v : swap_bytes(v);
}

template <typename T>
T from_le(T v) {
  return to_le(v);
}

}  // namespace

DenseTensor read_kten(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  in.seekg(0, std::ios::end);
  const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("'" + path + "': bad magic, not a KTEN file");
  std::uint8_t version = 0, order = 0;
  in.read(reinterpret_cast<char*>(&version), 1);
  in.read(reinterpret_cast<char*>(&order), 1);
  if (!in) throw IoError("'" + path + "': truncated header");
  if (version != kVersion)
    throw IoError("'" + path + "': unsupported KTEN version " + std::to_string(version) +
                  " (expected " + std::to_string(kVersion) + ")");
  if (order == 0) throw IoError("'" + path + "': tensor order must be at least 1");

  std::vector<Index> dims(order);
  std::uint64_t count = 1;
  for (std::uint8_t k = 0; k < order; ++k) {
    std::uint32_t d = 0;
    if (!in.read(reinterpret_cast<char*>(&d), 4))
      throw IoError("'" + path + "': truncated dimension list");
    d = from_le(d);
    if (d == 0) throw IoError("'" + path + "': zero dimension");
    dims[k] = static_cast<Index>(d);
    count *= d;
  }

  const std::uint64_t expected = 6 + 4ull * order + 8ull * count;
  if (file_size != expected)
    throw IoError("'" + path + "': truncated or oversized payload, expected " +
                  std::to_string(expected) + " bytes, file has " + std::to_string(file_size));

  Eigen::VectorXd values(static_cast<Index>(count));
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(8 * count)))
    throw IoError("'" + path + "': failed reading values");
  if (!host_little_endian())
    for (Index i = 0; i < values.size(); ++i) values[i] = swap_bytes(values[i]);
  return DenseTensor(std::move(dims), std::move(values));
}

namespace {

void rename_or_throw(const std::string& tmp, const std::string& path) {
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot move temporary file onto '" + path + "'");
  }
}

}  // namespace

void write_kten(const DenseTensor& t, const std::string& path) {
  if (t.order() > 255) throw IoError("KTEN supports at most 255 modes");
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(kMagic, 4);
    const std::uint8_t version = kVersion;
    const std::uint8_t order = static_cast<std::uint8_t>(t.order());
    out.write(reinterpret_cast<const char*>(&version), 1);
    out.write(reinterpret_cast<const char*>(&order), 1);
    for (Index k = 0; k < t.order(); ++k) {
      const std::uint32_t d = to_le(static_cast<std::uint32_t>(t.dim(k)));
      out.write(reinterpret_cast<const char*>(&d), 4);
    }
    if (host_little_endian()) {
      out.write(reinterpret_cast<const char*>(t.values().data()),
                static_cast<std::streamsize>(8 * t.size()));
    } else {
      for (Index i = 0; i < t.size(); ++i) {
        const double v = swap_bytes(t.values()[i]);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  rename_or_throw(tmp, path);
}

void write_kten(const Eigen::MatrixXd& m, const std::string& path) {
  Eigen::VectorXd flat(m.size());
  // Column-major matrix layout coincides with vec order for K=2.
  std::memcpy(flat.data(), m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  write_kten(DenseTensor({m.rows(), m.cols()}, std::move(flat)), path);
}

void write_text_atomic(const std::string& content, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  rename_or_throw(tmp, path);
}

}  // namespace kronsolve

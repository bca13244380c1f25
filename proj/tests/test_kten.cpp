#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "kronsolve/errors.hpp"
#include "kronsolve/kten.hpp"
#include "kronsolve/rng.hpp"

using namespace kronsolve;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / "kten_test";
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

DenseTensor random_tensor(std::vector<Index> dims, std::uint64_t seed) {
  CounterRng rng(seed);
  DenseTensor t(dims);
  for (Index i = 0; i < t.size(); ++i) t.values()[i] = rng.gaussian();
  return t;
}

}  // namespace

TEST_CASE("write/read round-trip is bit-identical") {
  TempDir dir;
  const DenseTensor t = random_tensor({3, 4, 2}, 5);
  const std::string path = dir.file("t.kten");
  write_kten(t, path);
  const DenseTensor back = read_kten(path);
  CHECK(back.dims() == t.dims());
  for (Index i = 0; i < t.size(); ++i) CHECK(back.values()[i] == t.values()[i]);
}

TEST_CASE("matrices serialize as K=2 tensors") {
  TempDir dir;
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const std::string path = dir.file("m.kten");
  write_kten(m, path);
  const DenseTensor back = read_kten(path);
  CHECK(back.dims() == std::vector<Index>{2, 3});
  CHECK(back({1, 2}) == 6);
}

TEST_CASE("bad magic is a distinct error") {
  TempDir dir;
  const std::string path = dir.file("bad.kten");
  std::ofstream(path) << "NOPE1234";
  CHECK_THROWS_WITH_AS(read_kten(path), doctest::Contains("bad magic"), IoError);
}

TEST_CASE("version mismatch is a distinct error") {
  TempDir dir;
  const std::string path = dir.file("v2.kten");
  const DenseTensor t = random_tensor({2, 2}, 6);
  write_kten(t, path);
  // Flip the version byte to 2.
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(4);
  const char two = 2;
  f.write(&two, 1);
  f.close();
  CHECK_THROWS_WITH_AS(read_kten(path), doctest::Contains("version"), IoError);
}

TEST_CASE("truncation names the expected byte counts") {
  TempDir dir;
  const std::string full = dir.file("full.kten");
  write_kten(random_tensor({4, 4}, 7), full);
  const auto size = std::filesystem::file_size(full);
  const std::string cut = dir.file("cut.kten");
  {
    std::ifstream in(full, std::ios::binary);
    std::ofstream out(cut, std::ios::binary);
    std::vector<char> buf(size - 9);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  CHECK_THROWS_WITH_AS(read_kten(cut), doctest::Contains("truncated"), IoError);
}

TEST_CASE("missing file is an io error") {
  CHECK_THROWS_AS(read_kten("/nonexistent/path/x.kten"), IoError);
}

TEST_CASE("writes are atomic: no temp file survives") {
  TempDir dir;
  const std::string path = dir.file("a.kten");
  write_kten(random_tensor({2, 2}, 8), path);
  CHECK(std::filesystem::exists(path));
  CHECK(!std::filesystem::exists(path + ".tmp"));
}

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "dspr/grid.hpp"
#include "dspr/tensor.hpp"

namespace testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dspr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

template <typename Scalar>
dspr::Tensor4<Scalar> random_tensor(const dspr::Shape4& s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  dspr::Tensor4<Scalar> t(s);
  for (dspr::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(u(rng));
  return t;
}

inline dspr::SeismicGrid random_grid(dspr::Index nt, dspr::Index nx, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd v(nt, nx);
  for (dspr::Index j = 0; j < nx; ++j)
    for (dspr::Index i = 0; i < nt; ++i) v(i, j) = n(rng);
  return dspr::SeismicGrid(v, 0.004, 10.0);
}

/// Little-endian byte builder, written independently of the library codec.
struct Bytes {
  std::string s;
  Bytes& raw(const std::string& t) { s += t; return *this; }
  Bytes& u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) s.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
    return *this;
  }
  Bytes& f32(float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    return u32(v);
  }
};

}  // namespace testing

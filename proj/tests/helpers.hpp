#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"

namespace testing_util {

using probekit::Index;
using probekit::Matrix;
using probekit::Vector;

inline Matrix gaussian(Index rows, Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

/// Code of the probekit::Error thrown by fn; records a failure when nothing is thrown.
template <typename Fn>
probekit::ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const probekit::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no probekit::Error thrown";
  return probekit::ErrorCode::InvalidConfig;
}

inline Vector gaussian_vector(Index n, std::uint64_t seed, double scale = 1.0) { return gaussian(n, 1, seed, scale).col(0); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "probekit_";
    if (info) name += std::string(info->test_suite_name()) + "_" + info->name();
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_util

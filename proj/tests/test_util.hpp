#pragma once

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "sfnn/matrix.hpp"
#include "sfnn/rng.hpp"

namespace sfnn::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  SeededRng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.standard_normal();
  return m;
}

/// Fresh empty directory under the system temp dir, unique per test.
inline std::filesystem::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = std::filesystem::temp_directory_path() / "sfnn-tests" /
             (std::string(info->test_suite_name()) + "." + info->name());
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace sfnn::testing

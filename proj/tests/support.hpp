#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vipcop/rng.hpp"
#include "vipcop/table.hpp"

namespace vipcop::testing {

// Two classes drawn by fair coin; features N(+shift, 1) for class 1 and
// N(-shift, 1) for class 0.
inline Table gaussian_blobs(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 1.0) {
  Stream rng = Stream::derive(seed, "blobs");
  std::vector<double> x(n * d);
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < 0.5 ? 0 : 1;
    const double mu = y[i] == 1 ? shift : -shift;
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = rng.normal(mu, 1.0);
  }
  return Table(n, d, std::move(x), std::move(y), 2);
}

// Table whose rows carry no signal; used where only indices matter.
inline Table index_table(std::size_t n, std::size_t d, std::uint32_t classes = 2) {
  std::vector<double> x(n * d);
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<Label>(i % classes);
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = static_cast<double>(i * d + j);
  }
  return Table(n, d, std::move(x), std::move(y), classes);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("vipcop_" + tag + "_" + std::to_string(splitmix64(reinterpret_cast<std::uintptr_t>(this))));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace vipcop::testing

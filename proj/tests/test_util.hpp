#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "atsn/matrix.hpp"

namespace testutil {

// Fresh scratch directory under the build tree; wiped on construction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& name) : path(std::filesystem::path("test_tmp") / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Central finite differences against analytic gradients over a tensor list.
// Relative error counts as zero when both sides are below 1e-10.
inline double fd_max_rel_error(const std::vector<atsn::TensorRef<double>>& params,
                               const std::vector<atsn::TensorRef<double>>& grads,
                               const std::function<double()>& loss, double step = 1e-5) {
  double max_rel = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& theta = params[t].mat->a;
    const auto& g = grads[t].mat->a;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + step;
      const double up = loss();
      theta[i] = saved - step;
      const double down = loss();
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = g[i];
      const double denom = std::max(std::abs(analytic), std::abs(numeric));
      if (denom < 1e-10) continue;
      max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace testutil

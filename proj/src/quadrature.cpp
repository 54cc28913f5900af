#include "fracsus/quadrature.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include <fmt/format.h>

#include "fracsus/errors.hpp"

namespace fracsus {

void QuadratureSpec::validate() const {
  if (panel_order < 4 || panel_order > 128) {
    throw ValidationError(fmt::format("quadrature: panel_order must be in [4, 128], got {}",
                                      panel_order));
  }
  if (!(grading_ratio > 0.0 && grading_ratio < 1.0)) {
    throw ValidationError("quadrature: grading_ratio must lie in (0, 1)");
  }
  if (grading_levels < 1) throw ValidationError("quadrature: grading_levels must be >= 1");
  if (!(inner_cutoff > 0.0)) throw ValidationError("quadrature: inner_cutoff must be positive");
  if (tail_cutoff && !(*tail_cutoff > inner_cutoff)) {
    throw ValidationError("quadrature: tail_cutoff must exceed inner_cutoff");
  }
}

namespace {

GaussRule build_rule(int n) {
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1);
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -z;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  static std::array<std::unique_ptr<GaussRule>, 129> cache;
  static std::array<std::once_flag, 129> built;
  if (n < 1 || n > 128) throw DomainError(fmt::format("gauss_legendre: unsupported order {}", n));
  const auto i = static_cast<std::size_t>(n);
  std::call_once(built[i], [&] { cache[i] = std::make_unique<GaussRule>(build_rule(n)); });
  return *cache[i];
}

}  // namespace fracsus

#pragma once

#include <cmath>
#include <optional>
#include <vector>

namespace fracsus {

// Knobs for the singularity-aware quadratures.
struct QuadratureSpec {
  int panel_order = 16;           // Gauss-Legendre points per panel
  double grading_ratio = 0.5;     // geometric ratio between consecutive graded panels
  int grading_levels = 48;        // graded panels toward each singular endpoint
  std::optional<double> tail_cutoff;  // U_max; unset means support diameter + 4
  double inner_cutoff = 1e-6;     // delta

  void validate() const;
};

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;
};

// Cached n-point Gauss-Legendre rule; the reference stays valid for the process.
const GaussRule& gauss_legendre(int n);

template <class F>
double integrate_panel(F&& f, double a, double b, const GaussRule& rule) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  }
  return sum * half;
}

template <class F>
double integrate_uniform(F&& f, double a, double b, int panels, const GaussRule& rule) {
  if (!(b > a)) return 0.0;
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double l = a + p * h;
    const double r = (p + 1 == panels) ? b : l + h;
    sum += integrate_panel(f, l, r, rule);
  }
  return sum;
}

// Integral over [a, b] with geometric panel grading toward each endpoint
// flagged as singular. Never samples the endpoints themselves. The integrand
// is called as f(base, offset) with base in {a, b}, so offsets far below the
// rounding unit of the endpoint stay exact.
template <class F>
double integrate_graded_local(F&& f, double a, double b, bool grade_left, bool grade_right,
                              const QuadratureSpec& spec) {
  if (!(b > a)) return 0.0;
  const GaussRule& rule = gauss_legendre(spec.panel_order);
  const double q = spec.grading_ratio;
  // Signed integral from anchor to anchor + len.
  auto graded_toward = [&](double anchor, double len) {
    auto g = [&](double off) { return f(anchor, off); };
    auto panel = [&](double o0, double o1) {
      return (len > 0) ? integrate_panel(g, o0, o1, rule) : -integrate_panel(g, o1, o0, rule);
    };
    double sum = 0.0;
    double outer = 1.0;
    double prev = 0.0;
    double last = 0.0;
    for (int k = 0; k < spec.grading_levels; ++k) {
      const double inner = outer * q;
      prev = last;
      last = panel(len * inner, len * outer);
      sum += last;
      outer = inner;
    }
    // Innermost remainder: panel integrals of c*s^g shrink by a fixed ratio,
    // so the rest is a geometric series. Gauss on that panel is the fallback.
    const double r = (prev != 0.0) ? last / prev : 0.0;
    if (spec.grading_levels >= 2 && r > 0.0 && r < 1.0) return sum + last * r / (1.0 - r);
    return sum + panel(0.0, len * outer);
  };
  if (grade_left && grade_right) {
    const double m = 0.5 * (b - a);
    return graded_toward(a, m) - graded_toward(b, -m);
  }
  if (grade_left) return graded_toward(a, b - a);
  if (grade_right) return -graded_toward(b, a - b);
  return integrate_panel([&](double off) { return f(a, off); }, 0.0, b - a, rule);
}

template <class F>
double integrate_graded(F&& f, double a, double b, bool grade_left, bool grade_right,
                        const QuadratureSpec& spec) {
  return integrate_graded_local([&](double base, double off) { return f(base + off); }, a, b,
                                grade_left, grade_right, spec);
}

}  // namespace fracsus

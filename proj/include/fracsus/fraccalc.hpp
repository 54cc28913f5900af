#pragma once

#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fracsus/quadrature.hpp"

namespace fracsus {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Opening side of a power atom: Plus is supported right of the anchor.
enum class Side : int { Plus = 1, Minus = -1 };

inline int sign_of(Side s) noexcept { return static_cast<int>(s); }
inline Side opposite(Side s) noexcept { return s == Side::Plus ? Side::Minus : Side::Plus; }

// c * 1{0 < s(x-a) < A} * (s(x-a))^beta with s = +1 or -1.
struct PowerAtom {
  double coefficient = 1.0;
  double exponent = 0.0;
  double anchor = 0.0;
  Side side = Side::Plus;
  double width = kInf;

  double eval(double x) const noexcept;
  // Value at x + d, resolving the support edges from x rather than from x + d,
  // so offsets below the rounding unit of x still land on the correct side.
  double eval_offset(double x, double d) const noexcept;
  double support_lo() const noexcept;
  double support_hi() const noexcept;
  bool truncated() const noexcept { return width != kInf; }
  // Integral over (-inf, x].
  double cumulative(double x) const;
  double integral(double lo, double hi) const { return cumulative(hi) - cumulative(lo); }
  void validate() const;
};

// One linear piece of a compactly supported piecewise-linear function.
struct LinearSegment {
  double lo;
  double hi;
  double value_lo;
  double slope;
};

// Piecewise-linear function on cell centres of a uniform partition of
// (a, b) into N cells; constant on the two outer half cells, zero outside.
// With this layout the integral is exactly h * sum(values).
class GridFunction {
 public:
  GridFunction(double a, double b, std::vector<double> values);

  double lo() const noexcept { return a_; }
  double hi() const noexcept { return b_; }
  std::size_t size() const noexcept { return values_.size(); }
  double cell_width() const noexcept { return h_; }
  double node(std::size_t i) const noexcept { return a_ + (static_cast<double>(i) + 0.5) * h_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double eval(double x) const noexcept;
  double cumulative(double x) const noexcept;
  double integral(double lo, double hi) const noexcept { return cumulative(hi) - cumulative(lo); }
  double mass() const noexcept;
  std::vector<LinearSegment> segments() const;

 private:
  double a_;
  double b_;
  double h_;
  std::vector<double> values_;
  std::vector<double> prefix_;  // prefix_[i] = integral over (a, node(i)]
};

// Sum of power atoms plus an optional grid remainder.
struct AtomSum {
  std::vector<PowerAtom> atoms;
  std::optional<GridFunction> smooth_part;

  double eval(double x) const noexcept;
  double eval_offset(double x, double d) const noexcept;
  double cumulative(double x) const;
  double integral(double lo, double hi) const { return cumulative(hi) - cumulative(lo); }
  std::pair<double, double> support() const;
  // Points where the sum is singular or non-smooth, with a flag for singular ones.
  std::vector<std::pair<double, bool>> breakpoints() const;
  AtomSum scaled(double factor) const;
  AtomSum shifted(double h) const;
};

// Gamma(num) / Gamma(den) through log-Gamma with tracked signs.
double gamma_ratio(double num, double den);
double beta_function(double x, double y);

PowerAtom frac_integral_atom(const PowerAtom& atom, double eta);
PowerAtom marchaud_atom(const PowerAtom& atom, double eta, Side derivative_side);

// Interval fractional integrals I_{a+} (lower endpoint) and I_{b-} (upper endpoint).
enum class IntervalSide { Lower, Upper };
double frac_integral_numeric(const AtomSum& g, double eta, IntervalSide side, double endpoint,
                             double x, const QuadratureSpec& spec);
double frac_integral_numeric(const GridFunction& g, double eta, IntervalSide side,
                             double endpoint, double x, const QuadratureSpec& spec);

// Whole-line fractional integrals I_+^alpha (from -inf) and I_-^alpha (to +inf).
double frac_integral_whole_line(const AtomSum& g, double alpha, Side side, double x,
                                const QuadratureSpec& spec);

enum class MarchaudSide { Plus, Minus, TwoSided };
double marchaud_numeric(const AtomSum& g, double eta, MarchaudSide side, double x,
                        const QuadratureSpec& spec);
// One-sided Marchaud derivative of a single atom by graded quadrature.
double marchaud_atom_numeric(const PowerAtom& atom, double eta, Side side, double x,
                             const QuadratureSpec& spec);

// Exact Marchaud derivatives and fractional integrals of piecewise-linear functions.
double marchaud_piecewise_linear(std::span<const LinearSegment> segments, double eta, Side side,
                                 double x);
double frac_integral_piecewise_linear(std::span<const LinearSegment> segments, double alpha,
                                      Side side, double x);

struct ExponentFit {
  double exponent = 0.0;
  double amplitude = 0.0;
  double r2 = 0.0;
};

// Log-log least squares of |value| against distance.
ExponentFit singularity_exponent_fit(std::span<const std::pair<double, double>> samples);

}  // namespace fracsus

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace fracsus {

// 50 significant decimal digits; used where orbit errors grow like lambda^K.
using Real50 = boost::multiprecision::cpp_bin_float_50;

enum class FamilyKind { Quadratic, Generalized };

// Offsets from t0; t_min < 0 < t_max.
struct ParameterWindow {
  double t_min = -0.05;
  double t_max = 0.05;
};

// f_{t0+t}(x) = f_{t0}(x) + t * X(f_{t0}(x)) with f_{t0}(x) = t0 - x^2.
// The direction X is a polynomial; X == 1 gives back the quadratic family.
// Parameters outside the window are frozen at the nearest window edge.
class UnimodalFamily {
 public:
  static UnimodalFamily quadratic(const Real50& t0, ParameterWindow window = {});
  static UnimodalFamily generalized(const Real50& t0, ParameterWindow window,
                                    std::vector<double> direction_coefficients);

  FamilyKind kind() const noexcept { return kind_; }
  double t0() const noexcept { return t0_; }
  const Real50& t0_exact() const noexcept { return t0_exact_; }
  const ParameterWindow& window() const noexcept { return window_; }
  const std::vector<double>& direction_coefficients() const noexcept { return direction_; }

  // Offset clamped into [t_min, t_max].
  double clamp_offset(double t) const noexcept;

  double eval(double t, double x) const;
  double derivative(double t, double x) const;

  // Half width beta of the dynamical interval [-beta, beta] at offset t.
  double half_width(double t) const;

  // Solution y of f_t(y) = x with sign(y) = branch (+1 or -1); empty when
  // x lies above the critical value. Also returns |f_t'(y)|.
  struct Preimage {
    double y;
    double abs_derivative;
  };
  std::optional<Preimage> preimage(double t, double x, int branch) const;

  double direction(double y) const noexcept;
  double direction_slope(double y) const noexcept;

  template <class R>
  R eval_generic(const R& offset, const R& x) const;
  template <class R>
  R derivative_generic(const R& offset, const R& x) const;

  std::string describe() const;

 private:
  UnimodalFamily(FamilyKind kind, const Real50& t0, ParameterWindow window,
                 std::vector<double> direction);

  FamilyKind kind_;
  Real50 t0_exact_;
  double t0_;
  ParameterWindow window_;
  std::vector<double> direction_;
};

// Admissible parameters: those with a real invariant interval, t > -1/4.
inline constexpr double kMinAdmissibleParameter = -0.25;

struct CriticalOrbitData {
  std::vector<double> orbit;        // c_0 .. c_K, c_0 = 0
  std::vector<double> derivatives;  // D_1 .. D_K stored at index k-1
  std::vector<int> signs;           // sgn(D_k), index k-1
  int length = 0;                   // K

  double c(int k) const { return orbit.at(static_cast<std::size_t>(k)); }
  double d(int k) const { return derivatives.at(static_cast<std::size_t>(k - 1)); }
  int sigma(int k) const { return signs.at(static_cast<std::size_t>(k - 1)); }
};

struct MTCertificate {
  int preperiod = 0;
  int period = 0;
  double multiplier = 0.0;  // |Df^p(c_l)|, signed value in signed_multiplier
  double signed_multiplier = 0.0;
  double residual = 0.0;
};

struct CEEstimate {
  double lambda_hat = 0.0;
  std::vector<double> per_step;  // |D_k|^{1/(k-1)}, k = 2..K
};

// Orbits longer than this are iterated in Real50.
inline constexpr int kExtendedPrecisionThreshold = 30;
inline constexpr double kEscapeMargin = 1e-6;
inline constexpr int kEscapeRun = 3;
inline constexpr double kDefaultMtTolerance = 1e-9;

double map_eval(const UnimodalFamily& family, double t, double x);
double map_derivative(const UnimodalFamily& family, double t, double x);
double clamp_parameter(const UnimodalFamily& family, double t);

CriticalOrbitData critical_orbit(const UnimodalFamily& family, double t, int K);
CEEstimate ce_exponent(const UnimodalFamily& family, double t, int K);
std::optional<MTCertificate> detect_mt(const UnimodalFamily& family, double t, int K,
                                       double tol = kDefaultMtTolerance);
double misiurewicz_gap(const CriticalOrbitData& data);

// Root of f_t^{l+p}(0) - f_t^{l}(0) on [lo, hi] by bisection in Real50, for the
// quadratic family. Requires a sign change on the bracket.
Real50 bisect_preperiodic_parameter(const Real50& lo, const Real50& hi, int preperiod,
                                    int period);

}  // namespace fracsus

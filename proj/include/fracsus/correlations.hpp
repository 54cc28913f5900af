#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracsus/density.hpp"
#include "fracsus/fraccalc.hpp"
#include "fracsus/kernels.hpp"
#include "fracsus/unimodal.hpp"

namespace fracsus {

// Bounded test function on the dynamical interval.
struct Observable {
  enum class Kind { Polynomial, Cosine, Indicator, Constant };
  Kind kind = Kind::Constant;
  std::vector<double> coefficients;  // polynomial, lowest degree first
  double omega = 0.0;                // cosine: cos(omega x + phase)
  double phase = 0.0;
  double lo = 0.0;                   // indicator of (lo, hi)
  double hi = 0.0;
  double value = 1.0;                // constant
  std::string description;

  static Observable polynomial(std::vector<double> coefficients);
  static Observable cosine(double omega, double phase = 0.0);
  static Observable indicator(double lo, double hi);
  static Observable constant(double c);
  // "const:1", "poly:0,0,1", "x^2", "cos:3", "cos:3,0.5", "ind:0,2".
  static Observable parse(const std::string& text);

  double operator()(double x) const noexcept;
  // Jump points of the observable itself.
  std::vector<double> discontinuities() const;
};

enum class CorrelationMethod { Quadrature, Ulam };

const char* to_string(CorrelationMethod m) noexcept;

inline constexpr int kDefaultJSwitch = 10;

struct CoefficientSequence {
  std::vector<double> values;                  // a_0 .. a_J
  std::vector<CorrelationMethod> methods;      // method behind values[j]
  std::vector<std::optional<double>> ulam_check;  // Ulam value where quadrature was primary
  double eta = 0.0;
  std::string kind;
  std::string observable;

  int J() const noexcept { return static_cast<int>(values.size()) - 1; }
};

struct DecayFit {
  double theta = 0.0;
  double C = 0.0;
  int j_lo = 0;
  int j_hi = 0;
  double r2 = 0.0;
  int points = 0;
};

inline constexpr double kNoiseFloor = 1e-13;

// Exact bin average of phi on [a, b] (adaptive Gauss-Kronrod, subdivided by
// an estimate of the local oscillation count).
double bin_average(const std::function<double(double)>& g, double a, double b, double oscillation);

// a_j = int phi(f^j x) psi(x) dx over the dynamical interval.
// Quadrature: pointwise integration with the substitution x = a +- s^2 at
// singular breakpoints. Ulam: psi projected to bin masses, pushed j times by
// the Ulam density action, paired with bin averages of phi.
double correlation_coefficient(const UnimodalFamily& family, double t, const Observable& phi,
                               const AtomSum& psi, int j, CorrelationMethod method,
                               const QuadratureSpec& spec, const UlamOperator* ulam = nullptr,
                               int j_switch = kDefaultJSwitch);

// Koopman vectors Phi_j[i] ~ average of phi(f^j x) over bin i: exact bin
// averages for j <= j_switch, Ulam iterates P^j phi_bar for every j.
struct KoopmanTable {
  BinGrid grid;
  int j_switch = kDefaultJSwitch;
  std::vector<std::vector<double>> exact;  // j = 0 .. min(J, j_switch)
  std::vector<std::vector<double>> ulam;   // j = 0 .. J
  std::string observable;

  int J() const noexcept { return static_cast<int>(ulam.size()) - 1; }
  const std::vector<double>& primary(int j) const;
};

KoopmanTable koopman_table(const UnimodalFamily& family, double t, const UlamOperator& op,
                           const Observable& phi, int J, int j_switch = kDefaultJSwitch,
                           Exec exec = Exec::Parallel);

// Sequence for a psi given by its masses on the table's bins.
CoefficientSequence binned_sequence(const KoopmanTable& table, std::span<const double> masses,
                                    Exec exec = Exec::Parallel);

CoefficientSequence correlation_sequence(const UnimodalFamily& family, double t,
                                         const Observable& phi, const AtomSum& psi, int J,
                                         const QuadratureSpec& spec, const UlamOperator& ulam,
                                         int j_switch = kDefaultJSwitch);

DecayFit decay_fit(const CoefficientSequence& seq, int j_lo, int j_hi);
DecayFit decay_fit(const CoefficientSequence& seq);  // window [5, J-2]

}  // namespace fracsus

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "fracsus/errors.hpp"
#include "fracsus/fraccalc.hpp"

using namespace fracsus;
using boost::multiprecision::cpp_bin_float_50;

namespace {

double gamma50(double x) {
  return static_cast<double>(boost::math::tgamma(cpp_bin_float_50(x)));
}

PowerAtom atom(double beta, double anchor, Side side, double width = kInf, double c = 1.0) {
  return PowerAtom{c, beta, anchor, side, width};
}

AtomSum sum_of(std::vector<PowerAtom> atoms) {
  AtomSum s;
  s.atoms = std::move(atoms);
  return s;
}

// Midpoint rule on [0, 1] of h(s), n nodes.
template <class F>
double midpoint(F&& h, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += h((i + 0.5) / n);
  return acc / n;
}

}  // namespace

TEST_CASE("gamma_ratio against a 50-digit oracle") {
  CHECK(gamma_ratio(0.5, 1.0) == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-14));
  CHECK(gamma_ratio(0.5, 0.5) == 1.0);
  const double oracle = gamma50(0.5) / gamma50(0.25);
  CHECK(oracle == doctest::Approx(0.488871).epsilon(1e-6));
  CHECK(gamma_ratio(0.5, 0.25) == doctest::Approx(oracle).epsilon(1e-13));
  CHECK(gamma_ratio(-0.5, 1.5) == doctest::Approx(gamma50(-0.5) / gamma50(1.5)).epsilon(1e-13));
  CHECK(beta_function(0.5, 0.5) == doctest::Approx(std::numbers::pi).epsilon(1e-13));
  CHECK_THROWS_AS(gamma_ratio(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(gamma_ratio(1.0, -2.0), DomainError);
}

TEST_CASE("frac_integral_atom") {
  const auto half = frac_integral_atom(atom(-0.5, 0, Side::Plus), 0.5);
  CHECK(half.exponent == 0.0);
  CHECK(half.coefficient == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-14));
  const auto id = frac_integral_atom(atom(0.5, 0, Side::Plus), 0.0);
  CHECK(id.coefficient == 1.0);
  CHECK(id.exponent == 0.5);
  const auto a = frac_integral_atom(atom(0.5, 0, Side::Plus), 0.3);
  CHECK(a.coefficient == doctest::Approx(gamma50(1.5) / gamma50(1.8)).epsilon(1e-13));
  CHECK(a.exponent == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(frac_integral_atom(atom(-1.0, 0, Side::Plus), 0.3), DomainError);
  CHECK_THROWS_AS(frac_integral_atom(atom(0.5, 0, Side::Plus, 1.0), 0.3), UnsupportedError);
}

TEST_CASE("marchaud_atom") {
  const auto m = marchaud_atom(atom(0.5, 0, Side::Plus), 0.25, Side::Plus);
  CHECK(m.coefficient == doctest::Approx(gamma50(1.5) / gamma50(1.25)).epsilon(1e-13));
  CHECK(m.coefficient == doctest::Approx(0.977742).epsilon(1e-6));
  CHECK(m.exponent == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(marchaud_atom(atom(0.5, 0, Side::Plus), 0.25, Side::Minus), UnsupportedError);
  CHECK_THROWS_AS(marchaud_atom(atom(-0.5, 0, Side::Plus), 0.6, Side::Plus), DomainError);
}

TEST_CASE("atom-level identities") {
  for (double beta : {-0.5, 0.0, 0.5}) {
    for (Side s : {Side::Plus, Side::Minus}) {
      const auto base = atom(beta, 0.3, s, kInf, 1.7);
      // Left inverse.
      for (double eta : {0.1, 0.25, 0.4}) {
        const auto back = marchaud_atom(frac_integral_atom(base, eta), eta, s);
        CHECK(back.coefficient == doctest::Approx(base.coefficient).epsilon(1e-12));
        CHECK(back.exponent == doctest::Approx(beta).epsilon(1e-15));
      }
      // Semigroup.
      for (auto [a, b] : {std::pair{0.1, 0.25}, std::pair{0.3, 0.4}, std::pair{0.45, 0.5}}) {
        const auto two = frac_integral_atom(frac_integral_atom(base, a), b);
        const auto one = frac_integral_atom(base, a + b);
        CHECK(two.coefficient == doctest::Approx(one.coefficient).epsilon(1e-12));
        CHECK(two.exponent == doctest::Approx(one.exponent).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("frac_integral_numeric examples") {
  const QuadratureSpec spec;
  const auto g = sum_of({atom(-0.5, 0, Side::Plus)});
  CHECK(frac_integral_numeric(g, 0.5, IntervalSide::Lower, 0.0, 0.5, spec) ==
        doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-8));
  const auto one = sum_of({atom(0.0, 0, Side::Plus, 1.0)});
  CHECK(frac_integral_numeric(one, 0.5, IntervalSide::Lower, 0.0, 1.0, spec) ==
        doctest::Approx(2.0 / std::sqrt(std::numbers::pi)).epsilon(1e-10));
  // Gamma(1.5)/Gamma(1.8) = 0.9515164; the 6-digit rounding 0.951518 is off by 1.6e-6.
  const auto h = sum_of({atom(0.5, 0, Side::Plus)});
  CHECK(std::abs(frac_integral_numeric(h, 0.3, IntervalSide::Lower, 0.0, 1.0, spec) -
                 gamma50(1.5) / gamma50(1.8)) < 1e-6);
  CHECK_THROWS_AS(frac_integral_numeric(g, 1.2, IntervalSide::Lower, 0.0, 0.5, spec), DomainError);
  CHECK_THROWS_AS(frac_integral_numeric(g, 0.5, IntervalSide::Lower, 1.0, 0.5, spec), DomainError);
  // beta + eta <= 0 with the atom anchored at x on the integration side.
  const auto bad = sum_of({atom(-0.5, 1.0, Side::Minus)});
  CHECK_THROWS_AS(frac_integral_numeric(bad, 0.4, IntervalSide::Lower, 0.0, 1.0, spec),
                  DomainError);
}

TEST_CASE("frac_integral_numeric agrees with the closed form") {
  const QuadratureSpec spec;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double eta : {0.1, 0.25, 0.4}) {
    for (double beta : {-0.5, 0.5}) {
      for (Side s : {Side::Plus, Side::Minus}) {
        const auto a = atom(beta, 0.2, s, kInf, 1.3);
        const auto exact = frac_integral_atom(a, eta);
        const auto g = sum_of({a});
        for (int i = 0; i < 20; ++i) {
          const double d = 0.01 + 2.0 * u(rng);
          const double x = 0.2 + sign_of(s) * d;
          const auto is = s == Side::Plus ? IntervalSide::Lower : IntervalSide::Upper;
          const double v = frac_integral_numeric(g, eta, is, 0.2, x, spec);
          CHECK(v == doctest::Approx(exact.eval(x)).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("frac_integral_numeric on grid functions") {
  const QuadratureSpec spec;
  // Constant grid function on (0, 1): I_{0+}^a 1 (x) = x^a / Gamma(a + 1).
  const GridFunction c(0.0, 1.0, std::vector<double>(16, 1.0));
  for (double x : {0.1, 0.5, 0.99}) {
    CHECK(frac_integral_numeric(c, 0.3, IntervalSide::Lower, 0.0, x, spec) ==
          doctest::Approx(std::pow(x, 0.3) / std::tgamma(1.3)).epsilon(1e-9));
  }
}

TEST_CASE("marchaud_numeric examples") {
  const QuadratureSpec spec;
  // Constant 1 on R as two beta = 0 atoms.
  const auto one = sum_of({atom(0.0, -1, Side::Plus), atom(0.0, -1, Side::Minus)});
  CHECK(std::abs(marchaud_numeric(one, 0.3, MarchaudSide::TwoSided, 0.0, spec)) < 1e-12);
  CHECK(std::abs(marchaud_numeric(one, 0.3, MarchaudSide::Plus, 0.0, spec)) < 1e-12);

  const auto h = sum_of({atom(0.5, 0, Side::Plus)});
  CHECK(std::abs(marchaud_numeric(h, 0.25, MarchaudSide::Plus, 1.0, spec) - 0.977742) < 1e-5);

  // Truncated (2 - x)^{-1/2} on (1, 2), right-looking derivative at 1.5 against a
  // dense midpoint oracle after singularity-removing substitutions.
  const double eta = 0.25;
  const auto trunc = sum_of({atom(-0.5, 2.0, Side::Minus, 1.0)});
  const double x = 1.5;
  const double gx = 1.0 / std::sqrt(0.5);
  auto g = [](double y) { return (y > 1.0 && y < 2.0) ? 1.0 / std::sqrt(2.0 - y) : 0.0; };
  auto integrand = [&](double u) { return (gx - g(x + u)) * std::pow(u, -1.0 - eta); };
  const int k = 8;  // u = 0.25 s^k removes u^{-eta}
  const double near = midpoint(
      [&](double s) {
        const double u = 0.25 * std::pow(s, k);
        return integrand(u) * 0.25 * k * std::pow(s, k - 1);
      },
      1000000);
  const double far = midpoint(
      [&](double s) {  // u = 0.5 - 0.25 s^2 removes (0.5 - u)^{-1/2}
        const double w = 0.5 * s;
        const double u = 0.5 - w * w;
        return integrand(u) * 2.0 * w * 0.5;
      },
      1000000);
  const double tail = gx * std::pow(0.5, -eta) / eta;
  const double oracle = eta / std::tgamma(1.0 - eta) * (near + far + tail);
  CHECK(marchaud_numeric(trunc, eta, MarchaudSide::Minus, x, spec) ==
        doctest::Approx(oracle).epsilon(1e-4));

  const auto sing = sum_of({atom(-0.5, 0.0, Side::Plus)});
  CHECK_THROWS_AS(marchaud_numeric(sing, 0.25, MarchaudSide::Plus, 0.0, spec), SingularityError);
}

TEST_CASE("marchaud_numeric agrees with marchaud_atom") {
  const QuadratureSpec spec;
  for (double eta : {0.1, 0.25, 0.4}) {
    for (double beta : {0.0, 0.5}) {
      for (Side s : {Side::Plus, Side::Minus}) {
        const auto a = atom(beta, -0.4, s, kInf, 0.8);
        const auto exact = marchaud_atom(a, eta, s);
        const auto ms = s == Side::Plus ? MarchaudSide::Plus : MarchaudSide::Minus;
        for (double d : {0.05, 0.3, 1.0, 2.5}) {
          const double x = -0.4 + sign_of(s) * d;
          CHECK(marchaud_numeric(sum_of({a}), eta, ms, x, spec) ==
                doctest::Approx(exact.eval(x)).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("piecewise-linear closed forms against quadrature") {
  const QuadratureSpec spec;
  // Hat on (0, 2) peaking at 1: nodes 0, 1, 2 with zero outer half cells.
  const GridFunction hat(-0.5, 2.5, {0.0, 1.0, 0.0});
  AtomSum g;
  g.smooth_part = hat;
  const auto segs = hat.segments();
  for (double x : {-0.3, 0.2, 0.9, 1.4, 2.2, 3.0}) {
    for (Side s : {Side::Plus, Side::Minus}) {
      const int dir = sign_of(s);
      auto f = [&](double u) { return (hat.eval(x) - hat.eval(x - dir * u)) * std::pow(u, -1.25); };
      // Kinks of the hat as seen from x.
      double q = 0.0;
      std::vector<double> br{0.0, 6.0};
      for (double b : {0.0, 1.0, 2.0}) {
        const double u = dir * (x - b);
        if (u > 0.0 && u < 6.0) br.push_back(u);
      }
      std::sort(br.begin(), br.end());
      for (std::size_t i = 0; i + 1 < br.size(); ++i) {
        q += integrate_graded(f, br[i], br[i + 1], true, true, spec);
      }
      const double cg = std::tgamma(0.75);
      const double numeric = 0.25 / cg * q + hat.eval(x) * std::pow(6.0, -0.25) / cg;
      CHECK(marchaud_piecewise_linear(segs, 0.25, s, x) == doctest::Approx(numeric).epsilon(1e-9));
    }
  }
  // Whole-line fractional integral of order 1 is the running integral.
  CHECK(frac_integral_piecewise_linear(segs, 1.0, Side::Plus, 1.0) ==
        doctest::Approx(hat.cumulative(1.0)).epsilon(1e-13));
  CHECK(frac_integral_piecewise_linear(segs, 1.0, Side::Minus, 1.0) ==
        doctest::Approx(hat.mass() - hat.cumulative(1.0)).epsilon(1e-13));
}

TEST_CASE("linearity and translation invariance") {
  const QuadratureSpec spec;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a1 = atom(0.5, u(rng), Side::Plus, 1.0 + std::abs(u(rng)), 1.0);
    const auto a2 = atom(-0.5, u(rng), Side::Minus, 1.0 + std::abs(u(rng)), 1.0);
    const double c1 = u(rng);
    const double c2 = u(rng);
    auto scaled = [](PowerAtom a, double c) {
      a.coefficient *= c;
      return a;
    };
    const double x = 3.0 * u(rng);
    const auto combo = sum_of({scaled(a1, c1), scaled(a2, c2)});
    const double lhs = marchaud_numeric(combo, 0.3, MarchaudSide::TwoSided, x, spec);
    const double rhs = c1 * marchaud_numeric(sum_of({a1}), 0.3, MarchaudSide::TwoSided, x, spec) +
                       c2 * marchaud_numeric(sum_of({a2}), 0.3, MarchaudSide::TwoSided, x, spec);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));

    const double lo = -3.0;
    const double il = frac_integral_numeric(combo, 0.3, IntervalSide::Lower, lo, x, spec);
    const double ir = c1 * frac_integral_numeric(sum_of({a1}), 0.3, IntervalSide::Lower, lo, x, spec) +
                      c2 * frac_integral_numeric(sum_of({a2}), 0.3, IntervalSide::Lower, lo, x, spec);
    INFO("x=", x, " a1=", a1.anchor, "/", a1.width, " a2=", a2.anchor, "/", a2.width);
    CHECK(std::abs(il - ir) <= 1e-12 * (1.0 + std::abs(il)));

    const double h = 2.0 * u(rng);
    const double shifted =
        marchaud_numeric(combo.shifted(h), 0.3, MarchaudSide::TwoSided, x + h, spec);
    CHECK(std::abs(shifted - lhs) <= 1e-9 * (1.0 + std::abs(lhs)));
  }
}

TEST_CASE("two-sided Marchaud derivative has zero total mass") {
  const QuadratureSpec spec;
  const auto g = sum_of({atom(0.5, 0.0, Side::Plus, 1.0), atom(-0.5, 0.5, Side::Minus, 0.5, 0.3)});
  const double eta = 0.25;
  const double L = 400.0;  // symmetric about the support so the leading tails cancel
  auto m = [&](double x) { return marchaud_numeric(g, eta, MarchaudSide::TwoSided, x, spec); };
  QuadratureSpec outer = spec;
  outer.grading_levels = 40;
  std::vector<double> pts{0.5 - L, -4.0, -1.0, 0.0, 0.5, 1.0, 2.0, 5.0, 0.5 + L};
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    total += integrate_graded(m, pts[i], pts[i + 1], true, true, outer);
  }
  CHECK(std::abs(total) < 1e-4);
}

TEST_CASE("singularity_exponent_fit") {
  std::vector<std::pair<double, double>> s;
  for (int k = 3; k <= 12; ++k) {
    const double d = std::ldexp(1.0, -k);
    s.emplace_back(d, std::pow(d, -0.75));
  }
  const auto f = singularity_exponent_fit(s);
  CHECK(std::abs(f.exponent + 0.75) < 1e-10);
  CHECK(f.r2 == doctest::Approx(1.0));

  s.clear();
  for (int k = 0; k < 10; ++k) {
    const double d = std::pow(10.0, -0.3 * k);
    s.emplace_back(d, 3.0 / std::sqrt(d));
  }
  const auto g = singularity_exponent_fit(s);
  CHECK(g.exponent == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(g.amplitude == doctest::Approx(3.0).epsilon(1e-12));

  s[0].first = 0.0;
  CHECK_THROWS_AS(singularity_exponent_fit(s), DomainError);
  s.resize(5);
  CHECK_THROWS_AS(singularity_exponent_fit(s), InsufficientDataError);
}

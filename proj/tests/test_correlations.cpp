#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "fracsus/correlations.hpp"
#include "fracsus/errors.hpp"

using namespace fracsus;

namespace {

const UnimodalFamily& chebyshev_family() {
  static const UnimodalFamily fam = UnimodalFamily::quadratic(Real50(2));
  return fam;
}

const UlamOperator& ulam4096() {
  static const UlamOperator op = build_ulam(chebyshev_family(), 0.0, 4096);
  return op;
}

// Leading spikes of the t0 = 2 density, 1/(2 pi) u^{-1/2} at both endpoints.
AtomSum chebyshev_atoms() {
  const double c = 1.0 / (2.0 * std::numbers::pi);
  AtomSum psi;
  psi.atoms = {PowerAtom{c, -0.5, 2.0, Side::Minus, 4.0}, PowerAtom{c, -0.5, -2.0, Side::Plus, 4.0}};
  return psi;
}

CoefficientSequence synthetic(int J, double c, double theta) {
  CoefficientSequence s;
  for (int j = 0; j <= J; ++j) s.values.push_back(c * std::pow(theta, j));
  s.methods.assign(s.values.size(), CorrelationMethod::Quadrature);
  s.ulam_check.assign(s.values.size(), std::nullopt);
  return s;
}

}  // namespace

TEST_CASE("observable descriptors") {
  CHECK(Observable::parse("x^2")(3.0) == doctest::Approx(9.0));
  CHECK(Observable::parse("poly:1,0,2")(2.0) == doctest::Approx(9.0));
  CHECK(Observable::parse("const:1.5")(-7.0) == 1.5);
  CHECK(Observable::parse("cos:3")(0.2) == doctest::Approx(std::cos(0.6)));
  CHECK(Observable::parse("cos:3,0.5")(0.2) == doctest::Approx(std::cos(1.1)));
  CHECK(Observable::parse("cos3x")(0.2) == doctest::Approx(std::cos(0.6)));
  const auto ind = Observable::parse("ind:0,2");
  CHECK(ind(1.0) == 1.0);
  CHECK(ind(-0.5) == 0.0);
  CHECK(ind.discontinuities().size() == 2);
  CHECK_THROWS_AS(Observable::parse("sin:3"), ValidationError);
  CHECK_THROWS_AS(Observable::parse("ind:2,1"), ValidationError);
  CHECK_THROWS_AS(Observable::parse("poly:1,a"), ValidationError);
}

TEST_CASE("j = 0 closed forms") {
  const auto& fam = chebyshev_family();
  QuadratureSpec spec;
  AtomSum spike;
  spike.atoms = {PowerAtom{1.0, -0.5, 2.0, Side::Minus, 1.0}};
  // int_1^2 (2 - x)^{-1/2} dx = 2
  const auto ind = Observable::indicator(0.0, 2.0);
  CHECK(correlation_coefficient(fam, 0.0, ind, spike, 0, CorrelationMethod::Quadrature, spec) ==
        doctest::Approx(2.0).epsilon(1e-9));
  CHECK(correlation_coefficient(fam, 0.0, ind, spike, 0, CorrelationMethod::Ulam, spec, &ulam4096()) ==
        doctest::Approx(2.0).epsilon(1e-9));

  // Mean zero by construction: two opposite spikes of equal mass.
  AtomSum zero;
  zero.atoms = {PowerAtom{1.0, -0.5, 0.3, Side::Plus, 0.5}, PowerAtom{-1.0, -0.5, -0.7, Side::Minus, 0.5}};
  CHECK(std::abs(correlation_coefficient(fam, 0.0, Observable::constant(1.0), zero, 0,
                                         CorrelationMethod::Quadrature, spec)) < 1e-8);
}

TEST_CASE("quadrature and Ulam agree at j = 3") {
  QuadratureSpec spec;
  const auto phi = Observable::polynomial({0.0, 0.0, 1.0});
  const double q = correlation_coefficient(chebyshev_family(), 0.0, phi, chebyshev_atoms(), 3,
                                           CorrelationMethod::Quadrature, spec);
  const double u = correlation_coefficient(chebyshev_family(), 0.0, phi, chebyshev_atoms(), 3,
                                           CorrelationMethod::Ulam, spec, &ulam4096());
  CHECK(std::abs(q - u) < 1e-3 * std::abs(q));
  CHECK_THROWS_AS(correlation_coefficient(chebyshev_family(), 0.0, phi, chebyshev_atoms(), 11,
                                          CorrelationMethod::Quadrature, spec),
                  MethodError);
  CHECK_THROWS_AS(correlation_coefficient(chebyshev_family(), 0.0, phi, chebyshev_atoms(), 3,
                                          CorrelationMethod::Ulam, spec),
                  MethodError);
}

TEST_CASE("invariance of the exact density") {
  const auto& fam = chebyshev_family();
  const auto model = chebyshev_model(fam, 4096);
  AtomSum rho;
  rho.atoms = model.spikes.atoms;
  rho.smooth_part = model.smooth;
  QuadratureSpec spec;
  // int cos(3x) rho dx = J_0(6)
  const double expected = std::cyl_bessel_j(0.0, 6.0);
  for (int j = 0; j <= 6; ++j) {
    const double a = correlation_coefficient(fam, 0.0, Observable::cosine(3.0), rho, j,
                                             CorrelationMethod::Quadrature, spec);
    CHECK(std::abs(a - expected) < 1e-6);
  }
}

TEST_CASE("Ulam route conserves the Ulam invariant vector") {
  const auto inv = invariant_density_ulam(ulam4096(), 100000, 1e-14);
  const auto table = koopman_table(chebyshev_family(), 0.0, ulam4096(), Observable::cosine(3.0), 20, 0);
  // Raw cell masses of the fixed vector (not the interpolant's bin integrals).
  std::vector<double> masses(inv.density.values());
  for (double& m : masses) m *= inv.density.cell_width();
  const auto seq = binned_sequence(table, masses);
  for (int j = 1; j <= 20; ++j) CHECK(std::abs(seq.values[j] - seq.values[0]) < 1e-6);
}

TEST_CASE("sequence for a mean-zero source against a constant") {
  AtomSum zero;
  zero.atoms = {PowerAtom{1.0, -0.5, 0.3, Side::Plus, 0.5}, PowerAtom{-1.0, -0.5, -0.7, Side::Minus, 0.5}};
  const auto seq = correlation_sequence(chebyshev_family(), 0.0, Observable::constant(1.0), zero, 14,
                                        QuadratureSpec{}, ulam4096(), 4);
  REQUIRE(seq.J() == 14);
  for (int j = 0; j <= 14; ++j) CHECK(std::abs(seq.values[j]) < 1e-8);
  CHECK(seq.methods[4] == CorrelationMethod::Quadrature);
  CHECK(seq.methods[5] == CorrelationMethod::Ulam);
  CHECK(seq.ulam_check[2].has_value());
  CHECK_FALSE(seq.ulam_check[7].has_value());
  CHECK_THROWS_AS(correlation_sequence(chebyshev_family(), 0.0, Observable::constant(1.0), zero, 3,
                                       QuadratureSpec{}, ulam4096()),
                  DomainError);
}

TEST_CASE("bilinearity of binned sequences") {
  const auto& op = ulam4096();
  const auto ta = koopman_table(chebyshev_family(), 0.0, op, Observable::cosine(3.0), 12, 4);
  const auto tb = koopman_table(chebyshev_family(), 0.0, op, Observable::polynomial({0, 0, 1}), 12, 4);
  const auto tab = koopman_table(chebyshev_family(), 0.0, op, Observable::polynomial({0, 0, 1}), 12, 4);
  const auto m1 = bin_masses(chebyshev_atoms(), op.grid);
  std::vector<double> m2(m1.size());
  for (std::size_t i = 0; i < m2.size(); ++i) m2[i] = std::sin(0.01 * static_cast<double>(i)) * 1e-3;
  std::vector<double> m12(m1.size());
  for (std::size_t i = 0; i < m12.size(); ++i) m12[i] = 2.0 * m1[i] - 3.0 * m2[i];
  const auto s1 = binned_sequence(ta, m1);
  const auto s2 = binned_sequence(ta, m2);
  const auto s12 = binned_sequence(ta, m12);
  for (int j = 0; j <= 12; ++j) {
    CHECK(std::abs(s12.values[j] - (2.0 * s1.values[j] - 3.0 * s2.values[j])) < 1e-12);
  }
  // Tables for the same observable are reproducible bit for bit, serial or parallel.
  const auto ts = koopman_table(chebyshev_family(), 0.0, op, Observable::polynomial({0, 0, 1}), 12, 4,
                                Exec::Serial);
  CHECK(ts.exact == tb.exact);
  CHECK(ts.ulam == tab.ulam);
}

TEST_CASE("decay fits on synthetic sequences") {
  auto s = synthetic(40, 2.0, 0.7);
  const auto fit = decay_fit(s);
  CHECK(fit.theta == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(fit.C == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.j_lo == 5);
  CHECK(fit.j_hi == 38);

  const auto alt = decay_fit(synthetic(40, 1.0, -0.5), 5, 35);
  CHECK(alt.theta == doctest::Approx(0.5).epsilon(1e-12));

  // Everything past j = 8 sits below the noise floor.
  auto short_seq = synthetic(40, 1.0, 0.5);
  for (int j = 9; j <= 40; ++j) short_seq.values[j] = 1e-20;
  CHECK_THROWS_AS(decay_fit(short_seq, 5, 35), InsufficientDataError);
}

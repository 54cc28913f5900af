#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "fracsus/density.hpp"
#include "fracsus/errors.hpp"

using namespace fracsus;

namespace {

const UnimodalFamily& chebyshev_family() {
  static const UnimodalFamily fam = UnimodalFamily::quadratic(Real50(2));
  return fam;
}

const InvariantDensity& chebyshev_ulam() {
  static const InvariantDensity d = [] {
    const auto op = build_ulam(chebyshev_family(), 0.0, 4096);
    return invariant_density_ulam(op);
  }();
  return d;
}

Real50 mt_parameter() { return bisect_preperiodic_parameter(Real50("1.5"), Real50("1.6"), 3, 1); }

}  // namespace

TEST_CASE("bin grid") {
  BinGrid g{-2.0, 2.0, 8};
  CHECK(g.width() == 0.5);
  CHECK(g.edge(0) == -2.0);
  CHECK(g.edge(8) == 2.0);
  CHECK(g.locate(-5.0) == 0);
  CHECK(g.locate(0.1) == 4);
  CHECK(g.locate(7.0) == 7);
  CHECK(g.center(3) == doctest::Approx(-0.25));
}

TEST_CASE("Ulam matrix is row-stochastic, parallel build equals serial") {
  const auto& fam = chebyshev_family();
  const auto s = build_ulam(fam, 0.0, 512, Exec::Serial);
  const auto p = build_ulam(fam, 0.0, 512, Exec::Parallel);
  CHECK(s.forward.val == p.forward.val);
  CHECK(s.max_row_defect() < 1e-12);
  const auto mt = UnimodalFamily::quadratic(mt_parameter());
  CHECK(build_ulam(mt, 0.01, 777).max_row_defect() < 1e-12);
  CHECK_THROWS_AS(build_ulam(fam, 0.0, 4), DomainError);
  // Critical value above the interval: mass escapes.
  const auto escape = UnimodalFamily::quadratic(Real50("2.2"));
  CHECK_THROWS_AS(build_ulam(escape, 0.0, 256), DomainError);
}

TEST_CASE("Ulam entries equal preimage lengths") {
  // Oracle: measure of {x in cell i : f(x) in cell j} by dense sampling.
  const auto& fam = chebyshev_family();
  const auto op = build_ulam(fam, 0.0, 32, Exec::Serial);
  const int samples = 20000;
  for (std::size_t i : {0ul, 7ul, 15ul, 16ul, 31ul}) {
    std::vector<double> hist(32, 0.0);
    for (int s = 0; s < samples; ++s) {
      const double x = op.grid.edge(i) + (s + 0.5) / samples * op.grid.width();
      hist[op.grid.locate(fam.eval(0.0, x))] += 1.0 / samples;
    }
    for (std::size_t k = op.forward.row_ptr[i]; k < op.forward.row_ptr[i + 1]; ++k) {
      CHECK(op.forward.val[k] == doctest::Approx(hist[op.forward.col[k]]).epsilon(2e-3));
    }
  }
}

TEST_CASE("density action: serial scatter equals parallel gather") {
  const auto op = build_ulam(chebyshev_family(), 0.0, 1024);
  std::vector<double> m(1024), a(1024), b(1024);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 1.0 + std::sin(0.1 * i);
  op.density_action(m, a, Exec::Serial);
  op.density_action(m, b, Exec::Parallel);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("Chebyshev ground truth") {
  const auto& d = chebyshev_ulam().density;
  CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-12));
  const double h = d.cell_width();
  double l1 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double a = d.lo() + i * h;
    const double b = a + h;
    if (a < -1.96 || b > 1.96) continue;
    l1 += std::abs(d.values()[i] * h - (chebyshev_cumulative(b) - chebyshev_cumulative(a)));
  }
  CHECK(l1 < 0.02);
  CHECK(std::abs(d.eval(0.0) - 1.0 / (2.0 * std::numbers::pi)) < 5e-3);
  CHECK(chebyshev_density(0.0) == doctest::Approx(1.0 / (2.0 * std::numbers::pi)));
  CHECK(chebyshev_density(std::sqrt(2.0)) == doctest::Approx(1.0 / (std::numbers::pi * std::sqrt(2.0))));
}

TEST_CASE("transfer_pointwise fixes the Chebyshev density") {
  const auto& fam = chebyshev_family();
  for (double x : {-1.9, -1.0, 0.0, 0.3, 1.7}) {
    CHECK(transfer_pointwise(fam, 0.0, chebyshev_density, x) ==
          doctest::Approx(chebyshev_density(x)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(transfer_pointwise(fam, 0.0, chebyshev_density, 2.0), SingularityError);
  CHECK_THROWS_AS(transfer_pointwise(fam, 0.0, chebyshev_density, 2.5), DomainError);
}

TEST_CASE("power iteration reports non-convergence") {
  const auto op = build_ulam(chebyshev_family(), 0.0, 256);
  try {
    (void)invariant_density_ulam(op, 1, 1e-300);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_residual() >= 0.0);
  }
}

TEST_CASE("spike decomposition at the Chebyshev parameter") {
  const auto model = spike_decomposition(chebyshev_family(), 0.0, 2, chebyshev_ulam().density);
  REQUIRE(model.per_k.size() == 2);
  const auto& k1 = model.per_k[0];
  const auto& k2 = model.per_k[1];
  CHECK(k1.anchor == doctest::Approx(2.0));
  CHECK(k1.side == Side::Minus);
  CHECK(k2.anchor == doctest::Approx(-2.0));
  CHECK(k2.side == Side::Plus);
  const double c = 1.0 / (2.0 * std::numbers::pi);
  CHECK(std::abs(k1.c0 / c - 1.0) < 0.10);
  CHECK(std::abs(k2.c0 / k1.c0 - 0.5) < 0.5 * 0.15);
  CHECK(std::abs(model.mass() - 1.0) < 1e-6);
  CHECK(model.spike_law_constant() >= std::abs(k1.c0));
}

TEST_CASE("spike law at the Misiurewicz-Thurston parameter") {
  const auto fam = UnimodalFamily::quadratic(mt_parameter());
  const auto op = build_ulam(fam, 0.0, 4096);
  const auto dens = invariant_density_ulam(op);
  const auto model = spike_decomposition(fam, 0.0, 6, dens.density);
  REQUIRE(model.mt.has_value());
  CHECK(model.mt->preperiod == 3);
  CHECK(model.mt->period == 1);
  CHECK(std::abs(spike_law_slope(model, 4) - 1.0) < 0.15);
  for (const auto& r : model.per_k) {
    CHECK(std::abs(r.c0) * std::sqrt(r.abs_derivative) <= model.spike_law_constant() * (1 + 1e-12));
  }
  CHECK_THROWS_AS(spike_law_slope(model, 1), InsufficientDataError);
}

TEST_CASE("closed-form Chebyshev model") {
  const auto fam = UnimodalFamily::quadratic(Real50(2));
  const auto model = chebyshev_model(fam, 1024);
  CHECK(std::abs(model.mass() - 1.0) < 1e-6);
  for (double x : {-1.9, -0.7, 0.0, 0.3, 1.5, 1.99}) {
    CHECK(model.eval(x) == doctest::Approx(chebyshev_density(x)).epsilon(1e-5));
    CHECK(model.eval(x) == doctest::Approx(model.eval(-x)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(chebyshev_model(UnimodalFamily::quadratic(Real50("1.9")), 1024), DomainError);
}

TEST_CASE("bin masses of an atom sum") {
  AtomSum g;
  g.atoms.push_back(PowerAtom{1.0, -0.5, 0.0, Side::Plus, 1.0});
  const auto m = bin_masses(g, BinGrid{0.0, 1.0, 4});
  double total = 0.0;
  for (double v : m) total += v;
  CHECK(total == doctest::Approx(2.0));
  CHECK(m[0] == doctest::Approx(1.0));
}

TEST_CASE("Marchaud derivative of the density model") {
  const auto model = spike_decomposition(chebyshev_family(), 0.0, 2, chebyshev_ulam().density);
  CHECK_THROWS_AS(marchaud_of_density(model, 0.6, 0.0), DomainError);
  // The two-sided derivative vanishes at eta = 0 and maps even densities to odd ones.
  CHECK(std::abs(marchaud_of_density(model, 0.0, 0.3)) < 1e-12);
  const double right = marchaud_of_density(model, 0.25, 1.0);
  const double left = marchaud_of_density(model, 0.25, -1.0);
  CHECK(std::abs(right) > 1e-3);
  CHECK(left == doctest::Approx(-right).epsilon(0.05));
}

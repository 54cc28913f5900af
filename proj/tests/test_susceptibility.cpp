#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fracsus/errors.hpp"
#include "fracsus/susceptibility.hpp"

using namespace fracsus;

namespace {

const UnimodalFamily& chebyshev_family() {
  static const UnimodalFamily fam = UnimodalFamily::quadratic(Real50(2));
  return fam;
}

const UnimodalFamily& mt_family() {
  static const UnimodalFamily fam =
      UnimodalFamily::quadratic(bisect_preperiodic_parameter(Real50("1.5"), Real50("1.6"), 3, 1));
  return fam;
}

// Exact density at t0 = 2 on a coarse grid.
SusceptibilityEngine& chebyshev_engine() {
  static SusceptibilityEngine eng(chebyshev_family(), chebyshev_model(chebyshev_family(), 1024),
                                  std::make_shared<UlamOperator>(build_ulam(chebyshev_family(), 0.0, 1024)));
  return eng;
}

// Production pipeline at the Misiurewicz-Thurston parameter.
SusceptibilityEngine& mt_engine() {
  static SusceptibilityEngine eng = [] {
    auto op = std::make_shared<UlamOperator>(build_ulam(mt_family(), 0.0, 2048));
    const auto inv = invariant_density_ulam(*op);
    return SusceptibilityEngine(mt_family(), spike_decomposition(mt_family(), 0.0, 4, inv.density), op);
  }();
  return eng;
}

CoefficientSequence geometric(int J, double c, double theta) {
  CoefficientSequence s;
  for (int j = 0; j <= J; ++j) s.values.push_back(c * std::pow(theta, j));
  s.methods.assign(s.values.size(), CorrelationMethod::Ulam);
  s.ulam_check.assign(s.values.size(), std::nullopt);
  return s;
}

double l1(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

double max_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

TEST_CASE("request validation") {
  const auto& w = chebyshev_family().window();
  SusceptibilityRequest req;
  req.eta = 0.6;
  CHECK_THROWS_AS(req.validate(w), ValidationError);
  req.eta = 0.5;
  CHECK_THROWS_AS(req.validate(w), ValidationError);
  req.eta = 0.25;
  req.J = 3;
  CHECK_THROWS_AS(req.validate(w), ValidationError);
  req.J = 40;
  req.kind = SusceptibilityKind::Semifreddo;
  req.omega = OmegaSet{{{-0.01, 0.02}, {0.01, 0.03}}};
  CHECK_THROWS_AS(req.validate(w), ValidationError);
  req.omega = OmegaSet{{{-0.01, 0.2}}};
  CHECK_THROWS_AS(req.validate(w), ValidationError);
  req.omega = OmegaSet{{{-0.04, -0.01}, {0.0, 0.03}}};
  CHECK_NOTHROW(req.validate(w));
  CHECK(parse_kind("frozen") == SusceptibilityKind::Frozen);
  CHECK_THROWS_AS(parse_kind("thawed"), ValidationError);
}

TEST_CASE("series evaluation") {
  const auto half = geometric(60, 1.0, 0.5);
  const auto fit = decay_fit(half);
  const auto ev = evaluate_series(half, &fit, {1.0, 0.0});
  CHECK(ev.value.real() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_FALSE(ev.divergent_bound);
  CHECK(ev.tail_bound < 1e-17);

  const auto at0 = evaluate_series(half, &fit, {0.0, 0.0});
  CHECK(at0.value.real() == 1.0);

  const auto ones = geometric(40, 1.0, 1.0);
  const auto fit1 = decay_fit(ones);
  const auto ev1 = evaluate_series(ones, &fit1, {1.0, 0.0});
  CHECK(ev1.divergent_bound);
  CHECK(std::isinf(ev1.tail_bound));

  // Complex z: a_j = 0.5^j at z = i sums to 1 / (1 - i/2).
  const auto evi = evaluate_series(half, &fit, {0.0, 1.0});
  const auto expected = 1.0 / (1.0 - std::complex<double>(0.0, 0.5));
  CHECK(std::abs(evi.value - expected) < 1e-15);
}

TEST_CASE("radius estimates") {
  const auto third = geometric(40, 1.0, 1.0 / 3.0);
  const auto r = radius_estimate(third);
  CHECK(r.radius == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(r.ratio_test == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(r.method == "root-test");

  // Root test and decay fit agree on geometric data with a prefactor.
  const auto g = geometric(40, 5.0, 0.8);
  const auto rg = radius_estimate(g);
  CHECK(std::abs(rg.radius * decay_fit(g).theta - 1.0) < 0.1);

  auto zeros = geometric(40, 0.0, 0.5);
  CHECK(std::isinf(radius_estimate(zeros).radius));

  auto few = geometric(40, 1.0, 0.5);
  for (int j = 10; j <= 40; ++j) few.values[j] = 0.0;
  CHECK_THROWS_AS(radius_estimate(few), InsufficientDataError);
}

TEST_CASE("clamped tails against direct quadrature") {
  const ParameterWindow w{-0.03, 0.05};
  boost::math::quadrature::exp_sinh<double> outward;
  for (double eta : {0.1, 0.25, 0.4}) {
    // Constant curve beyond the window: G = 1.3 for t > t_max, G = -0.4 for t < t_min, G(0) = 0.2.
    const double right = outward.integrate([&](double u) { return std::pow(w.t_max + u, -1.0 - eta); });
    const double left = outward.integrate([&](double u) { return std::pow(-w.t_min + u, -1.0 - eta); });
    const double direct = (1.3 - 0.2) * right - (-0.4 - 0.2) * left;
    CHECK(clamped_tail(-0.4, 0.2, 1.3, w, eta) == doctest::Approx(direct).epsilon(1e-10));
  }
  CHECK_THROWS_AS(clamped_tail(0, 0, 0, w, 0.0), DomainError);
}

TEST_CASE("frozen kernel routes agree") {
  const auto& fam = chebyshev_family();
  // Shift identity against the direct transfer operator, any density model.
  const auto cheb = chebyshev_model(fam, 1024);
  for (double x : {0.5, -1.1, 1.37}) {
    const double shift = frozen_kernel(fam, cheb, 0.25, x, {}, KernelRoute::Shift);
    const double direct = frozen_kernel(fam, cheb, 0.25, x, {}, KernelRoute::Direct);
    const double invariant = frozen_kernel(fam, cheb, 0.25, x, {}, KernelRoute::Invariant);
    CHECK(std::abs(shift - direct) < 1e-5 * std::max(1.0, std::abs(direct)));
    // The closed-form model is invariant up to its grid remainder.
    CHECK(std::abs(invariant - direct) < 1e-3 * std::max(1.0, std::abs(direct)));
  }
  CHECK(frozen_kernel(fam, cheb, 0.0, 0.5) == 0.0);
  CHECK_THROWS_AS(frozen_kernel(fam, cheb, 0.5, 0.5), DomainError);
  // x - t_max hits the spike at -2.
  CHECK_THROWS_AS(frozen_kernel(fam, cheb, 0.25, -1.95), SingularityError);
}

TEST_CASE("parameter-independent family has no frozen kernel") {
  const auto flat = UnimodalFamily::generalized(Real50(2), ParameterWindow{}, {0.0});
  const auto cheb = chebyshev_model(chebyshev_family(), 1024);
  for (double x : {-1.3, 0.2, 0.9}) CHECK(frozen_kernel(flat, cheb, 0.25, x) == 0.0);
  auto op = std::make_shared<UlamOperator>(build_ulam(flat, 0.0, 256));
  SusceptibilityEngine eng(flat, cheb, op);
  CHECK(max_abs(eng.frozen_masses(0.25, TGridSpec{}, true)) == 0.0);
}

TEST_CASE("exactness sentinels") {
  auto& eng = mt_engine();
  SusceptibilityRequest req;
  req.J = 20;
  req.phi = Observable::constant(1.0);

  for (double eta : {0.1, 0.25, 0.4}) {
    req.eta = eta;
    const double scale = l1(eng.frozen_masses(eta, req.tgrid, true));
    REQUIRE(scale > 0.0);
    req.kind = SusceptibilityKind::Frozen;
    CHECK(max_abs(eng.coefficients(req).values) < 1e-6 * scale);
  }

  req.eta = 0.25;
  req.kind = SusceptibilityKind::Semifreddo;
  req.omega = OmegaSet::full(mt_family().window());
  const double scale = l1(eng.frozen_masses(0.25, req.tgrid, true));
  CHECK(max_abs(eng.coefficients(req).values) < 1e-6 * scale);

  req.phi = Observable::cosine(3.0);
  req.omega = OmegaSet{};
  for (double v : eng.coefficients(req).values) CHECK(v == 0.0);

  req.kind = SusceptibilityKind::Response;
  req.eta = 0.0;
  for (double v : eng.coefficients(req).values) CHECK(v == 0.0);
}

TEST_CASE("semifreddo over the full window matches frozen without tails") {
  auto& eng = mt_engine();
  const double eta = 0.25;
  SusceptibilityRequest req;
  req.kind = SusceptibilityKind::Semifreddo;
  req.eta = eta;
  req.J = 16;
  req.phi = Observable::cosine(3.0);
  req.omega = OmegaSet::full(mt_family().window());
  const auto semi = eng.coefficients(req);
  const auto frozen = binned_sequence(eng.koopman(req.phi, req.J), eng.frozen_masses(eta, req.tgrid, false));
  const double scale = max_abs(frozen.values);
  for (int j = 0; j <= req.J; ++j) CHECK(std::abs(semi.values[j] - frozen.values[j]) < 1e-3 * scale);
}

TEST_CASE("semifreddo is additive over disjoint pieces of omega") {
  auto& eng = mt_engine();
  SusceptibilityRequest req;
  req.kind = SusceptibilityKind::Semifreddo;
  req.eta = 0.25;
  req.J = 8;
  req.phi = Observable::cosine(3.0);
  req.omega = OmegaSet{{{-0.05, 0.03}}};
  const auto whole = eng.coefficients(req);
  req.omega = OmegaSet{{{-0.05, -0.02}}};
  const auto a = eng.coefficients(req);
  req.omega = OmegaSet{{{-0.02, 0.03}}};
  const auto b = eng.coefficients(req);
  req.omega = OmegaSet{{{-0.05, -0.02}, {-0.02, 0.03}}};
  const auto both = eng.coefficients(req);
  const double scale = max_abs(whole.values);
  for (int j = 0; j <= req.J; ++j) {
    CHECK(std::abs(whole.values[j] - (a.values[j] + b.values[j])) < 1e-3 * scale);
    CHECK(std::abs(both.values[j] - (a.values[j] + b.values[j])) < 1e-12 * scale);
  }
}

TEST_CASE("response source: sign and closed-form oracle") {
  auto& eng = chebyshev_engine();
  const double eta = 0.25;
  SusceptibilityRequest req;
  req.eta = eta;
  req.J = 6;
  req.phi = Observable::constant(1.0);
  // The exact density is even, so M^eta rho is odd and integrates to zero over I.
  CHECK(std::abs(eng.coefficients(req).values[0]) < 1e-4);

  // phi = indicator of (0, 2): a_0 = -int_0^2 M^eta rho, against pointwise Marchaud values.
  req.phi = Observable::indicator(0.0, 2.0);
  const double a0 = eng.coefficients(req).values[0];
  // x = 2 - s^4 absorbs the (2 - x)^{-3/4} endpoint singularity.
  boost::math::quadrature::gauss_kronrod<double, 31> gk;
  const auto& model = eng.model();
  const double oracle = gk.integrate(
      [&](double s) {
        const double x = 2.0 - s * s * s * s;
        return x < 2.0 ? 4.0 * s * s * s * marchaud_of_density(model, eta, x) : 0.0;
      }, 0.0,
      std::pow(2.0, 0.25), 8, 1e-8);
  CHECK(a0 == doctest::Approx(-oracle).epsilon(2e-3));
}

TEST_CASE("frozen kernel cell masses sum to zero") {
  auto& eng = mt_engine();
  for (double eta : {0.1, 0.4}) {
    const auto& k = eng.frozen_masses(eta, TGridSpec{}, true);
    const double s = std::accumulate(k.begin(), k.end(), 0.0);
    CHECK(std::abs(s) < 1e-3 * l1(k));
  }
}

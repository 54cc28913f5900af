#include "fracsus/unimodal.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fracsus/errors.hpp"

namespace fracsus {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(fmt::format("{}: non-finite input", what));
  }
}

template <class R>
R polynomial(const std::vector<double>& coeffs, const R& y) {
  R acc = 0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
    acc = acc * y + R(*it);
  }
  return acc;
}

template <class R>
R polynomial_slope(const std::vector<double>& coeffs, const R& y) {
  R acc = 0;
  for (std::size_t i = coeffs.size(); i-- > 1;) {
    acc = acc * y + R(coeffs[i] * static_cast<double>(i));
  }
  return acc;
}

}  // namespace

UnimodalFamily::UnimodalFamily(FamilyKind kind, const Real50& t0, ParameterWindow window,
                               std::vector<double> direction)
    : kind_(kind),
      t0_exact_(t0),
      t0_(static_cast<double>(t0)),
      window_(window),
      direction_(std::move(direction)) {
  if (!std::isfinite(t0_) || !std::isfinite(window_.t_min) || !std::isfinite(window_.t_max)) {
    throw DomainError("family: non-finite parameter or window");
  }
  if (!(window_.t_min < 0.0) || !(window_.t_max > 0.0)) {
    throw DomainError(fmt::format("family: window must satisfy t_min < 0 < t_max, got ({}, {})",
                                  window_.t_min, window_.t_max));
  }
  if (!(t0_ + window_.t_min > kMinAdmissibleParameter)) {
    throw DomainError(fmt::format("family: t0 + t_min = {} is not admissible (must exceed {})",
                                  t0_ + window_.t_min, kMinAdmissibleParameter));
  }
  if (direction_.empty()) {
    throw DomainError("family: empty direction polynomial");
  }
  for (double c : direction_) require_finite(c, "family direction");
}

UnimodalFamily UnimodalFamily::quadratic(const Real50& t0, ParameterWindow window) {
  return UnimodalFamily(FamilyKind::Quadratic, t0, window, {1.0});
}

UnimodalFamily UnimodalFamily::generalized(const Real50& t0, ParameterWindow window,
                                           std::vector<double> direction_coefficients) {
  return UnimodalFamily(FamilyKind::Generalized, t0, window, std::move(direction_coefficients));
}

double UnimodalFamily::clamp_offset(double t) const noexcept {
  return std::clamp(t, window_.t_min, window_.t_max);
}

double UnimodalFamily::direction(double y) const noexcept { return polynomial(direction_, y); }

double UnimodalFamily::direction_slope(double y) const noexcept {
  return polynomial_slope(direction_, y);
}

template <class R>
R UnimodalFamily::eval_generic(const R& offset, const R& x) const {
  if (kind_ == FamilyKind::Quadratic) {
    return R(t0_exact_) + offset - x * x;
  }
  R base = R(t0_exact_) - x * x;
  return base + offset * polynomial(direction_, base);
}

template <class R>
R UnimodalFamily::derivative_generic(const R& offset, const R& x) const {
  if (kind_ == FamilyKind::Quadratic) {
    return -2 * x;
  }
  R base = R(t0_exact_) - x * x;
  return -2 * x * (1 + offset * polynomial_slope(direction_, base));
}

template double UnimodalFamily::eval_generic<double>(const double&, const double&) const;
template Real50 UnimodalFamily::eval_generic<Real50>(const Real50&, const Real50&) const;
template double UnimodalFamily::derivative_generic<double>(const double&, const double&) const;
template Real50 UnimodalFamily::derivative_generic<Real50>(const Real50&, const Real50&) const;

double UnimodalFamily::eval(double t, double x) const {
  require_finite(t, "map_eval");
  require_finite(x, "map_eval");
  const double s = clamp_offset(t);
  if (kind_ == FamilyKind::Quadratic) {
    return (t0_ + s) - x * x;
  }
  return eval_generic<double>(s, x);
}

double UnimodalFamily::derivative(double t, double x) const {
  require_finite(t, "map_derivative");
  require_finite(x, "map_derivative");
  return derivative_generic<double>(clamp_offset(t), x);
}

double UnimodalFamily::half_width(double t) const {
  const double s = clamp_offset(t);
  if (kind_ == FamilyKind::Quadratic) {
    return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * (t0_ + s)));
  }
  // -beta is the orientation-preserving fixed point: f_t(-b) + b = 0.
  auto g = [&](double b) { return eval_generic<double>(s, -b) + b; };
  double lo = 0.0;
  double hi = 1.0;
  while (g(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw DomainError("half_width: no negative fixed point found");
  }
  if (g(lo) < 0.0) throw DomainError("half_width: family has no invariant interval");
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::optional<UnimodalFamily::Preimage> UnimodalFamily::preimage(double t, double x,
                                                                 int branch) const {
  const double s = clamp_offset(t);
  double base;  // value of t0 - y^2
  double stretch = 1.0;
  if (kind_ == FamilyKind::Quadratic) {
    base = x - s;
  } else {
    // Solve base + s * X(base) = x by Newton.
    base = x - s * direction(x);
    for (int it = 0; it < 60; ++it) {
      const double h = base + s * direction(base) - x;
      const double dh = 1.0 + s * direction_slope(base);
      if (dh <= 0.0) throw DomainError("preimage: direction term breaks monotonicity");
      const double step = h / dh;
      base -= step;
      if (std::abs(step) <= 1e-16 * (1.0 + std::abs(base))) break;
    }
    stretch = 1.0 + s * direction_slope(base);
  }
  const double r = t0_ - base;
  if (!(r >= 0.0)) return std::nullopt;
  const double y = std::sqrt(r);
  return Preimage{branch >= 0 ? y : -y, 2.0 * y * stretch};
}

std::string UnimodalFamily::describe() const {
  std::string x = "1";
  if (kind_ == FamilyKind::Generalized) {
    x.clear();
    for (std::size_t i = 0; i < direction_.size(); ++i) {
      x += fmt::format("{}{:.17g}*y^{}", i ? " + " : "", direction_[i], i);
    }
  }
  return fmt::format("{} t0={:.17g} window=({:.17g},{:.17g}) X(y)={}",
                     kind_ == FamilyKind::Quadratic ? "quadratic" : "generalized", t0_,
                     window_.t_min, window_.t_max, x);
}

double map_eval(const UnimodalFamily& family, double t, double x) { return family.eval(t, x); }

double map_derivative(const UnimodalFamily& family, double t, double x) {
  return family.derivative(t, x);
}

double clamp_parameter(const UnimodalFamily& family, double t) { return family.clamp_offset(t); }

namespace {

template <class R>
CriticalOrbitData iterate_orbit(const UnimodalFamily& family, double t, int K) {
  const double s = family.clamp_offset(t);
  const double bound = family.half_width(s) + kEscapeMargin;
  const R offset = R(s);
  CriticalOrbitData out;
  out.length = K;
  out.orbit.reserve(static_cast<std::size_t>(K) + 1);
  out.derivatives.reserve(static_cast<std::size_t>(K));
  out.signs.reserve(static_cast<std::size_t>(K));
  R c = 0;
  R d = 1;
  int outside = 0;
  out.orbit.push_back(0.0);
  for (int k = 1; k <= K; ++k) {
    if (k > 1) d *= family.derivative_generic<R>(offset, c);
    c = family.eval_generic<R>(offset, c);
    const double cd = static_cast<double>(c);
    outside = std::abs(cd) > bound ? outside + 1 : 0;
    if (outside >= kEscapeRun || !std::isfinite(cd)) {
      throw EscapeError(fmt::format(
          "critical_orbit: orbit escaped the invariant interval at k={} (c_k={:.6g}, beta={:.6g})",
          k, cd, bound - kEscapeMargin));
    }
    out.orbit.push_back(cd);
    out.derivatives.push_back(static_cast<double>(d));
    out.signs.push_back(d > 0 ? 1 : (d < 0 ? -1 : 0));
  }
  return out;
}

}  // namespace

CriticalOrbitData critical_orbit(const UnimodalFamily& family, double t, int K) {
  if (K < 1) throw DomainError("critical_orbit: K must be >= 1");
  require_finite(t, "critical_orbit");
  if (K > kExtendedPrecisionThreshold) return iterate_orbit<Real50>(family, t, K);
  return iterate_orbit<double>(family, t, K);
}

CEEstimate ce_exponent(const UnimodalFamily& family, double t, int K) {
  if (K < 2) throw DomainError("ce_exponent: K must be >= 2");
  const auto data = critical_orbit(family, t, K);
  CEEstimate est;
  for (int k = 2; k <= K; ++k) {
    const double d = data.d(k);
    if (d == 0.0) {
      throw DegenerateOrbitError(
          fmt::format("ce_exponent: D_{} = 0 (critical point revisited at k={})", k, k - 1));
    }
    // log form keeps |D_k| overflow-free for long orbits.
    est.per_step.push_back(std::exp(std::log(std::abs(d)) / (k - 1)));
  }
  est.lambda_hat = est.per_step.back();
  return est;
}

std::optional<MTCertificate> detect_mt(const UnimodalFamily& family, double t, int K,
                                       double tol) {
  if (!(tol > 0.0)) throw DomainError("detect_mt: tol must be positive");
  const auto data = critical_orbit(family, t, K);
  const double s = family.clamp_offset(t);
  for (int l = 1; l < K; ++l) {
    for (int p = 1; l + p <= K; ++p) {
      const double residual = std::abs(data.c(l) - data.c(l + p));
      if (residual >= tol) continue;
      double mult = 1.0;
      for (int i = l; i < l + p; ++i) mult *= family.derivative(s, data.c(i));
      if (std::abs(mult) > 1.0) {
        return MTCertificate{l, p, std::abs(mult), mult, residual};
      }
    }
  }
  return std::nullopt;
}

double misiurewicz_gap(const CriticalOrbitData& data) {
  if (data.orbit.size() < 2) throw DomainError("misiurewicz_gap: empty orbit");
  double gap = std::abs(data.orbit[1]);
  for (std::size_t k = 2; k < data.orbit.size(); ++k) gap = std::min(gap, std::abs(data.orbit[k]));
  return gap;
}

Real50 bisect_preperiodic_parameter(const Real50& lo, const Real50& hi, int preperiod,
                                    int period) {
  if (preperiod < 1 || period < 1) throw DomainError("bisection: preperiod and period >= 1");
  auto h = [&](const Real50& t) {
    Real50 c = 0;
    Real50 at_l = 0;
    for (int k = 1; k <= preperiod + period; ++k) {
      c = t - c * c;
      if (k == preperiod) at_l = c;
    }
    return c - at_l;
  };
  Real50 a = lo;
  Real50 b = hi;
  Real50 fa = h(a);
  const Real50 fb = h(b);
  if (fa * fb > 0) throw DomainError("bisection: no sign change on bracket");
  for (int it = 0; it < 400; ++it) {
    const Real50 m = (a + b) / 2;
    const Real50 fm = h(m);
    if (fm == 0) return m;
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return (a + b) / 2;
}

}  // namespace fracsus

#include "fracsus/fraccalc.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fracsus/errors.hpp"

namespace fracsus {

// ---------------------------------------------------------------- atoms

double PowerAtom::eval(double x) const noexcept {
  const double s = sign_of(side) * (x - anchor);
  if (s > 0.0 && s < width) return coefficient * std::pow(s, exponent);
  return 0.0;
}

double PowerAtom::eval_offset(double x, double d) const noexcept {
  const double sg = sign_of(side);
  const double base = sg * (x - anchor);
  const double s = base + sg * d;
  if (!(s > 0.0)) return 0.0;
  if (truncated() && !((width - base) - sg * d > 0.0)) return 0.0;
  return coefficient * std::pow(s, exponent);
}

double PowerAtom::support_lo() const noexcept {
  return side == Side::Plus ? anchor : anchor - width;
}

double PowerAtom::support_hi() const noexcept {
  return side == Side::Plus ? anchor + width : anchor;
}

// Antiderivative vanishing left of the support; for untruncated Minus atoms
// the left limit is infinite, so the antiderivative is normalised to vanish
// at the anchor instead. Differences are exact in both cases.
double PowerAtom::cumulative(double x) const {
  const double p = exponent + 1.0;
  if (side == Side::Plus) {
    if (x <= anchor) return 0.0;
    const double s = std::min(x - anchor, width);
    return coefficient * std::pow(s, p) / p;
  }
  if (!truncated()) {
    if (x >= anchor) return 0.0;
    return -coefficient * std::pow(anchor - x, p) / p;
  }
  const double total = coefficient * std::pow(width, p) / p;
  if (x <= anchor - width) return 0.0;
  if (x >= anchor) return total;
  return total - coefficient * std::pow(anchor - x, p) / p;
}

void PowerAtom::validate() const {
  if (!std::isfinite(coefficient) || !std::isfinite(anchor) || !std::isfinite(exponent)) {
    throw DomainError("power atom: non-finite field");
  }
  if (!(exponent > -1.0)) {
    throw DomainError(fmt::format("power atom: exponent {} is not locally integrable", exponent));
  }
  if (!(width > 0.0)) throw DomainError("power atom: width must be positive");
}

// --------------------------------------------------------- grid function

GridFunction::GridFunction(double a, double b, std::vector<double> values)
    : a_(a), b_(b), values_(std::move(values)) {
  if (values_.size() < 2) throw DomainError("grid function: need at least 2 nodes");
  if (!(b_ > a_)) throw DomainError("grid function: empty domain");
  for (double v : values_) {
    if (!std::isfinite(v)) throw DomainError("grid function: non-finite value");
  }
  h_ = (b_ - a_) / static_cast<double>(values_.size());
  prefix_.resize(values_.size());
  prefix_[0] = 0.5 * h_ * values_[0];
  for (std::size_t i = 1; i < values_.size(); ++i) {
    prefix_[i] = prefix_[i - 1] + 0.5 * h_ * (values_[i - 1] + values_[i]);
  }
}

double GridFunction::eval(double x) const noexcept {
  if (!(x > a_ && x < b_)) return 0.0;
  const double first = node(0);
  const std::size_t n = values_.size();
  if (x <= first) return values_.front();
  if (x >= node(n - 1)) return values_.back();
  auto i = static_cast<std::size_t>((x - first) / h_);
  i = std::min(i, n - 2);
  const double d = (x - node(i)) / h_;
  return values_[i] + d * (values_[i + 1] - values_[i]);
}

double GridFunction::cumulative(double x) const noexcept {
  const std::size_t n = values_.size();
  if (x <= a_) return 0.0;
  if (x >= b_) return mass();
  const double first = node(0);
  if (x <= first) return (x - a_) * values_.front();
  if (x >= node(n - 1)) return prefix_[n - 1] + (x - node(n - 1)) * values_.back();
  auto i = static_cast<std::size_t>((x - first) / h_);
  i = std::min(i, n - 2);
  const double d = x - node(i);
  const double s = (values_[i + 1] - values_[i]) / h_;
  return prefix_[i] + values_[i] * d + 0.5 * s * d * d;
}

double GridFunction::mass() const noexcept {
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum * h_;
}

std::vector<LinearSegment> GridFunction::segments() const {
  const std::size_t n = values_.size();
  std::vector<LinearSegment> out;
  out.reserve(n + 1);
  out.push_back({a_, node(0), values_[0], 0.0});
  for (std::size_t i = 0; i + 1 < n; ++i) {
    out.push_back({node(i), node(i + 1), values_[i], (values_[i + 1] - values_[i]) / h_});
  }
  out.push_back({node(n - 1), b_, values_[n - 1], 0.0});
  return out;
}

// -------------------------------------------------------------- atom sum

double AtomSum::eval(double x) const noexcept {
  double sum = smooth_part ? smooth_part->eval(x) : 0.0;
  for (const auto& a : atoms) sum += a.eval(x);
  return sum;
}

double AtomSum::cumulative(double x) const {
  double sum = smooth_part ? smooth_part->cumulative(x) : 0.0;
  for (const auto& a : atoms) sum += a.cumulative(x);
  return sum;
}

double AtomSum::eval_offset(double x, double d) const noexcept {
  double sum = smooth_part ? smooth_part->eval(x + d) : 0.0;
  for (const auto& a : atoms) sum += a.eval_offset(x, d);
  return sum;
}

std::pair<double, double> AtomSum::support() const {
  double lo = kInf;
  double hi = -kInf;
  for (const auto& a : atoms) {
    lo = std::min(lo, a.support_lo());
    hi = std::max(hi, a.support_hi());
  }
  if (smooth_part) {
    lo = std::min(lo, smooth_part->lo());
    hi = std::max(hi, smooth_part->hi());
  }
  return {lo, hi};
}

namespace {

bool is_nonnegative_integer(double v) { return v >= 0.0 && v == std::floor(v); }

}  // namespace

std::vector<std::pair<double, bool>> AtomSum::breakpoints() const {
  std::vector<std::pair<double, bool>> out;
  for (const auto& a : atoms) {
    out.emplace_back(a.anchor, !is_nonnegative_integer(a.exponent));
    if (a.truncated()) out.emplace_back(a.anchor + sign_of(a.side) * a.width, false);
  }
  if (smooth_part) {
    out.emplace_back(smooth_part->lo(), false);
    out.emplace_back(smooth_part->hi(), false);
  }
  std::sort(out.begin(), out.end());
  return out;
}

AtomSum AtomSum::scaled(double factor) const {
  AtomSum out = *this;
  for (auto& a : out.atoms) a.coefficient *= factor;
  if (smooth_part) {
    auto v = smooth_part->values();
    for (auto& x : v) x *= factor;
    out.smooth_part.emplace(smooth_part->lo(), smooth_part->hi(), std::move(v));
  }
  return out;
}

AtomSum AtomSum::shifted(double h) const {
  AtomSum out = *this;
  for (auto& a : out.atoms) a.anchor += h;
  if (smooth_part) {
    out.smooth_part.emplace(smooth_part->lo() + h, smooth_part->hi() + h, smooth_part->values());
  }
  return out;
}

// -------------------------------------------------------- special functions

namespace {

bool is_pole(double x) { return x <= 0.0 && x == std::floor(x); }

double log_abs_gamma(double x, int& sign) {
  int s = 1;
  const double v = lgamma_r(x, &s);
  sign = s;
  return v;
}

}  // namespace

double gamma_ratio(double num, double den) {
  if (!std::isfinite(num) || !std::isfinite(den)) throw DomainError("gamma_ratio: non-finite");
  if (is_pole(num) || is_pole(den)) {
    throw DomainError(fmt::format("gamma_ratio: pole of Gamma at ({}, {})", num, den));
  }
  if (num == den) return 1.0;
  int sn = 1;
  int sd = 1;
  const double ln = log_abs_gamma(num, sn);
  const double ld = log_abs_gamma(den, sd);
  return sn * sd * std::exp(ln - ld);
}

double beta_function(double x, double y) {
  if (is_pole(x) || is_pole(y)) throw DomainError("beta_function: pole of Gamma");
  int sx = 1;
  int sy = 1;
  int sxy = 1;
  const double l = log_abs_gamma(x, sx) + log_abs_gamma(y, sy) - log_abs_gamma(x + y, sxy);
  return sx * sy * sxy * std::exp(l);
}

// ------------------------------------------------------ closed-form atoms

PowerAtom frac_integral_atom(const PowerAtom& atom, double eta) {
  atom.validate();
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw DomainError(fmt::format("frac_integral_atom: eta={} outside [0, 1]", eta));
  }
  if (atom.truncated()) {
    throw UnsupportedError("frac_integral_atom: closed form holds for untruncated atoms only");
  }
  PowerAtom out = atom;
  out.coefficient *= gamma_ratio(atom.exponent + 1.0, atom.exponent + 1.0 + eta);
  out.exponent = atom.exponent + eta;
  return out;
}

PowerAtom marchaud_atom(const PowerAtom& atom, double eta, Side derivative_side) {
  atom.validate();
  if (derivative_side != atom.side) {
    throw UnsupportedError("marchaud_atom: opposite-side derivative has no closed form here; "
                           "use marchaud_numeric");
  }
  if (atom.truncated()) {
    throw UnsupportedError("marchaud_atom: closed form holds for untruncated atoms only");
  }
  if (!(eta >= 0.0 && eta < std::min(1.0, atom.exponent + 1.0))) {
    throw DomainError(fmt::format("marchaud_atom: eta={} must satisfy 0 <= eta < min(1, beta+1)",
                                  eta));
  }
  PowerAtom out = atom;
  out.coefficient *= gamma_ratio(atom.exponent + 1.0, atom.exponent + 1.0 - eta);
  out.exponent = atom.exponent - eta;
  return out;
}

// -------------------------------------------------- numeric fractional integrals

namespace {

// Atoms anchored exactly at x on the integration side are integrated in closed
// form; the rest by graded panels between breakpoints, sampled by exact offsets
// from the panel ends.
double frac_integral_impl(const AtomSum& g, double alpha, IntervalSide side, double endpoint,
                          double x, const QuadratureSpec& spec) {
  const bool lower = side == IntervalSide::Lower;
  const double lo = lower ? endpoint : x;
  const double hi = lower ? x : endpoint;
  if (!(hi > lo)) return 0.0;

  AtomSum rest;
  rest.smooth_part = g.smooth_part;
  double exact = 0.0;
  for (const auto& a : g.atoms) {
    if (a.anchor != x) {
      rest.atoms.push_back(a);
      continue;
    }
    const bool on_side = lower ? a.side == Side::Minus : a.side == Side::Plus;
    if (!on_side) continue;  // vanishes on the integration range
    const double p = a.exponent + alpha;
    if (p <= 0.0) {
      throw DomainError(fmt::format(
          "frac_integral_numeric: exponent {} + order {} <= 0 at a coinciding singularity",
          a.exponent, alpha));
    }
    exact += a.coefficient * std::pow(std::min(hi - lo, a.width), p) / p;
  }

  std::vector<double> pts{lo, hi};
  for (const auto& [p, singular] : rest.breakpoints()) {
    if (p > lo && p < hi) pts.push_back(p);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const double km = alpha - 1.0;
  auto f = [&](double base, double off) {
    const double d = lower ? (x - base) - off : off + (base - x);
    return rest.eval_offset(base, off) * std::pow(d, km);
  };
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    sum += integrate_graded_local(f, pts[i], pts[i + 1], true, true, spec);
  }
  return (exact + sum) / std::tgamma(alpha);
}

void check_eta_open_unit(double eta, const char* who) {
  if (!(eta > 0.0 && eta < 1.0)) throw DomainError(fmt::format("{}: eta={} outside (0, 1)", who, eta));
}

}  // namespace

double frac_integral_numeric(const AtomSum& g, double eta, IntervalSide side, double endpoint,
                             double x, const QuadratureSpec& spec) {
  check_eta_open_unit(eta, "frac_integral_numeric");
  if (!std::isfinite(x) || !std::isfinite(endpoint)) {
    throw DomainError("frac_integral_numeric: non-finite point");
  }
  if ((side == IntervalSide::Lower && x < endpoint) ||
      (side == IntervalSide::Upper && x > endpoint)) {
    throw DomainError("frac_integral_numeric: x outside the integration domain");
  }
  return frac_integral_impl(g, eta, side, endpoint, x, spec);
}

double frac_integral_numeric(const GridFunction& g, double eta, IntervalSide side,
                             double endpoint, double x, const QuadratureSpec& spec) {
  AtomSum s;
  s.smooth_part = g;
  return frac_integral_numeric(s, eta, side, endpoint, x, spec);
}

double frac_integral_whole_line(const AtomSum& g, double alpha, Side side, double x,
                                const QuadratureSpec& spec) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw DomainError(fmt::format("frac_integral_whole_line: order {} outside (0, 1]", alpha));
  }
  if (alpha == 1.0) {
    // I_+^1 g(x) = int_{-inf}^x g, I_-^1 g(x) = int_x^{inf} g.
    const double left = g.cumulative(x);
    if (side == Side::Plus) return left;
    const auto [lo, hi] = g.support();
    return g.cumulative(hi) - left;
  }
  double sum = 0.0;
  AtomSum atoms_only;
  atoms_only.atoms = g.atoms;
  if (!g.atoms.empty()) {
    const auto [lo, hi] = atoms_only.support();
    if (side == Side::Plus) {
      if (!std::isfinite(lo)) throw UnsupportedError("frac_integral_whole_line: unbounded support");
      if (x > lo) sum += frac_integral_impl(atoms_only, alpha, IntervalSide::Lower, lo, x, spec);
    } else {
      if (!std::isfinite(hi)) throw UnsupportedError("frac_integral_whole_line: unbounded support");
      if (x < hi) sum += frac_integral_impl(atoms_only, alpha, IntervalSide::Upper, hi, x, spec);
    }
  }
  if (g.smooth_part) {
    const auto segs = g.smooth_part->segments();
    sum += frac_integral_piecewise_linear(segs, alpha, side, x);
  }
  return sum;
}

// ----------------------------------------------------- numeric Marchaud

double marchaud_atom_numeric(const PowerAtom& atom, double eta, Side side, double x,
                             const QuadratureSpec& spec) {
  if (!(eta >= 0.0 && eta < 1.0)) {
    throw DomainError(fmt::format("marchaud_numeric: eta={} outside [0, 1)", eta));
  }
  if (eta == 0.0) return 0.0;
  if (x == atom.anchor && atom.exponent < 0.0) {
    throw SingularityError(fmt::format("marchaud_numeric: x={} is a singular atom anchor", x));
  }
  const int dir = sign_of(side);  // Plus samples g(x - u), Minus samples g(x + u)
  const double gx = atom.eval(x);
  // Distance along the sampled direction after which g vanishes (or is constant).
  const double far_edge = side == Side::Plus ? atom.support_lo() : atom.support_hi();
  const double u_support = dir * (x - far_edge);
  const double cg = std::tgamma(1.0 - eta);
  if (!std::isfinite(u_support)) {
    // Untruncated atom opening toward the sampled direction.
    if (atom.exponent != 0.0) {
      throw UnsupportedError("marchaud_numeric: unbounded non-constant atom on the sampled side");
    }
  } else if (u_support <= 0.0) {
    return 0.0;  // x lies beyond the support on the sampled side, so g(x) = 0 too
  }
  const double diameter = atom.truncated() ? atom.width : 0.0;
  double cutoff = spec.tail_cutoff.value_or(diameter + 4.0);
  const double near_edge = side == Side::Plus ? atom.support_hi() : atom.support_lo();
  // Breakpoints in u, each with the exact abscissa it corresponds to.
  std::vector<std::pair<double, double>> pts{{0.0, x}, {spec.inner_cutoff, kInf}};
  auto add = [&](double t) {
    const double u = dir * (x - t);
    if (std::isfinite(u) && u > 0.0) pts.emplace_back(u, t);
  };
  add(atom.anchor);
  add(near_edge);
  add(far_edge);
  if (std::isfinite(u_support)) cutoff = std::max(cutoff, u_support);
  else cutoff = std::max(cutoff, std::abs(x - atom.anchor) + 4.0);
  pts.emplace_back(cutoff, kInf);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& l, const auto& r) { return l.first == r.first; }),
            pts.end());
  while (pts.back().first > cutoff) pts.pop_back();

  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double u0 = pts[i].first;
    const double u1 = pts[i + 1].first;
    auto f = [&](double base, double off) {
      const bool left = base == u0;
      const double t_ref = left ? pts[i].second : pts[i + 1].second;
      const double u = base + off;
      const double g = std::isfinite(t_ref) ? atom.eval_offset(t_ref, -dir * off)
                                            : atom.eval_offset(x, -dir * u);
      return (gx - g) * std::pow(u, -1.0 - eta);
    };
    sum += integrate_graded_local(f, u0, u1, true, true, spec);
  }
  // Beyond the cutoff g(x -+ u) is 0, or the constant c for untruncated beta = 0 atoms.
  const double far_value = std::isfinite(u_support) ? 0.0 : atom.coefficient;
  const double tail = (gx - far_value) * std::pow(cutoff, -eta) / cg;
  return eta / cg * sum + tail;
}

double marchaud_numeric(const AtomSum& g, double eta, MarchaudSide side, double x,
                        const QuadratureSpec& spec) {
  if (!(eta >= 0.0 && eta < 1.0)) {
    throw DomainError(fmt::format("marchaud_numeric: eta={} outside [0, 1)", eta));
  }
  if (eta == 0.0) return 0.0;
  auto one_side = [&](Side s) {
    double v = 0.0;
    for (const auto& a : g.atoms) v += marchaud_atom_numeric(a, eta, s, x, spec);
    if (g.smooth_part) {
      const auto segs = g.smooth_part->segments();
      v += marchaud_piecewise_linear(segs, eta, s, x);
    }
    return v;
  };
  switch (side) {
    case MarchaudSide::Plus:
      return one_side(Side::Plus);
    case MarchaudSide::Minus:
      return one_side(Side::Minus);
    case MarchaudSide::TwoSided:
      return 0.5 * (one_side(Side::Plus) - one_side(Side::Minus));
  }
  return 0.0;
}

// --------------------------------------------- piecewise-linear closed forms

namespace {

std::vector<LinearSegment> reflect(std::span<const LinearSegment> segs) {
  std::vector<LinearSegment> out;
  out.reserve(segs.size());
  for (auto it = segs.rbegin(); it != segs.rend(); ++it) {
    const double v_hi = it->value_lo + it->slope * (it->hi - it->lo);
    out.push_back({-it->hi, -it->lo, v_hi, -it->slope});
  }
  return out;
}

double value_at(std::span<const LinearSegment> segs, double x) {
  for (const auto& s : segs) {
    if (x >= s.lo && x < s.hi) return s.value_lo + s.slope * (x - s.lo);
  }
  return 0.0;
}

// Left-looking Marchaud derivative (derivative side Plus).
double marchaud_pl_plus(std::span<const LinearSegment> segs, double eta, double x) {
  if (segs.empty() || x <= segs.front().lo) return 0.0;
  const double gx = value_at(segs, x);
  double sum = 0.0;
  for (const auto& s : segs) {
    if (!(s.lo < x)) break;
    const double r = std::min(s.hi, x);
    const double u1 = x - r;
    const double u2 = x - s.lo;
    const double a = s.value_lo + s.slope * (x - s.lo);
    if (u1 > 0.0) {
      sum += (gx - a) * (std::pow(u1, -eta) - std::pow(u2, -eta)) / eta;
    } else if (gx != a) {
      throw SingularityError("marchaud: evaluation at a jump of a piecewise-linear function");
    }
    sum += s.slope * (std::pow(u2, 1.0 - eta) - std::pow(u1, 1.0 - eta)) / (1.0 - eta);
  }
  const double cg = std::tgamma(1.0 - eta);
  const double tail = gx * std::pow(x - segs.front().lo, -eta) / cg;
  return eta / cg * sum + tail;
}

double frac_integral_pl_plus(std::span<const LinearSegment> segs, double alpha, double x) {
  double sum = 0.0;
  for (const auto& s : segs) {
    if (!(s.lo < x)) break;
    const double r = std::min(s.hi, x);
    const double u1 = x - r;
    const double u2 = x - s.lo;
    const double a = s.value_lo + s.slope * (x - s.lo);
    sum += a * (std::pow(u2, alpha) - std::pow(u1, alpha)) / alpha -
           s.slope * (std::pow(u2, alpha + 1.0) - std::pow(u1, alpha + 1.0)) / (alpha + 1.0);
  }
  return sum / std::tgamma(alpha);
}

}  // namespace

double marchaud_piecewise_linear(std::span<const LinearSegment> segments, double eta, Side side,
                                 double x) {
  if (!(eta >= 0.0 && eta < 1.0)) throw DomainError("marchaud: eta outside [0, 1)");
  if (eta == 0.0) return 0.0;
  if (side == Side::Plus) return marchaud_pl_plus(segments, eta, x);
  const auto r = reflect(segments);
  return marchaud_pl_plus(r, eta, -x);
}

double frac_integral_piecewise_linear(std::span<const LinearSegment> segments, double alpha,
                                      Side side, double x) {
  if (!(alpha > 0.0)) throw DomainError("fractional integral: order must be positive");
  if (side == Side::Plus) return frac_integral_pl_plus(segments, alpha, x);
  const auto r = reflect(segments);
  return frac_integral_pl_plus(r, alpha, -x);
}

// ---------------------------------------------------------- exponent fit

ExponentFit singularity_exponent_fit(std::span<const std::pair<double, double>> samples) {
  if (samples.size() < 8) {
    throw InsufficientDataError(
        fmt::format("singularity_exponent_fit: need >= 8 samples, got {}", samples.size()));
  }
  double dmin = kInf;
  double dmax = 0.0;
  for (const auto& [d, v] : samples) {
    if (!(d > 0.0)) throw DomainError("singularity_exponent_fit: nonpositive distance");
    if (!(std::abs(v) > 0.0) || !std::isfinite(v)) {
      throw DomainError("singularity_exponent_fit: zero or non-finite value");
    }
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  if (dmax / dmin < 100.0) {
    throw InsufficientDataError("singularity_exponent_fit: distances span fewer than 2 decades");
  }
  const double n = static_cast<double>(samples.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (const auto& [d, v] : samples) {
    const double lx = std::log(d);
    const double ly = std::log(std::abs(v));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
  }
  const double cxx = sxx - sx * sx / n;
  const double cxy = sxy - sx * sy / n;
  const double cyy = syy - sy * sy / n;
  const double slope = cxy / cxx;
  const double intercept = (sy - slope * sx) / n;
  const double r2 = cyy > 0.0 ? (cxy * cxy) / (cxx * cyy) : 1.0;
  return {slope, std::exp(intercept), r2};
}

}  // namespace fracsus

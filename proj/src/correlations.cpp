#include "fracsus/correlations.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "fracsus/errors.hpp"

namespace fracsus {

// ------------------------------------------------------------ observables

Observable Observable::polynomial(std::vector<double> coefficients) {
  if (coefficients.empty()) throw ValidationError("Observable: empty polynomial");
  Observable o;
  o.kind = Kind::Polynomial;
  o.coefficients = std::move(coefficients);
  std::string d = "poly:";
  for (std::size_t i = 0; i < o.coefficients.size(); ++i) {
    if (i) d += ",";
    d += fmt::format("{}", o.coefficients[i]);
  }
  o.description = d;
  return o;
}

Observable Observable::cosine(double omega, double phase) {
  if (!std::isfinite(omega) || !std::isfinite(phase)) throw ValidationError("Observable: non-finite cosine");
  Observable o;
  o.kind = Kind::Cosine;
  o.omega = omega;
  o.phase = phase;
  o.description = phase == 0.0 ? fmt::format("cos:{}", omega) : fmt::format("cos:{},{}", omega, phase);
  return o;
}

Observable Observable::indicator(double lo, double hi) {
  if (!(lo < hi)) throw ValidationError(fmt::format("Observable: indicator needs lo < hi, got ({}, {})", lo, hi));
  Observable o;
  o.kind = Kind::Indicator;
  o.lo = lo;
  o.hi = hi;
  o.description = fmt::format("ind:{},{}", lo, hi);
  return o;
}

Observable Observable::constant(double c) {
  if (!std::isfinite(c)) throw ValidationError("Observable: non-finite constant");
  Observable o;
  o.kind = Kind::Constant;
  o.value = c;
  o.description = fmt::format("const:{}", c);
  return o;
}

namespace {

std::vector<double> parse_numbers(const std::string& s, const std::string& whole) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("Observable: cannot parse '{}'", whole));
    }
  }
  return out;
}

}  // namespace

Observable Observable::parse(const std::string& text) {
  if (text == "x^2" || text == "x2") return polynomial({0.0, 0.0, 1.0});
  if (text == "x") return polynomial({0.0, 1.0});
  if (text == "1") return constant(1.0);
  if (text == "cos3x") return cosine(3.0);
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ValidationError(fmt::format("Observable: unknown descriptor '{}'", text));
  const std::string head = text.substr(0, colon);
  const auto nums = parse_numbers(text.substr(colon + 1), text);
  if (head == "poly") return polynomial(nums);
  if (head == "const" && nums.size() == 1) return constant(nums[0]);
  if (head == "cos" && nums.size() == 1) return cosine(nums[0]);
  if (head == "cos" && nums.size() == 2) return cosine(nums[0], nums[1]);
  if (head == "ind" && nums.size() == 2) return indicator(nums[0], nums[1]);
  throw ValidationError(fmt::format("Observable: unknown descriptor '{}'", text));
}

double Observable::operator()(double x) const noexcept {
  switch (kind) {
    case Kind::Polynomial: {
      double v = 0.0;
      for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * x + *it;
      return v;
    }
    case Kind::Cosine:
      return std::cos(omega * x + phase);
    case Kind::Indicator:
      return (x > lo && x < hi) ? 1.0 : 0.0;
    case Kind::Constant:
      return value;
  }
  return 0.0;
}

std::vector<double> Observable::discontinuities() const {
  if (kind == Kind::Indicator) return {lo, hi};
  return {};
}

const char* to_string(CorrelationMethod m) noexcept {
  return m == CorrelationMethod::Quadrature ? "quadrature" : "ulam";
}

// ------------------------------------------------------------ quadrature

namespace {

using boost::math::quadrature::gauss_kronrod;

// f^j carries rounding noise amplified by |(f^j)'|, so a tight tolerance only
// drives the recursion to its depth limit; subdivision does the real work.
constexpr unsigned kGkDepth = 6;
constexpr double kGkTol = 1e-10;

double iterate(const UnimodalFamily& fam, double t, double x, int j) {
  for (int k = 0; k < j; ++k) x = fam.eval(t, x);
  return x;
}

// Frequency scale of the observable, used to size subdivisions.
double frequency(const Observable& phi) {
  switch (phi.kind) {
    case Observable::Kind::Cosine:
      return std::max(1.0, std::abs(phi.omega));
    case Observable::Kind::Polynomial:
      return std::max(1.0, static_cast<double>(phi.coefficients.size() - 1));
    default:
      return 1.0;
  }
}

double abs_iterate_derivative(const UnimodalFamily& fam, double t, double x, int j) {
  double d = 1.0;
  for (int k = 0; k < j; ++k) {
    d *= fam.derivative(t, x);
    x = fam.eval(t, x);
  }
  return std::abs(d);
}

double gk(const std::function<double(double)>& g, double a, double b) {
  return gauss_kronrod<double, 15>::integrate(g, a, b, kGkDepth, kGkTol);
}

}  // namespace

double bin_average(const std::function<double(double)>& g, double a, double b, double oscillation) {
  if (!(b > a)) throw DomainError("bin_average: empty bin");
  const int m = static_cast<int>(std::clamp(std::ceil(oscillation), 1.0, 16384.0));
  const double w = (b - a) / m;
  double s = 0.0;
  for (int k = 0; k < m; ++k) {
    const double l = a + k * w;
    const double r = (k + 1 == m) ? b : l + w;
    s += gk(g, l, r);
  }
  return s / (b - a);
}

namespace {

double quadrature_coefficient(const UnimodalFamily& fam, double t, const Observable& phi,
                              const AtomSum& psi, int j) {
  const double beta = fam.half_width(t);
  // Breakpoints inside the interval, flagged singular when psi blows up there.
  std::vector<std::pair<double, bool>> pts{{-beta, false}, {beta, false}};
  for (const auto& [p, sing] : psi.breakpoints()) {
    if (p >= -beta && p <= beta) pts.emplace_back(p, sing);
  }
  if (j == 0) {
    for (double p : phi.discontinuities()) {
      if (p > -beta && p < beta) pts.emplace_back(p, false);
    }
  }
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, bool>> merged;
  for (const auto& p : pts) {
    if (!merged.empty() && merged.back().first == p.first) {
      merged.back().second = merged.back().second || p.second;
    } else {
      merged.push_back(p);
    }
  }
  const double per_unit = std::ldexp(1.0, j + 1);
  auto toward = [&](double base, double dir, double len) {
    // int_0^len phi(f^j(base + dir u)) psi(base + dir u) du with u = s^2.
    const double S = std::sqrt(len);
    auto g = [&](double s) {
      const double u = s * s;
      return phi(iterate(fam, t, base + dir * u, j)) * psi.eval_offset(base, dir * u) * 2.0 * s;
    };
    const int m = static_cast<int>(std::max(1.0, std::ceil(S * per_unit)));
    double sum = 0.0;
    for (int k = 0; k < m; ++k) sum += gk(g, S * k / m, S * (k + 1) / m);
    return sum;
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
    const auto [p, sl] = merged[i];
    const auto [q, sr] = merged[i + 1];
    if (!(q > p)) continue;
    if (sl && sr) {
      const double mid = 0.5 * (q - p);
      total += toward(p, 1.0, mid) + toward(q, -1.0, mid);
    } else if (sl) {
      total += toward(p, 1.0, q - p);
    } else if (sr) {
      total += toward(q, -1.0, q - p);
    } else {
      auto g = [&](double x) { return phi(iterate(fam, t, x, j)) * psi.eval(x); };
      const int m = static_cast<int>(std::max(1.0, std::ceil((q - p) * per_unit)));
      for (int k = 0; k < m; ++k) {
        const double l = p + (q - p) * k / m;
        const double r = (k + 1 == m) ? q : p + (q - p) * (k + 1) / m;
        total += gk(g, l, r);
      }
    }
  }
  return total;
}

std::vector<double> exact_koopman(const UnimodalFamily& fam, double t, const BinGrid& grid,
                                  const Observable& phi, int j, Exec exec) {
  const double h = grid.width();
  const double w = frequency(phi);
  return tabulate(
      grid.n,
      [&](std::size_t i) {
        const double a = grid.edge(i);
        const double b = grid.edge(i + 1);
        double d = abs_iterate_derivative(fam, t, 0.5 * (a + b), j);
        d = std::max(d, abs_iterate_derivative(fam, t, a, j));
        d = std::max(d, abs_iterate_derivative(fam, t, b, j));
        // Fixed 15-point Kronrod panels, each spanning well under one oscillation.
        auto g = [&](double x) { return phi(iterate(fam, t, x, j)); };
        const int m = static_cast<int>(std::clamp(std::ceil(h * d * w), 1.0, 65536.0));
        const double step = h / m;
        double s = 0.0;
        for (int k = 0; k < m; ++k) {
          const double l = a + k * step;
          const double r = (k + 1 == m) ? b : l + step;
          s += gauss_kronrod<double, 15>::integrate(g, l, r, 0, 0.0);
        }
        return s / h;
      },
      exec);
}

}  // namespace

double correlation_coefficient(const UnimodalFamily& family, double t, const Observable& phi,
                               const AtomSum& psi, int j, CorrelationMethod method,
                               const QuadratureSpec& spec, const UlamOperator* ulam,
                               int j_switch) {
  spec.validate();
  if (j < 0) throw DomainError(fmt::format("correlation_coefficient: j={} < 0", j));
  if (method == CorrelationMethod::Quadrature) {
    if (j > j_switch) {
      throw MethodError(fmt::format(
          "correlation_coefficient: j={} exceeds j_switch={} for quadrature; f^j oscillates too fast",
          j, j_switch));
    }
    return quadrature_coefficient(family, t, phi, psi, j);
  }
  if (ulam == nullptr) throw MethodError("correlation_coefficient: Ulam method needs an operator");
  std::vector<double> m = bin_masses(psi, ulam->grid);
  std::vector<double> next(m.size());
  for (int k = 0; k < j; ++k) {
    ulam->density_action(m, next);
    m.swap(next);
  }
  const auto phibar = exact_koopman(family, t, ulam->grid, phi, 0, Exec::Parallel);
  return dot(m, phibar, Exec::Parallel);
}

// ------------------------------------------------------------ Koopman table

const std::vector<double>& KoopmanTable::primary(int j) const {
  if (j < 0 || j > J()) throw DomainError(fmt::format("KoopmanTable: j={} out of range", j));
  if (j <= j_switch && static_cast<std::size_t>(j) < exact.size()) return exact[static_cast<std::size_t>(j)];
  return ulam[static_cast<std::size_t>(j)];
}

KoopmanTable koopman_table(const UnimodalFamily& family, double t, const UlamOperator& op,
                           const Observable& phi, int J, int j_switch, Exec exec) {
  if (J < 0) throw DomainError("koopman_table: J < 0");
  if (j_switch < 0) throw DomainError("koopman_table: j_switch < 0");
  KoopmanTable tab;
  tab.grid = op.grid;
  tab.j_switch = j_switch;
  tab.observable = phi.description;
  for (int j = 0; j <= std::min(J, j_switch); ++j) {
    tab.exact.push_back(exact_koopman(family, t, op.grid, phi, j, exec));
  }
  tab.ulam.push_back(tab.exact.empty() ? exact_koopman(family, t, op.grid, phi, 0, exec) : tab.exact[0]);
  for (int j = 1; j <= J; ++j) {
    std::vector<double> next(op.grid.n);
    op.koopman_action(tab.ulam.back(), next, exec);
    tab.ulam.push_back(std::move(next));
  }
  return tab;
}

CoefficientSequence binned_sequence(const KoopmanTable& table, std::span<const double> masses,
                                    Exec exec) {
  if (masses.size() != table.grid.n) throw DomainError("binned_sequence: mass vector size mismatch");
  CoefficientSequence seq;
  seq.observable = table.observable;
  for (int j = 0; j <= table.J(); ++j) {
    seq.values.push_back(dot(masses, table.primary(j), exec));
    const bool quad = j <= table.j_switch && static_cast<std::size_t>(j) < table.exact.size();
    seq.methods.push_back(quad ? CorrelationMethod::Quadrature : CorrelationMethod::Ulam);
    if (quad) {
      seq.ulam_check.emplace_back(dot(masses, table.ulam[static_cast<std::size_t>(j)], exec));
    } else {
      seq.ulam_check.emplace_back(std::nullopt);
    }
  }
  return seq;
}

CoefficientSequence correlation_sequence(const UnimodalFamily& family, double t,
                                         const Observable& phi, const AtomSum& psi, int J,
                                         const QuadratureSpec& spec, const UlamOperator& ulam,
                                         int j_switch) {
  if (J < 4) throw DomainError(fmt::format("correlation_sequence: J={} < 4", J));
  spec.validate();
  const auto table = koopman_table(family, t, ulam, phi, J, j_switch);
  const auto masses = bin_masses(psi, ulam.grid);
  CoefficientSequence seq;
  seq.observable = phi.description;
  seq.kind = "correlation";
  const int jq = std::min(J, j_switch);
  const auto quad = tabulate(
      static_cast<std::size_t>(jq + 1),
      [&](std::size_t j) { return quadrature_coefficient(family, t, phi, psi, static_cast<int>(j)); },
      Exec::Parallel);
  for (int j = 0; j <= J; ++j) {
    const double u = dot(masses, table.ulam[static_cast<std::size_t>(j)], Exec::Parallel);
    if (j <= jq) {
      seq.values.push_back(quad[static_cast<std::size_t>(j)]);
      seq.methods.push_back(CorrelationMethod::Quadrature);
      seq.ulam_check.emplace_back(u);
    } else {
      seq.values.push_back(u);
      seq.methods.push_back(CorrelationMethod::Ulam);
      seq.ulam_check.emplace_back(std::nullopt);
    }
  }
  return seq;
}

// ------------------------------------------------------------ decay fit

DecayFit decay_fit(const CoefficientSequence& seq, int j_lo, int j_hi) {
  if (j_lo < 0 || j_hi < j_lo) throw DomainError(fmt::format("decay_fit: bad window [{}, {}]", j_lo, j_hi));
  double amax = 0.0;
  for (double a : seq.values) amax = std::max(amax, std::abs(a));
  const double floor = kNoiseFloor * amax;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int n = 0;
  for (int j = j_lo; j <= std::min(j_hi, seq.J()); ++j) {
    const double a = std::abs(seq.values[static_cast<std::size_t>(j)]);
    if (!(a > floor) || a == 0.0) continue;
    const double y = std::log(a);
    sx += j;
    sy += y;
    sxx += static_cast<double>(j) * j;
    sxy += j * y;
    syy += y * y;
    ++n;
  }
  if (n < 5) {
    throw InsufficientDataError(fmt::format(
        "decay_fit: {} coefficients above the noise floor in [{}, {}], need 5", n, j_lo, j_hi));
  }
  const double cxx = sxx - sx * sx / n;
  const double cxy = sxy - sx * sy / n;
  const double cyy = syy - sy * sy / n;
  const double slope = cxy / cxx;
  const double intercept = (sy - slope * sx) / n;
  DecayFit fit;
  fit.theta = std::exp(slope);
  fit.C = std::exp(intercept);
  fit.j_lo = j_lo;
  fit.j_hi = std::min(j_hi, seq.J());
  fit.r2 = cyy > 0.0 ? (cxy * cxy) / (cxx * cyy) : 1.0;
  fit.points = n;
  return fit;
}

DecayFit decay_fit(const CoefficientSequence& seq) { return decay_fit(seq, 5, seq.J() - 2); }

}  // namespace fracsus

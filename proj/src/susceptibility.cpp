#include "fracsus/susceptibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "fracsus/errors.hpp"
#include "fracsus/quadrature.hpp"

namespace fracsus {

const char* to_string(SusceptibilityKind k) noexcept {
  switch (k) {
    case SusceptibilityKind::Response:
      return "response";
    case SusceptibilityKind::Frozen:
      return "frozen";
    case SusceptibilityKind::Semifreddo:
      return "semifreddo";
  }
  return "?";
}

SusceptibilityKind parse_kind(const std::string& s) {
  if (s == "response") return SusceptibilityKind::Response;
  if (s == "frozen") return SusceptibilityKind::Frozen;
  if (s == "semifreddo") return SusceptibilityKind::Semifreddo;
  throw ValidationError(fmt::format("unknown susceptibility kind '{}' (response|frozen|semifreddo)", s));
}

void OmegaSet::validate(const ParameterWindow& w) const {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto [lo, hi] = intervals[i];
    if (!(lo < hi)) throw ValidationError(fmt::format("Omega: interval ({}, {}) is empty", lo, hi));
    if (lo < w.t_min || hi > w.t_max) {
      throw ValidationError(fmt::format("Omega: interval ({}, {}) leaves the window [{}, {}]", lo, hi,
                                        w.t_min, w.t_max));
    }
    if (i > 0 && lo < intervals[i - 1].second) {
      throw ValidationError("Omega: intervals must be sorted and disjoint");
    }
  }
}

void SusceptibilityRequest::validate(const ParameterWindow& w) const {
  if (!(eta >= 0.0 && eta < 0.5)) {
    throw ValidationError(fmt::format("susceptibility: eta={} violates 0 <= eta < 1/2", eta));
  }
  if (J < 4) throw ValidationError(fmt::format("susceptibility: J={} < 4", J));
  if (!(tgrid.ratio > 0.0 && tgrid.ratio < 1.0) || tgrid.levels < 2 || tgrid.panel_order < 4 ||
      tgrid.subpanels < 1) {
    throw ValidationError("susceptibility: invalid t-grid");
  }
  if (kind == SusceptibilityKind::Semifreddo) omega.validate(w);
}

double marchaud_prefactor(double eta) { return eta / (2.0 * std::tgamma(1.0 - eta)); }

double clamped_tail(double g_at_min, double g_at_zero, double g_at_max, const ParameterWindow& w,
                    double eta) {
  if (!(eta > 0.0)) throw DomainError("clamped_tail: eta must be positive");
  return (g_at_max - g_at_zero) * std::pow(w.t_max, -eta) / eta -
         (g_at_min - g_at_zero) * std::pow(-w.t_min, -eta) / eta;
}

namespace {

QuadratureSpec as_quadrature(const TGridSpec& g) {
  QuadratureSpec q;
  q.panel_order = g.panel_order;
  q.grading_ratio = g.ratio;
  q.grading_levels = g.levels;
  return q;
}

double weight(double t, double eta) {
  return (t > 0 ? 1.0 : -1.0) * std::pow(std::abs(t), -1.0 - eta);
}

// int over the window of sgn(t)|t|^{-1-eta} [G(t) - G(0)] dt, graded toward 0 and
// toward the interior points in `breaks` (where G has root-type kinks).
template <class G>
double window_integral(G&& g, double g0, const ParameterWindow& w, std::vector<double> breaks,
                       double eta, const QuadratureSpec& q) {
  breaks.push_back(0.0);
  breaks.push_back(w.t_min);
  breaks.push_back(w.t_max);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<double> pts;
  for (double b : breaks) {
    if (b >= w.t_min && b <= w.t_max) pts.push_back(b);
  }
  auto f = [&](double base, double off) {
    const double t = base + off;
    if (t == 0.0) return 0.0;
    // Near t = 0 use the exact offset so |t| below rounding of base stays exact.
    const double tt = base == 0.0 ? off : t;
    return weight(tt, eta) * (g(tt) - g0);
  };
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i];
    const double b = pts[i + 1];
    const bool gl = a != w.t_min;  // interior break or t = 0
    const bool gr = b != w.t_max;
    sum += integrate_graded_local(f, a, b, gl, gr, q);
  }
  return sum;
}

}  // namespace

double frozen_kernel(const UnimodalFamily& family, const DensityModel& model, double eta, double x,
                     const TGridSpec& tgrid, KernelRoute route) {
  if (!(eta >= 0.0 && eta < 0.5)) {
    throw DomainError(fmt::format("frozen_kernel: eta={} outside [0, 1/2)", eta));
  }
  if (eta == 0.0) return 0.0;
  if (route != KernelRoute::Direct && family.kind() != FamilyKind::Quadratic) {
    throw UnsupportedError("frozen_kernel: invariant/shift routes need the quadratic family");
  }
  const auto& w = family.window();
  const auto orbit = critical_orbit(family, 0.0, model.K + 1);
  std::vector<double> anchors;
  for (int k = 1; k <= model.K + 1; ++k) anchors.push_back(orbit.c(k));
  for (const auto& g : model.groups) anchors.push_back(g.anchor);
  auto rho = [&](double y) { return model.eval(y); };
  const std::function<double(double)> rho_fn = rho;
  const double crit0 = family.eval(0.0, 0.0);
  auto G = [&](double tau) -> double {
    switch (route) {
      case KernelRoute::Invariant:
        return rho(x - tau);
      case KernelRoute::Shift: {
        const double y = x - tau;
        if (y >= crit0) return 0.0;
        return transfer_pointwise(family, 0.0, rho_fn, y);
      }
      case KernelRoute::Direct: {
        if (x >= family.eval(tau, 0.0)) return 0.0;
        return transfer_pointwise(family, tau, rho_fn, x);
      }
    }
    return 0.0;
  };
  std::vector<double> breaks;
  for (double a : anchors) {
    const double tb = x - a;
    for (double edge : {0.0, w.t_min, w.t_max}) {
      if (std::abs(tb - edge) <= 1e-14 * (1.0 + std::abs(x))) {
        throw SingularityError(fmt::format(
            "frozen_kernel: x={} aligns with the singular point {} at t={}", x, a, edge));
      }
    }
    if (tb > w.t_min && tb < w.t_max) breaks.push_back(tb);
  }
  const double g0 = G(0.0);
  const double body = window_integral(G, g0, w, breaks, eta, as_quadrature(tgrid));
  const double tails = clamped_tail(G(w.t_min), g0, G(w.t_max), w, eta);
  return marchaud_prefactor(eta) * (body + tails);
}

// ------------------------------------------------------------ series

SeriesEvaluation evaluate_series(const CoefficientSequence& seq, const DecayFit* fit,
                                 std::complex<double> z) {
  if (seq.values.empty()) throw DomainError("evaluate_series: empty sequence");
  SeriesEvaluation ev;
  ev.z = z;
  ev.J = seq.J();
  std::complex<double> acc = 0.0;
  for (auto it = seq.values.rbegin(); it != seq.values.rend(); ++it) acc = acc * z + *it;
  ev.value = acc;
  const double az = std::abs(z);
  if (fit != nullptr && fit->theta * az < 1.0) {
    const double q = fit->theta * az;
    ev.tail_bound = fit->C * std::pow(q, ev.J + 1) / (1.0 - q);
    ev.divergent_bound = false;
  } else {
    ev.tail_bound = std::numeric_limits<double>::infinity();
    ev.divergent_bound = true;
  }
  return ev;
}

RadiusEstimate radius_estimate(const CoefficientSequence& seq, int j_lo, int j_hi) {
  RadiusEstimate r;
  r.j_lo = std::max(1, j_lo);
  r.j_hi = std::min(j_hi, seq.J());
  double amax = 0.0;
  for (double a : seq.values) amax = std::max(amax, std::abs(a));
  if (amax == 0.0) {
    r.radius = std::numeric_limits<double>::infinity();
    r.ratio_test = std::numeric_limits<double>::infinity();
    return r;
  }
  const double floor = kNoiseFloor * amax;
  // log|a_j| / j = log(theta) + log(C) / j: the intercept in 1/j is the root-test limit.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  std::vector<double> ratios;
  for (int j = r.j_lo; j <= r.j_hi; ++j) {
    const double a = std::abs(seq.values[static_cast<std::size_t>(j)]);
    if (!(a > floor)) continue;
    const double x = 1.0 / j;
    const double y = std::log(a) / j;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
    if (j + 1 <= r.j_hi) {
      const double b = std::abs(seq.values[static_cast<std::size_t>(j + 1)]);
      if (b > floor) ratios.push_back(a / b);
    }
  }
  if (n < 8) {
    throw InsufficientDataError(fmt::format(
        "radius_estimate: {} usable coefficients in [{}, {}], need 8", n, r.j_lo, r.j_hi));
  }
  const double cxx = sxx - sx * sx / n;
  const double slope = cxx > 0.0 ? (sxy - sx * sy / n) / cxx : 0.0;
  const double intercept = (sy - slope * sx) / n;
  r.radius = std::exp(-intercept);
  r.points = n;
  if (!ratios.empty()) {
    std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
    r.ratio_test = ratios[ratios.size() / 2];
  }
  return r;
}

RadiusEstimate radius_estimate(const CoefficientSequence& seq) {
  return radius_estimate(seq, 5, seq.J() - 2);
}

// ------------------------------------------------------------ engine

SusceptibilityEngine::SusceptibilityEngine(const UnimodalFamily& family, const DensityModel& model,
                                           std::shared_ptr<const UlamOperator> ulam, int j_switch,
                                           QuadratureSpec xspec)
    : family_(family), model_(model), ulam_(std::move(ulam)), j_switch_(j_switch), xspec_(xspec) {
  if (!ulam_) throw DomainError("SusceptibilityEngine: missing Ulam operator");
  xspec_.validate();
}

double SusceptibilityEngine::pushed_cumulative(double tau, double x) const {
  // Mass of L_{t0+tau} rho below x.
  if (family_.kind() == FamilyKind::Quadratic) {
    // Shift identity: L_{t0+tau} g(x) = L_{t0} g(x - tau), and L_{t0} rho = rho.
    return model_.cumulative(x - tau);
  }
  const double total = model_.mass();
  const auto lo_hi = model_.as_atom_sum().support();
  const auto pre = family_.preimage(tau, x, 1);
  if (!pre) return total;
  const double y = pre->y;
  return model_.cumulative(-y) + (model_.cumulative(lo_hi.second) - model_.cumulative(y));
}

std::vector<double> SusceptibilityEngine::transfer_difference(double t) const {
  const double tau = family_.clamp_offset(t);
  const auto& grid = ulam_->grid;
  std::vector<double> edge(grid.n + 1);
  for (std::size_t i = 0; i <= grid.n; ++i) {
    const double x = grid.edge(i);
    edge[i] = pushed_cumulative(tau, x) - pushed_cumulative(0.0, x);
  }
  std::vector<double> d(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) d[i] = edge[i + 1] - edge[i];
  return d;
}

const std::vector<double>& SusceptibilityEngine::response_masses(double eta) {
  const std::string key = fmt::format("response|{:.17g}", eta);
  {
    std::lock_guard lock(mutex_);
    if (auto it = kernels_.find(key); it != kernels_.end()) return it->second;
  }
  const auto& grid = ulam_->grid;
  std::vector<double> masses(grid.n, 0.0);
  if (eta > 0.0) {
    // int_{x_i}^{x_{i+1}} M^eta rho = (J(x_{i+1}) - J(x_i)) / 2 with J = I_+^{1-eta} rho + I_-^{1-eta} rho.
    const AtomSum rho = model_.as_atom_sum();
    const auto J = tabulate(
        grid.n + 1,
        [&](std::size_t i) {
          const double x = grid.edge(i);
          return frac_integral_whole_line(rho, 1.0 - eta, Side::Plus, x, xspec_) +
                 frac_integral_whole_line(rho, 1.0 - eta, Side::Minus, x, xspec_);
        },
        Exec::Parallel);
    for (std::size_t i = 0; i < grid.n; ++i) masses[i] = 0.5 * (J[i + 1] - J[i]);
  }
  std::lock_guard lock(mutex_);
  return kernels_.emplace(key, std::move(masses)).first->second;
}

const std::vector<double>& SusceptibilityEngine::frozen_masses(double eta, const TGridSpec& tgrid,
                                                                bool tails) {
  const std::string key = fmt::format("frozen|{:.17g}|{:.17g}|{}|{}|{}", eta, tgrid.ratio,
                                      tgrid.levels, tgrid.panel_order, tails);
  {
    std::lock_guard lock(mutex_);
    if (auto it = kernels_.find(key); it != kernels_.end()) return it->second;
  }
  const auto& grid = ulam_->grid;
  const auto& w = family_.window();
  std::vector<double> masses(grid.n, 0.0);
  if (eta > 0.0) {
    std::vector<double> anchors;
    if (family_.kind() == FamilyKind::Quadratic) {
      for (const auto& g : model_.groups) anchors.push_back(g.anchor);
    }
    const auto q = as_quadrature(tgrid);
    // Q(x) = int w(t) [F_t(x) - F_0(x)] dt; the kernel's cell integrals are differences of Q.
    const auto Q = tabulate(
        grid.n + 1,
        [&](std::size_t i) {
          const double x = grid.edge(i);
          const double f0 = pushed_cumulative(0.0, x);
          auto F = [&](double tau) { return pushed_cumulative(family_.clamp_offset(tau), x); };
          std::vector<double> breaks;
          for (double a : anchors) breaks.push_back(x - a);
          double v = window_integral(F, f0, w, breaks, eta, q);
          if (tails) v += clamped_tail(F(w.t_min), f0, F(w.t_max), w, eta);
          return v;
        },
        Exec::Parallel);
    const double pref = marchaud_prefactor(eta);
    for (std::size_t i = 0; i < grid.n; ++i) masses[i] = pref * (Q[i + 1] - Q[i]);
  }
  std::lock_guard lock(mutex_);
  return kernels_.emplace(key, std::move(masses)).first->second;
}

const KoopmanTable& SusceptibilityEngine::koopman(const Observable& phi, int J) {
  const std::string key = fmt::format("{}|{}", phi.description, J);
  {
    std::lock_guard lock(mutex_);
    if (auto it = tables_.find(key); it != tables_.end()) return *it->second;
  }
  auto table = std::make_shared<KoopmanTable>(koopman_table(family_, 0.0, *ulam_, phi, J, j_switch_));
  std::lock_guard lock(mutex_);
  return *tables_.emplace(key, std::move(table)).first->second;
}

CoefficientSequence SusceptibilityEngine::semifreddo(const SusceptibilityRequest& req,
                                                     const KoopmanTable& table) {
  const int J = table.J();
  std::vector<double> acc(static_cast<std::size_t>(J + 1), 0.0);
  std::vector<double> acc_ulam(static_cast<std::size_t>(std::min(J, table.j_switch) + 1), 0.0);
  const auto& g = req.tgrid;
  const GaussRule& rule = gauss_legendre(g.panel_order);

  // Vector of correlations of the transfer difference at t against every Koopman vector.
  auto correlations = [&](double t, std::vector<double>& out, std::vector<double>& out_u) {
    const auto d = transfer_difference(t);
    for (int j = 0; j <= J; ++j) out[static_cast<std::size_t>(j)] = dot(d, table.primary(j), Exec::Serial);
    for (std::size_t j = 0; j < out_u.size(); ++j) out_u[j] = dot(d, table.ulam[j], Exec::Serial);
  };
  // Signed integral of the weighted correlations over [lo, hi] (lo < hi); panel
  // nodes are listed first so the t-loop can run in parallel.
  auto integrate = [&](double lo, double hi, bool graded_at_lo, bool graded_at_hi) {
    struct Panel {
      double a, b;
      int level;  // geometric level, -1 for ungraded
    };
    std::vector<Panel> panels;
    auto add_graded = [&](double anchor, double len) {
      double outer = 1.0;
      for (int k = 0; k < g.levels; ++k) {
        const double inner = outer * g.ratio;
        for (int s = 0; s < g.subpanels; ++s) {
          const double o0 = inner + (outer - inner) * s / g.subpanels;
          const double o1 = inner + (outer - inner) * (s + 1) / g.subpanels;
          const double p = anchor + len * o0;
          const double q = anchor + len * o1;
          panels.push_back({std::min(p, q), std::max(p, q), k});
        }
        outer = inner;
      }
    };
    if (graded_at_lo && graded_at_hi) {
      const double m = 0.5 * (hi - lo);
      add_graded(lo, m);
      add_graded(hi, -m);
    } else if (graded_at_lo) {
      add_graded(lo, hi - lo);
    } else if (graded_at_hi) {
      add_graded(hi, lo - hi);
    } else {
      const int n = g.levels * g.subpanels;
      for (int k = 0; k < n; ++k) panels.push_back({lo + (hi - lo) * k / n, lo + (hi - lo) * (k + 1) / n, -1});
    }
    const std::size_t nodes_per = rule.nodes.size();
    const std::size_t total = panels.size() * nodes_per;
    const std::size_t width = static_cast<std::size_t>(J + 1) + acc_ulam.size();
    std::vector<double> contrib(total * width);
    const auto m = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(dynamic, 4) num_threads(thread_limit())
    for (std::ptrdiff_t idx = 0; idx < m; ++idx) {
      const auto& p = panels[static_cast<std::size_t>(idx) / nodes_per];
      const std::size_t node = static_cast<std::size_t>(idx) % nodes_per;
      const double half = 0.5 * (p.b - p.a);
      const double t = 0.5 * (p.a + p.b) + half * rule.nodes[node];
      const double wt = rule.weights[node] * half * weight(t, req.eta);
      std::vector<double> c(static_cast<std::size_t>(J + 1)), cu(acc_ulam.size());
      correlations(t, c, cu);
      double* row = &contrib[static_cast<std::size_t>(idx) * width];
      for (std::size_t j = 0; j < c.size(); ++j) row[j] = wt * c[j];
      for (std::size_t j = 0; j < cu.size(); ++j) row[c.size() + j] = wt * cu[j];
    }
    // Serial, ordered reduction; per-level sums kept for the geometric remainder.
    std::vector<double> sum(width, 0.0);
    std::map<std::pair<int, int>, std::vector<double>> level_sums;  // (side, level)
    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
      const int side = (graded_at_lo && graded_at_hi && pi >= panels.size() / 2) ? 1 : 0;
      auto& ls = level_sums[{side, panels[pi].level}];
      ls.resize(width, 0.0);
      for (std::size_t node = 0; node < nodes_per; ++node) {
        const double* row = &contrib[(pi * nodes_per + node) * width];
        for (std::size_t j = 0; j < width; ++j) {
          sum[j] += row[j];
          ls[j] += row[j];
        }
      }
    }
    if (graded_at_lo || graded_at_hi) {
      for (int side = 0; side < 2; ++side) {
        auto last = level_sums.find({side, g.levels - 1});
        auto prev = level_sums.find({side, g.levels - 2});
        if (last == level_sums.end() || prev == level_sums.end()) continue;
        for (std::size_t j = 0; j < width; ++j) {
          const double r = prev->second[j] != 0.0 ? last->second[j] / prev->second[j] : 0.0;
          if (r > 0.0 && r < 1.0) sum[j] += last->second[j] * r / (1.0 - r);
        }
      }
    }
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += sum[j];
    for (std::size_t j = 0; j < acc_ulam.size(); ++j) acc_ulam[j] += sum[acc.size() + j];
  };

  for (const auto& [lo, hi] : req.omega.intervals) {
    if (lo < 0.0 && hi > 0.0) {
      integrate(lo, 0.0, false, true);
      integrate(0.0, hi, true, false);
    } else {
      integrate(lo, hi, lo == 0.0, hi == 0.0);
    }
  }
  const double pref = marchaud_prefactor(req.eta);
  CoefficientSequence seq;
  seq.observable = table.observable;
  for (int j = 0; j <= J; ++j) {
    seq.values.push_back(pref * acc[static_cast<std::size_t>(j)]);
    const bool quad = static_cast<std::size_t>(j) < acc_ulam.size() && j <= table.j_switch &&
                      static_cast<std::size_t>(j) < table.exact.size();
    seq.methods.push_back(quad ? CorrelationMethod::Quadrature : CorrelationMethod::Ulam);
    if (quad) {
      seq.ulam_check.emplace_back(pref * acc_ulam[static_cast<std::size_t>(j)]);
    } else {
      seq.ulam_check.emplace_back(std::nullopt);
    }
  }
  return seq;
}

CoefficientSequence SusceptibilityEngine::coefficients(const SusceptibilityRequest& req) {
  req.validate(family_.window());
  const auto& table = koopman(req.phi, req.J);
  CoefficientSequence seq;
  switch (req.kind) {
    case SusceptibilityKind::Response: {
      seq = binned_sequence(table, response_masses(req.eta));
      // Leading minus sign of the response series.
      for (auto& v : seq.values) v = -v;
      for (auto& u : seq.ulam_check) {
        if (u) *u = -*u;
      }
      break;
    }
    case SusceptibilityKind::Frozen:
      seq = binned_sequence(table, frozen_masses(req.eta, req.tgrid, true));
      break;
    case SusceptibilityKind::Semifreddo:
      if (req.eta == 0.0 || req.omega.empty()) {
        seq = binned_sequence(table, std::vector<double>(table.grid.n, 0.0));
      } else {
        seq = semifreddo(req, table);
      }
      break;
  }
  seq.eta = req.eta;
  seq.kind = to_string(req.kind);
  seq.observable = req.phi.description;
  return seq;
}

}  // namespace fracsus

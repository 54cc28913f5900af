#include "fracsus/density.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "fracsus/errors.hpp"

namespace fracsus {

// ------------------------------------------------------------------ grid

double BinGrid::edge(std::size_t i) const noexcept {
  if (i >= n) return hi;
  return lo + static_cast<double>(i) * width();
}

std::size_t BinGrid::locate(double x) const noexcept {
  if (!(x > lo)) return 0;
  const auto i = static_cast<std::size_t>((x - lo) / width());
  return std::min(i, n - 1);
}

std::vector<double> BinGrid::edges() const {
  std::vector<double> e(n + 1);
  for (std::size_t i = 0; i <= n; ++i) e[i] = edge(i);
  return e;
}

// ------------------------------------------------------------- transfer

double transfer_pointwise(const UnimodalFamily& family, double t,
                          const std::function<double(double)>& g, double x) {
  if (!std::isfinite(x)) throw DomainError("transfer_pointwise: non-finite x");
  const double crit = family.eval(t, 0.0);
  if (x == crit) {
    throw SingularityError(fmt::format("transfer_pointwise: x={} is the critical value", x));
  }
  if (x > crit) {
    throw DomainError(fmt::format(
        "transfer_pointwise: x={} lies above the critical value {}; no preimage", x, crit));
  }
  double sum = 0.0;
  for (int branch : {1, -1}) {
    const auto pre = family.preimage(t, x, branch);
    if (!pre) continue;
    sum += g(pre->y) / pre->abs_derivative;
  }
  return sum;
}

// ----------------------------------------------------------------- Ulam

void UlamOperator::density_action(std::span<const double> in, std::span<double> out,
                                  Exec exec) const {
  if (exec == Exec::Serial) {
    spmv_transpose_serial(forward, in, out);
  } else {
    spmv_transpose(transpose, in, out, exec);
  }
}

void UlamOperator::koopman_action(std::span<const double> in, std::span<double> out,
                                  Exec exec) const {
  spmv(forward, in, out, exec);
}

double UlamOperator::max_row_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < forward.rows; ++i) {
    worst = std::max(worst, std::abs(forward.row_sum(i) - 1.0));
  }
  return worst;
}

UlamOperator build_ulam(const UnimodalFamily& family, double t, std::size_t N, Exec exec) {
  if (N < 16) throw DomainError(fmt::format("build_ulam: N={} < 16", N));
  if (N > (std::size_t{1} << 31)) throw DomainError("build_ulam: N too large");
  const double beta = family.half_width(t);
  const double crit = family.eval(t, 0.0);
  if (crit > beta * (1.0 + 1e-12)) {
    throw DomainError(fmt::format(
        "build_ulam: critical value {} exceeds the interval half width {}; mass would escape",
        crit, beta));
  }
  UlamOperator op;
  op.grid = BinGrid{-beta, beta, N};
  op.t = t;
  const BinGrid grid = op.grid;
  const double h = grid.width();

  // Preimage of the level v on one branch, clipped to the interval.
  auto inverse = [&](double v, int branch) {
    const auto pre = family.preimage(t, v, branch);
    if (!pre) return 0.0;
    return std::clamp(pre->y, -beta, beta);
  };

  auto fill = [&](std::size_t i, RowEntries& row) {
    const double a = grid.edge(i);
    const double b = grid.edge(i + 1);
    std::map<std::uint32_t, double> acc;
    auto piece = [&](double u, double v, int branch) {
      if (!(v > u)) return;
      double y0 = family.eval(t, u);
      double y1 = family.eval(t, v);
      const double img_lo = std::min(y0, y1);
      const double img_hi = std::max(y0, y1);
      const std::size_t j0 = grid.locate(img_lo);
      const std::size_t j1 = grid.locate(img_hi);
      for (std::size_t j = j0; j <= j1; ++j) {
        const double p = inverse(grid.edge(j), branch);
        const double q = inverse(grid.edge(j + 1), branch);
        const double lo = std::max(u, std::min(p, q));
        const double hi = std::min(v, std::max(p, q));
        if (hi > lo) acc[static_cast<std::uint32_t>(j)] += (hi - lo) / h;
      }
    };
    if (b <= 0.0) {
      piece(a, b, -1);
    } else if (a >= 0.0) {
      piece(a, b, 1);
    } else {
      piece(a, 0.0, -1);
      piece(0.0, b, 1);
    }
    row.reserve(acc.size());
    for (const auto& [j, v] : acc) row.emplace_back(j, v);
  };
  op.forward = build_csr(N, N, fill, exec);
  op.transpose = op.forward.transposed();
  return op;
}

InvariantDensity invariant_density_ulam(const UlamOperator& op, int iters, double tol, Exec exec) {
  if (iters < 1) throw DomainError("invariant_density_ulam: iters must be >= 1");
  if (!(tol > 0.0)) throw DomainError("invariant_density_ulam: tol must be positive");
  const std::size_t n = op.grid.n;
  std::vector<double> m(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  double residual = 0.0;
  int it = 0;
  for (; it < iters; ++it) {
    op.density_action(m, next, exec);
    residual = l1_distance(m, next, exec);
    m.swap(next);
    if (residual < tol) break;
  }
  if (it == iters) {
    throw ConvergenceError(
        fmt::format("invariant_density_ulam: no convergence after {} iterations (L1 change {:.3e})",
                    iters, residual),
        residual);
  }
  double mass = 0.0;
  for (double v : m) mass += v;
  const double h = op.grid.width();
  for (double& v : m) v /= (mass * h);
  return InvariantDensity{GridFunction(op.grid.lo, op.grid.hi, std::move(m)), it + 1, residual};
}

// ----------------------------------------------------------- bin helpers

std::vector<double> bin_masses(const AtomSum& g, const BinGrid& grid) {
  std::vector<double> out(grid.n);
  double prev = g.cumulative(grid.edge(0));
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double next = g.cumulative(grid.edge(i + 1));
    out[i] = next - prev;
    prev = next;
  }
  return out;
}

std::vector<double> bin_masses(const DensityModel& model, const BinGrid& grid) {
  return bin_masses(model.as_atom_sum(), grid);
}

double DensityModel::mass() const {
  const auto [lo, hi] = as_atom_sum().support();
  return cumulative(hi) - cumulative(lo);
}

AtomSum DensityModel::as_atom_sum() const {
  AtomSum s = spikes;
  s.smooth_part = smooth;
  return s;
}

double DensityModel::spike_law_constant() const {
  double c = 0.0;
  for (const auto& r : per_k) c = std::max(c, std::abs(r.c0) * std::sqrt(r.abs_derivative));
  return c;
}

// ------------------------------------------------------ spike decomposition

namespace {

// Householder least squares; returns coefficients and the residual sum of squares.
std::vector<double> least_squares(std::vector<std::vector<double>> cols, std::vector<double> y,
                                  double& rss) {
  const std::size_t m = y.size();
  const std::size_t p = cols.size();
  if (m < p) throw InsufficientDataError("least_squares: fewer rows than unknowns");
  for (std::size_t k = 0; k < p; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < m; ++i) norm += cols[k][i] * cols[k][i];
    norm = std::sqrt(norm);
    if (norm == 0.0) throw QualityError("least_squares: rank-deficient design");
    const double alpha = cols[k][k] > 0 ? -norm : norm;
    std::vector<double> v(m, 0.0);
    for (std::size_t i = k; i < m; ++i) v[i] = cols[k][i];
    v[k] -= alpha;
    double vv = 0.0;
    for (std::size_t i = k; i < m; ++i) vv += v[i] * v[i];
    if (vv == 0.0) continue;
    auto reflect = [&](std::vector<double>& c) {
      double d = 0.0;
      for (std::size_t i = k; i < m; ++i) d += v[i] * c[i];
      const double f = 2.0 * d / vv;
      for (std::size_t i = k; i < m; ++i) c[i] -= f * v[i];
    };
    for (std::size_t j = k; j < p; ++j) reflect(cols[j]);
    reflect(y);
  }
  std::vector<double> x(p, 0.0);
  for (std::size_t k = p; k-- > 0;) {
    double s = y[k];
    for (std::size_t j = k + 1; j < p; ++j) s -= cols[j][k] * x[j];
    if (std::abs(cols[k][k]) < 1e-300) throw QualityError("least_squares: singular design");
    x[k] = s / cols[k][k];
  }
  rss = 0.0;
  for (std::size_t i = p; i < m; ++i) rss += y[i] * y[i];
  return x;
}

struct WindowFit {
  std::map<int, std::pair<double, double>> amplitudes;  // side -> (C0, C1)
  double r2 = 0.0;
};

// Joint fit of spikes on the given sides plus a local polynomial background
// to the bin averages of the density inside [a - w, a + w].
WindowFit fit_window(const GridFunction& dens, double a, double w, const std::vector<Side>& sides,
                     const SpikeOptions& opts) {
  const std::size_t n = dens.size();
  const double h = dens.cell_width();
  const BinGrid grid{dens.lo(), dens.hi(), n};
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double e0 = grid.edge(i);
    const double e1 = grid.edge(i + 1);
    if (e0 < a - w || e1 > a + w) continue;
    const double gap = (e0 >= a) ? e0 - a : (e1 <= a ? a - e1 : -1.0);
    if (gap < opts.exclude_cells * h) continue;
    rows.push_back(i);
  }
  std::vector<std::vector<double>> cols;
  for (Side s : sides) {
    for (double beta : {-0.5, 0.5}) {
      const PowerAtom atom{1.0, beta, a, s, w};
      std::vector<double> c;
      for (auto i : rows) c.push_back(atom.integral(grid.edge(i), grid.edge(i + 1)) / h);
      cols.push_back(std::move(c));
    }
  }
  for (int k = 0; k <= opts.poly_degree; ++k) {
    std::vector<double> c;
    for (auto i : rows) {
      const double u0 = (grid.edge(i) - a) / w;
      const double u1 = (grid.edge(i + 1) - a) / w;
      c.push_back((std::pow(u1, k + 1) - std::pow(u0, k + 1)) / ((k + 1) * (u1 - u0)));
    }
    cols.push_back(std::move(c));
  }
  if (rows.size() < cols.size() + 3) {
    throw QualityError(fmt::format(
        "spike_decomposition: fit window at c={:.6g} holds {} cells, too few for {} unknowns", a,
        rows.size(), cols.size()));
  }
  std::vector<double> y;
  for (auto i : rows) y.push_back(dens.values()[i]);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double tss = 0.0;
  for (double v : y) tss += (v - mean) * (v - mean);
  double rss = 0.0;
  const auto coef = least_squares(cols, y, rss);
  WindowFit fit;
  for (std::size_t s = 0; s < sides.size(); ++s) {
    fit.amplitudes[sign_of(sides[s])] = {coef[2 * s], coef[2 * s + 1]};
  }
  fit.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  return fit;
}

}  // namespace

DensityModel spike_decomposition(const UnimodalFamily& family, double t, int K,
                                 const GridFunction& dens, const SpikeOptions& opts) {
  if (K < 1) throw DomainError("spike_decomposition: K must be >= 1");
  const double h = dens.cell_width();
  const double lo = dens.lo();
  const double hi = dens.hi();
  const double tol = 0.25 * h;

  const auto mt = detect_mt(family, t, std::max(K, 16));
  int K_eff = K;
  int cycle_step = 0;      // same-side recurrence length q
  double cycle_ratio = 0;  // |D| growth over q steps
  if (mt) {
    cycle_step = mt->signed_multiplier > 0 ? mt->period : 2 * mt->period;
    cycle_ratio = std::pow(mt->multiplier, static_cast<double>(cycle_step) / mt->period);
    // Make sure every (cycle point, side) pair has a member.
    K_eff = std::max(K, mt->preperiod + cycle_step - 1);
  }
  const auto orbit = critical_orbit(family, t, K_eff);

  DensityModel model{AtomSum{}, dens, K_eff, {}, {}, mt, 0.0};
  for (int k = 1; k <= K_eff; ++k) {
    SpikeRecord r;
    r.k = k;
    r.anchor = orbit.c(k);
    r.sigma = orbit.sigma(k);
    if (r.sigma == 0) throw DegenerateOrbitError(fmt::format("spike_decomposition: D_{} = 0", k));
    // The image of a fold at c_k lies on the side opposite to sgn D_k.
    r.side = r.sigma > 0 ? Side::Minus : Side::Plus;
    r.side_matches_sigma = sign_of(r.side) == r.sigma;
    r.abs_derivative = std::abs(orbit.d(k));
    model.per_k.push_back(r);
  }

  // Groups keyed by (anchor, side).
  for (auto& r : model.per_k) {
    std::size_t g = 0;
    for (; g < model.groups.size(); ++g) {
      if (std::abs(model.groups[g].anchor - r.anchor) <= tol && model.groups[g].side == r.side) break;
    }
    if (g == model.groups.size()) {
      SpikeGroup grp;
      grp.anchor = r.anchor;
      grp.side = r.side;
      model.groups.push_back(grp);
    }
    r.group = g;
    model.groups[g].members.push_back(r.k);
  }
  for (auto& grp : model.groups) {
    double wsum = 0.0;
    for (int k : grp.members) wsum += 1.0 / std::sqrt(model.per_k[static_cast<std::size_t>(k - 1)].abs_derivative);
    const int last = grp.members.back();
    if (mt && last >= mt->preperiod) {
      const double w_last = 1.0 / std::sqrt(model.per_k[static_cast<std::size_t>(last - 1)].abs_derivative);
      const double r = 1.0 / std::sqrt(cycle_ratio);
      wsum += w_last * r / (1.0 - r);
    }
    grp.weight_sum = wsum;
  }

  // Distinct anchor points, widths and windows.
  std::vector<double> points;
  for (const auto& grp : model.groups) {
    bool seen = false;
    for (double p : points) seen |= std::abs(p - grp.anchor) <= tol;
    if (!seen) points.push_back(grp.anchor);
  }
  auto width_at = [&](double a) {
    double d = kInf;
    for (double p : points) {
      if (std::abs(p - a) > tol) d = std::min(d, std::abs(p - a));
    }
    for (double e : {lo, hi}) {
      if (std::abs(e - a) > tol) d = std::min(d, std::abs(e - a));
    }
    return std::min(opts.width_cap, 0.5 * d);
  };

  double dominant = -1.0;
  for (double a : points) {
    const double w = width_at(a);
    std::vector<std::size_t> here;
    std::vector<Side> sides;
    for (std::size_t g = 0; g < model.groups.size(); ++g) {
      if (std::abs(model.groups[g].anchor - a) <= tol) {
        here.push_back(g);
        sides.push_back(model.groups[g].side);
      }
    }
    const auto fit = fit_window(dens, a, w, sides, opts);
    // Two-sided trial fit for the empirical side, when both sides have data.
    std::optional<Side> empirical;
    if (a - w > lo + tol && a + w < hi - tol) {
      const auto trial = fit_window(dens, a, w, {Side::Plus, Side::Minus}, opts);
      const double p = std::abs(trial.amplitudes.at(1).first);
      const double m = std::abs(trial.amplitudes.at(-1).first);
      empirical = p >= m ? Side::Plus : Side::Minus;
    } else {
      empirical = a - w <= lo + tol ? Side::Plus : Side::Minus;
    }
    for (std::size_t g : here) {
      auto& grp = model.groups[g];
      grp.width = w;
      grp.total0 = fit.amplitudes.at(sign_of(grp.side)).first;
      grp.total1 = fit.amplitudes.at(sign_of(grp.side)).second;
      grp.r2 = fit.r2;
      grp.empirical_side = empirical;
      if (std::abs(grp.total0) > dominant) {
        dominant = std::abs(grp.total0);
        model.dominant_r2 = fit.r2;
      }
    }
  }
  if (model.dominant_r2 < opts.min_r2) {
    throw QualityError(fmt::format(
        "spike_decomposition: amplitude fit at the dominant spike has r2={:.4f} < {}",
        model.dominant_r2, opts.min_r2));
  }

  for (auto& r : model.per_k) {
    const auto& grp = model.groups[r.group];
    const double share = (1.0 / std::sqrt(r.abs_derivative)) / grp.weight_sum;
    r.width = grp.width;
    r.c0 = grp.total0 * share;
    r.c1 = grp.total1 * share;
  }
  for (const auto& grp : model.groups) {
    model.spikes.atoms.push_back(PowerAtom{grp.total0, -0.5, grp.anchor, grp.side, grp.width});
    model.spikes.atoms.push_back(PowerAtom{grp.total1, 0.5, grp.anchor, grp.side, grp.width});
  }

  // Smooth remainder from bin averages, then clipped around each anchor.
  const BinGrid grid{lo, hi, dens.size()};
  const auto spike_mass = bin_masses(model.spikes, grid);
  std::vector<double> smooth(dens.values());
  for (std::size_t i = 0; i < smooth.size(); ++i) smooth[i] -= spike_mass[i] / h;
  const auto n = static_cast<std::ptrdiff_t>(smooth.size());
  for (double a : points) {
    const auto ia = static_cast<std::ptrdiff_t>(grid.locate(a));
    const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, ia - opts.clip_cells);
    const std::ptrdiff_t i1 = std::min<std::ptrdiff_t>(n - 1, ia + opts.clip_cells);
    const bool has_left = i0 > 0;
    const bool has_right = i1 < n - 1;
    if (!has_left && !has_right) continue;
    const double vl = has_left ? smooth[static_cast<std::size_t>(i0 - 1)] : 0.0;
    const double vr = has_right ? smooth[static_cast<std::size_t>(i1 + 1)] : 0.0;
    for (std::ptrdiff_t i = i0; i <= i1; ++i) {
      double v;
      if (has_left && has_right) {
        const double s = static_cast<double>(i - (i0 - 1)) / static_cast<double>(i1 + 1 - (i0 - 1));
        v = vl + s * (vr - vl);
      } else {
        v = has_left ? vl : vr;
      }
      smooth[static_cast<std::size_t>(i)] = v;
    }
  }
  model.smooth = GridFunction(lo, hi, std::move(smooth));

  // Ulam under-resolves the spikes, so the fitted atoms plus the clipped
  // remainder carry a little extra mass; rescale the whole model to mass 1.
  const double scale = 1.0 / model.mass();
  for (auto& atom : model.spikes.atoms) atom.coefficient *= scale;
  for (auto& grp : model.groups) {
    grp.total0 *= scale;
    grp.total1 *= scale;
  }
  for (auto& r : model.per_k) {
    r.c0 *= scale;
    r.c1 *= scale;
  }
  std::vector<double> scaled(model.smooth.values());
  for (double& v : scaled) v *= scale;
  model.smooth = GridFunction(lo, hi, std::move(scaled));
  return model;
}

double spike_law_slope(const DensityModel& model, int kmax) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& r : model.per_k) {
    if (r.k > kmax) continue;
    if (!(std::abs(r.c0) > 0.0)) throw QualityError("spike_law_slope: zero amplitude");
    const double x = -0.5 * std::log(r.abs_derivative);
    const double y = std::log(std::abs(r.c0));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  const double cxx = sxx - sx * sx / n;
  if (n < 2 || cxx <= 0.0) throw InsufficientDataError("spike_law_slope: need two distinct |D_k|");
  return (sxy - sx * sy / n) / cxx;
}

double marchaud_of_density(const DensityModel& model, double eta, double x,
                           const QuadratureSpec& spec) {
  if (!(eta >= 0.0 && eta < 0.5)) {
    throw DomainError(fmt::format("marchaud_of_density: eta={} outside [0, 1/2)", eta));
  }
  return marchaud_numeric(model.as_atom_sum(), eta, MarchaudSide::TwoSided, x, spec);
}

double chebyshev_density(double x) noexcept {
  if (!(x > -2.0 && x < 2.0)) return 0.0;
  return 1.0 / (std::numbers::pi * std::sqrt((2.0 - x) * (2.0 + x)));
}

double chebyshev_cumulative(double x) noexcept {
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  return 0.5 + std::asin(0.5 * x) / std::numbers::pi;
}

DensityModel chebyshev_model(const UnimodalFamily& family, std::size_t n) {
  if (family.kind() != FamilyKind::Quadratic || family.t0() != 2.0) {
    throw DomainError("chebyshev_model: needs the quadratic family at t0 = 2");
  }
  if (n < 16) throw DomainError("chebyshev_model: n < 16");
  const double pi = std::numbers::pi;
  const double c0 = 1.0 / (2.0 * pi);
  const double c1 = 1.0 / (16.0 * pi);
  // Remainder for x >= 0, u = 2 - x, v = 2 + x; rho - c0 u^{-1/2} rewritten without cancellation.
  auto remainder = [&](double x) {
    x = std::abs(x);
    const double u = 2.0 - x;
    const double v = 2.0 + x;
    const double sv = std::sqrt(v);
    const double su = std::sqrt(u);
    return su / (pi * 2.0 * sv * (2.0 + sv)) - c1 * su - c0 / sv - c1 * sv;
  };
  std::vector<double> vals(n);
  const double h = 4.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -2.0 + (static_cast<double>(i) + 0.5) * h;
    vals[i] = remainder(x);
  }
  // Pair up mirrored cells so the remainder is even to the last bit.
  for (std::size_t i = 0; i < n / 2; ++i) vals[n - 1 - i] = vals[i];

  DensityModel model{AtomSum{}, GridFunction(-2.0, 2.0, std::move(vals)), 2, {}, {}, std::nullopt, 1.0};
  model.mt = detect_mt(family, 0.0, 16);
  model.spikes.atoms = {PowerAtom{c0, -0.5, 2.0, Side::Minus, 4.0}, PowerAtom{c1, 0.5, 2.0, Side::Minus, 4.0},
                        PowerAtom{c0, -0.5, -2.0, Side::Plus, 4.0}, PowerAtom{c1, 0.5, -2.0, Side::Plus, 4.0}};
  SpikeGroup top{2.0, Side::Minus, 4.0, c0, c1, {1}, 1.0, 1.0, Side::Minus};
  // -2 is a fixed point with multiplier 4: members k >= 2 share c0 with weights 2^{-(k-1)}.
  SpikeGroup bottom{-2.0, Side::Plus, 4.0, c0, c1, {2}, 1.0, 1.0, Side::Plus};
  model.groups = {top, bottom};
  model.per_k = {SpikeRecord{1, 2.0, Side::Minus, 1, false, 1.0, 4.0, c0, c1, 0},
                 SpikeRecord{2, -2.0, Side::Plus, -1, false, 4.0, 4.0, 0.5 * c0, 0.5 * c1, 1}};
  return model;
}

}  // namespace fracsus

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fracsus/fraccalc.hpp"
#include "fracsus/kernels.hpp"
#include "fracsus/quadrature.hpp"
#include "fracsus/unimodal.hpp"

namespace fracsus {

// N uniform cells over [lo, hi].
struct BinGrid {
  double lo = -1.0;
  double hi = 1.0;
  std::size_t n = 0;

  double width() const noexcept { return (hi - lo) / static_cast<double>(n); }
  double edge(std::size_t i) const noexcept;
  double center(std::size_t i) const noexcept { return lo + (static_cast<double>(i) + 0.5) * width(); }
  // Index of the cell containing x, clamped into [0, n).
  std::size_t locate(double x) const noexcept;
  std::vector<double> edges() const;
};

// Row-stochastic Ulam matrix P[i][j] = |{x in cell i : f_t(x) in cell j}| / h.
struct UlamOperator {
  BinGrid grid;
  double t = 0.0;
  CsrMatrix forward;    // P
  CsrMatrix transpose;  // P^T, rows gathered by the density action

  // Pushes bin masses forward: out = P^T in.
  void density_action(std::span<const double> in, std::span<double> out,
                      Exec exec = Exec::Parallel) const;
  // Conditional expectation of bin values one step ahead: out = P in.
  void koopman_action(std::span<const double> in, std::span<double> out,
                      Exec exec = Exec::Parallel) const;
  double max_row_defect() const;
};

inline constexpr std::size_t kDefaultUlamBins = 4096;
inline constexpr int kDefaultPowerIterations = 100000;
inline constexpr double kDefaultPowerTolerance = 1e-10;

// (L_t g)(x) = sum over the two preimages y of g(y) / |f_t'(y)|.
double transfer_pointwise(const UnimodalFamily& family, double t,
                          const std::function<double(double)>& g, double x);

UlamOperator build_ulam(const UnimodalFamily& family, double t, std::size_t N,
                        Exec exec = Exec::Parallel);

struct InvariantDensity {
  GridFunction density;  // cell-centred values = bin mass / h
  int iterations = 0;
  double residual = 0.0;  // last L1 change
};

InvariantDensity invariant_density_ulam(const UlamOperator& op, int iters = kDefaultPowerIterations,
                                        double tol = kDefaultPowerTolerance,
                                        Exec exec = Exec::Parallel);

// Spike of one postcritical point in the decomposition
//   rho = psi_0 + sum_k C_{k,0} (s_k(x - c_k))^{-1/2} + C_{k,1} (s_k(x - c_k))^{1/2}
// with both powers truncated at width w_k and s_k the opening side.
struct SpikeRecord {
  int k = 0;
  double anchor = 0.0;
  Side side = Side::Plus;
  int sigma = 1;                  // sgn D_k
  bool side_matches_sigma = false;  // side == sigma literally
  double abs_derivative = 0.0;    // |D_k|
  double width = 0.0;
  double c0 = 0.0;                // C_{k,0}
  double c1 = 0.0;                // C_{k,1}
  std::size_t group = 0;
};

// Postcritical points that coincide (up to the grid resolution) and open to
// the same side carry a single pair of atoms whose amplitudes are shared
// among members in proportion to |D_k|^{-1/2}; on a repelling cycle the
// members beyond K continue geometrically and are summed in closed form.
struct SpikeGroup {
  double anchor = 0.0;
  Side side = Side::Plus;
  double width = 0.0;
  double total0 = 0.0;
  double total1 = 0.0;
  std::vector<int> members;
  double weight_sum = 0.0;  // sum of |D_k|^{-1/2}, continuation included
  double r2 = 0.0;          // quality of the window fit
  std::optional<Side> empirical_side;  // side preferred by a two-sided trial fit
};

struct SpikeOptions {
  int exclude_cells = 3;   // cells next to the anchor left out of the fit
  int clip_cells = 10;     // smooth-part clipping radius
  int poly_degree = 2;     // local background
  double width_cap = 0.5;
  double min_r2 = 0.9;
};

struct DensityModel {
  AtomSum spikes;
  GridFunction smooth;
  int K = 0;
  std::vector<SpikeRecord> per_k;
  std::vector<SpikeGroup> groups;
  std::optional<MTCertificate> mt;
  double dominant_r2 = 0.0;

  double eval(double x) const noexcept { return spikes.eval(x) + smooth.eval(x); }
  double cumulative(double x) const { return spikes.cumulative(x) + smooth.cumulative(x); }
  double mass() const;
  AtomSum as_atom_sum() const;
  // Smallest C with |C_{k,0}| <= C |D_k|^{-1/2} for every recorded k.
  double spike_law_constant() const;
};

DensityModel spike_decomposition(const UnimodalFamily& family, double t, int K,
                                 const GridFunction& ulam_density, const SpikeOptions& opts = {});

// Least-squares slope of log|C_{k,0}| against log|D_k|^{-1/2} for k <= kmax.
double spike_law_slope(const DensityModel& model, int kmax);

// Density model with exact bin integrals on grid: masses[i] = int over cell i.
std::vector<double> bin_masses(const DensityModel& model, const BinGrid& grid);
std::vector<double> bin_masses(const AtomSum& g, const BinGrid& grid);

double marchaud_of_density(const DensityModel& model, double eta, double x,
                           const QuadratureSpec& spec = {});

// Invariant density of f(x) = 2 - x^2 via the conjugacy x = 2 cos(theta).
double chebyshev_density(double x) noexcept;
double chebyshev_cumulative(double x) noexcept;

// Exact decomposition of the t0 = 2 density: atoms (1/(2 pi)) u^{-1/2} + (1/(16 pi)) u^{1/2}
// at both endpoints (u = distance to the endpoint, width 4) plus the C^1 remainder
// sampled at n cell centres. Exactly even up to rounding.
DensityModel chebyshev_model(const UnimodalFamily& family, std::size_t n);

}  // namespace fracsus

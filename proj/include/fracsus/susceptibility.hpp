#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "fracsus/correlations.hpp"
#include "fracsus/density.hpp"
#include "fracsus/fraccalc.hpp"
#include "fracsus/unimodal.hpp"

namespace fracsus {

enum class SusceptibilityKind { Response, Frozen, Semifreddo };

const char* to_string(SusceptibilityKind k) noexcept;
SusceptibilityKind parse_kind(const std::string& s);

// Finite union of disjoint parameter-offset intervals.
struct OmegaSet {
  std::vector<std::pair<double, double>> intervals;

  static OmegaSet full(const ParameterWindow& w) { return OmegaSet{{{w.t_min, w.t_max}}}; }
  bool empty() const noexcept { return intervals.empty(); }
  // Sorted, disjoint, non-degenerate and inside the window.
  void validate(const ParameterWindow& w) const;
};

// Graded rule for the t-integrals: geometric panels toward t = 0 (and toward
// the density's singular alignments in the pointwise kernel).
struct TGridSpec {
  double ratio = 0.5;
  int levels = 40;
  int panel_order = 16;
  int subpanels = 8;  // Gauss panels per geometric level (semifreddo); error ~ 1/subpanels from kinks
};

struct SusceptibilityRequest {
  SusceptibilityKind kind = SusceptibilityKind::Response;
  double eta = 0.25;
  Observable phi = Observable::cosine(3.0);
  int J = 40;
  OmegaSet omega;  // semifreddo only; empty means no contribution
  TGridSpec tgrid;

  void validate(const ParameterWindow& w) const;
};

// eta / (2 Gamma(1 - eta)).
double marchaud_prefactor(double eta);

enum class KernelRoute { Invariant, Shift, Direct };

// Two-sided Marchaud derivative in t at t = 0 of t -> (L_{t0+clamp(t)} rho)(x).
// Invariant: uses L_{t0} rho = rho, so the integrand is rho(x - tau).
// Shift:     (L_{t0} rho)(x - tau).   Direct: (L_{t0+tau} rho)(x).
double frozen_kernel(const UnimodalFamily& family, const DensityModel& model, double eta, double x,
                     const TGridSpec& tgrid = {}, KernelRoute route = KernelRoute::Direct);

// Closed-form contribution of |t| beyond the window, where the clamped curve is constant:
// (G(t_max) - G(0)) t_max^{-eta}/eta - (G(t_min) - G(0)) |t_min|^{-eta}/eta, without prefactor.
double clamped_tail(double g_at_min, double g_at_zero, double g_at_max, const ParameterWindow& w,
                    double eta);

struct SeriesEvaluation {
  std::complex<double> z;
  std::complex<double> value;
  double tail_bound = 0.0;  // +inf when divergent_bound
  bool divergent_bound = false;
  int J = 0;
};

SeriesEvaluation evaluate_series(const CoefficientSequence& seq, const DecayFit* fit,
                                 std::complex<double> z);

struct RadiusEstimate {
  double radius = 0.0;
  std::string method = "root-test";
  double ratio_test = 0.0;  // diagnostic, median |a_j / a_{j+1}|
  int j_lo = 0;
  int j_hi = 0;
  int points = 0;
};

RadiusEstimate radius_estimate(const CoefficientSequence& seq, int j_lo, int j_hi);
RadiusEstimate radius_estimate(const CoefficientSequence& seq);  // window [5, J-2]

// Owns the Ulam operator, Koopman tables and tabulated kernels for one
// (family, t0, density model). Tables are filled once and then shared.
class SusceptibilityEngine {
 public:
  SusceptibilityEngine(const UnimodalFamily& family, const DensityModel& model,
                       std::shared_ptr<const UlamOperator> ulam, int j_switch = kDefaultJSwitch,
                       QuadratureSpec xspec = {});

  const UlamOperator& ulam() const noexcept { return *ulam_; }
  const DensityModel& model() const noexcept { return model_; }
  const UnimodalFamily& family() const noexcept { return family_; }

  // Cell integrals over the Ulam bins of M^eta[rho] (response source).
  const std::vector<double>& response_masses(double eta);
  // Cell integrals of the frozen kernel, clamped tails included or not.
  const std::vector<double>& frozen_masses(double eta, const TGridSpec& tgrid, bool tails = true);
  // Per-bin change of L_{t0+t} rho against L_{t0} rho (masses).
  std::vector<double> transfer_difference(double t) const;

  const KoopmanTable& koopman(const Observable& phi, int J);

  CoefficientSequence coefficients(const SusceptibilityRequest& req);

 private:
  CoefficientSequence semifreddo(const SusceptibilityRequest& req, const KoopmanTable& table);
  double pushed_cumulative(double tau, double x) const;

  UnimodalFamily family_;
  DensityModel model_;
  std::shared_ptr<const UlamOperator> ulam_;
  int j_switch_;
  QuadratureSpec xspec_;
  std::mutex mutex_;
  std::map<std::string, std::vector<double>> kernels_;
  std::map<std::string, std::shared_ptr<KoopmanTable>> tables_;
};

}  // namespace fracsus

#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "fracsus/correlations.hpp"
#include "fracsus/density.hpp"
#include "fracsus/susceptibility.hpp"
#include "fracsus/unimodal.hpp"

namespace fracsus {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum class Format { Csv, Json };
Format parse_format(const std::string& s);

// Everything a run needs. Every field has a default and is echoed into the
// metadata of each artifact, so a run can be repeated from its outputs.
struct RunConfig {
  struct FamilyBlock {
    std::string kind = "quadratic";  // quadratic | generalized
    std::string t0 = "2";            // decimal string, parsed at 50 digits
    double t_min = -0.05;
    double t_max = 0.05;
    std::vector<double> direction{1.0};  // X(y) coefficients, generalized only
    int K = 20;                          // orbit length for orbit / ce
  } family;
  struct DensityBlock {
    std::size_t N = 4096;
    double tol = 1e-10;
    int iters = 100000;
    int K_spikes = 2;
    std::string model = "ulam";  // ulam | exact (closed form, t0 = 2 only)
  } density;
  QuadratureSpec fraccalc;
  struct SusceptibilityBlock {
    std::string kind = "response";
    std::vector<double> eta{0.25};
    std::string phi = "cos:3";
    int J = 40;
    std::vector<std::pair<double, double>> omega;  // empty means the full window
    std::vector<std::complex<double>> z{{0.5, 0.0}, {1.0, 0.0}};
    TGridSpec tgrid;
    int j_switch = kDefaultJSwitch;
  } susceptibility;
  struct OutputBlock {
    std::string directory = "out";
    std::vector<std::string> formats{"json"};
  } output;

  static RunConfig from_json(const Json& j);  // rejects unknown keys
  static RunConfig load(const std::string& path);
  Json to_json() const;
  void validate() const;
  // FNV-1a over the canonical (sorted-key) dump.
  std::uint64_t hash() const;

  UnimodalFamily make_family() const;
  ParameterWindow window() const { return {family.t_min, family.t_max}; }
};

std::uint64_t fnv1a(const std::string& bytes) noexcept;

// Canonical text: sorted keys, reals with 17 significant digits, no whitespace
// variation. Identical values give identical bytes.
std::string dump_json(const Json& j, int indent = 2);

std::string format_real(double v);

// Metadata section kept apart from data: hash, versions, timestamp.
Json run_metadata(const RunConfig& cfg, const std::string& command);

// -- result documents ---------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const Table& t, const Json* metadata = nullptr);

Json to_json(const CriticalOrbitData& d);
Json to_json(const CEEstimate& e);
Json to_json(const MTCertificate& m);
Json to_json(const DecayFit& f);
Json to_json(const RadiusEstimate& r);
Json to_json(const SeriesEvaluation& e);
Json to_json(const CoefficientSequence& s);
Json to_json(const DensityModel& m);
Json to_json(const UlamOperator& op);  // summary only

Table to_table(const CriticalOrbitData& d);
Table to_table(const CoefficientSequence& s);
Table to_table(const GridFunction& g, const std::string& column);
Table to_table(const DensityModel& m);
Table to_table(const UlamOperator& op);  // always a FormatError

CoefficientSequence sequence_from_json(const Json& j);

// Writes `<dir>/<stem>.json` ({"data", "metadata"}) or `<dir>/<stem>.csv`
// (metadata as leading '#' lines). Returns the path.
std::string write_artifact(const std::string& dir, const std::string& stem, const Json& data,
                           const Json& metadata);
std::string write_artifact(const std::string& dir, const std::string& stem, const Table& data,
                           const Json& metadata);

}  // namespace fracsus

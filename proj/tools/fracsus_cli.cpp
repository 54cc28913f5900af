// fracsus: batch front end. One subcommand per pipeline stage; artifacts go
// to --out as JSON ({"data", "metadata"}) and/or CSV (metadata as '#' lines).
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "fracsus/acceptance.hpp"
#include "fracsus/errors.hpp"
#include "fracsus/io.hpp"

using namespace fracsus;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kQuality = 2 };

struct Overrides {
  std::string config;
  std::optional<std::string> t0;
  std::vector<double> eta;
  std::optional<std::string> kind;
  std::optional<std::string> phi;
  std::optional<int> jmax;
  std::optional<std::size_t> bins;
  std::optional<int> K;
  std::optional<std::string> out;
  std::vector<std::string> formats;
  std::optional<int> threads;
  std::uint64_t seed = 1;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (o.t0) cfg.family.t0 = *o.t0;
  if (!o.eta.empty()) cfg.susceptibility.eta = o.eta;
  if (o.kind) cfg.susceptibility.kind = *o.kind;
  if (o.phi) cfg.susceptibility.phi = *o.phi;
  if (o.jmax) cfg.susceptibility.J = *o.jmax;
  if (o.bins) cfg.density.N = *o.bins;
  if (o.K) cfg.family.K = *o.K;
  if (o.out) cfg.output.directory = *o.out;
  if (!o.formats.empty()) cfg.output.formats = o.formats;
  cfg.validate();
  return cfg;
}

// Everything downstream of the family: Ulam operator, invariant density, model.
struct Pipeline {
  UnimodalFamily family;
  std::shared_ptr<UlamOperator> ulam;
  std::optional<InvariantDensity> density;
  std::optional<DensityModel> model;

  explicit Pipeline(const RunConfig& cfg) : family(cfg.make_family()) {}

  const UlamOperator& op(const RunConfig& cfg) {
    if (!ulam) ulam = std::make_shared<UlamOperator>(build_ulam(family, 0.0, cfg.density.N));
    return *ulam;
  }
  const InvariantDensity& invariant(const RunConfig& cfg) {
    if (!density) density = invariant_density_ulam(op(cfg), cfg.density.iters, cfg.density.tol);
    return *density;
  }
  const DensityModel& density_model(const RunConfig& cfg) {
    if (!model) {
      model = cfg.density.model == "exact"
                  ? chebyshev_model(family, cfg.density.N)
                  : spike_decomposition(family, 0.0, cfg.density.K_spikes, invariant(cfg).density);
    }
    return *model;
  }
};

class Emitter {
 public:
  Emitter(const RunConfig& cfg, const std::string& command) : cfg_(cfg), meta_(run_metadata(cfg, command)) {}

  // Writes every requested format; `table` may be empty for JSON-only results.
  void emit(const std::string& stem, const Json& data, const std::function<Table()>& table) {
    for (const auto& f : cfg_.output.formats) {
      std::string path;
      if (parse_format(f) == Format::Json) {
        path = write_artifact(cfg_.output.directory, stem, data, meta_);
      } else {
        if (!table) throw FormatError(fmt::format("{}: no CSV form, use --format json", stem));
        path = write_artifact(cfg_.output.directory, stem, table(), meta_);
      }
      std::cout << path << '\n';
    }
  }
  Json& metadata() { return meta_; }

 private:
  const RunConfig& cfg_;
  Json meta_;
};

std::string eta_tag(double eta) { return fmt::format("eta={}", eta); }

SusceptibilityEngine make_engine(Pipeline& p, const RunConfig& cfg) {
  const auto& model = p.density_model(cfg);
  p.op(cfg);
  return SusceptibilityEngine(p.family, model, p.ulam, cfg.susceptibility.j_switch, cfg.fraccalc);
}

SusceptibilityRequest make_request(const RunConfig& cfg, double eta) {
  SusceptibilityRequest req;
  req.kind = parse_kind(cfg.susceptibility.kind);
  req.eta = eta;
  req.phi = Observable::parse(cfg.susceptibility.phi);
  req.J = cfg.susceptibility.J;
  req.tgrid = cfg.susceptibility.tgrid;
  req.omega = cfg.susceptibility.omega.empty() ? OmegaSet::full(cfg.window()) : OmegaSet{cfg.susceptibility.omega};
  return req;
}

// -- subcommands ---------------------------------------------------------------

int cmd_orbit(const RunConfig& cfg) {
  const auto fam = cfg.make_family();
  const auto orbit = critical_orbit(fam, 0.0, cfg.family.K);
  Emitter(cfg, "orbit").emit("orbit", to_json(orbit), [&] { return to_table(orbit); });
  return kOk;
}

int cmd_ce(const RunConfig& cfg) {
  const auto fam = cfg.make_family();
  const auto ce = ce_exponent(fam, 0.0, cfg.family.K);
  const auto mt = detect_mt(fam, 0.0, cfg.family.K);
  Json data{{"ce", to_json(ce)}, {"mt", mt ? to_json(*mt) : Json(nullptr)}};
  Emitter(cfg, "ce").emit("ce", data, [&] {
    Table t{{"k", "rate"}, {}};
    for (std::size_t i = 0; i < ce.per_step.size(); ++i) {
      t.rows.push_back({std::to_string(i + 2), format_real(ce.per_step[i])});
    }
    return t;
  });
  return kOk;
}

int cmd_density(const RunConfig& cfg) {
  Pipeline p(cfg);
  const auto& inv = p.invariant(cfg);
  const auto& g = inv.density;
  Json data{{"lo", g.lo()},
            {"hi", g.hi()},
            {"N", g.size()},
            {"iterations", inv.iterations},
            {"residual", inv.residual},
            {"values", g.values()}};
  Emitter(cfg, "density").emit("density", data, [&] { return to_table(g, "rho"); });
  return kOk;
}

int cmd_spikes(const RunConfig& cfg) {
  Pipeline p(cfg);
  const auto& model = p.density_model(cfg);
  Emitter(cfg, "spikes").emit("spikes", to_json(model), [&] { return to_table(model); });
  return kOk;
}

// M^eta of the density model at 200 cell centres of the dynamical interval.
int cmd_marchaud(const RunConfig& cfg) {
  Pipeline p(cfg);
  const auto& model = p.density_model(cfg);
  const double beta = p.family.half_width(0.0);
  const BinGrid grid{-beta, beta, 200};
  Emitter out(cfg, "marchaud");
  for (double eta : cfg.susceptibility.eta) {
    std::vector<double> xs, vs;
    for (std::size_t i = 0; i < grid.n; ++i) {
      xs.push_back(grid.center(i));
      vs.push_back(marchaud_of_density(model, eta, xs.back(), cfg.fraccalc));
    }
    Json data{{"eta", eta}, {"x", xs}, {"value", vs}};
    out.emit("marchaud_" + eta_tag(eta), data, [&] {
      Table t{{"x", "value"}, {}};
      for (std::size_t i = 0; i < xs.size(); ++i) t.rows.push_back({format_real(xs[i]), format_real(vs[i])});
      return t;
    });
  }
  return kOk;
}

int cmd_coeffs(const RunConfig& cfg) {
  Pipeline p(cfg);
  auto eng = make_engine(p, cfg);
  Emitter out(cfg, "coeffs");
  for (double eta : cfg.susceptibility.eta) {
    const auto seq = eng.coefficients(make_request(cfg, eta));
    out.emit(fmt::format("coeffs_{}_{}", cfg.susceptibility.kind, eta_tag(eta)), to_json(seq),
             [&] { return to_table(seq); });
  }
  return kOk;
}

int cmd_susceptibility(const RunConfig& cfg) {
  Pipeline p(cfg);
  auto eng = make_engine(p, cfg);
  Emitter out(cfg, "susceptibility");
  for (double eta : cfg.susceptibility.eta) {
    const auto seq = eng.coefficients(make_request(cfg, eta));
    const auto fit = decay_fit(seq);
    std::vector<SeriesEvaluation> evals;
    Json list = Json::array();
    for (auto z : cfg.susceptibility.z) {
      evals.push_back(evaluate_series(seq, &fit, z));
      list.push_back(to_json(evals.back()));
    }
    Json data{{"coefficients", to_json(seq)}, {"fit", to_json(fit)}, {"evaluations", list}};
    out.emit(fmt::format("susceptibility_{}_{}", cfg.susceptibility.kind, eta_tag(eta)), data, [&] {
      Table t{{"z_re", "z_im", "value_re", "value_im", "tail_bound"}, {}};
      for (const auto& e : evals) {
        t.rows.push_back({format_real(e.z.real()), format_real(e.z.imag()), format_real(e.value.real()),
                          format_real(e.value.imag()), format_real(e.tail_bound)});
      }
      return t;
    });
  }
  return kOk;
}

int cmd_radius(const RunConfig& cfg) {
  Pipeline p(cfg);
  auto eng = make_engine(p, cfg);
  Json list = Json::array();
  Table table{{"eta", "radius", "ratio_test", "theta_hat", "r2"}, {}};
  for (double eta : cfg.susceptibility.eta) {
    const auto seq = eng.coefficients(make_request(cfg, eta));
    const auto fit = decay_fit(seq);
    const auto rad = radius_estimate(seq);
    list.push_back(Json{{"eta", eta}, {"fit", to_json(fit)}, {"radius", to_json(rad)}});
    table.rows.push_back({format_real(eta), format_real(rad.radius), format_real(rad.ratio_test),
                          format_real(fit.theta), format_real(fit.r2)});
  }
  Emitter(cfg, "radius").emit(fmt::format("radius_{}", cfg.susceptibility.kind), Json{{"kind", cfg.susceptibility.kind}, {"estimates", list}},
                              [&] { return table; });
  return kOk;
}

int cmd_report(const RunConfig& cfg, std::uint64_t seed) {
  AcceptanceOptions opts;
  opts.seed = seed;
  bool all = true;
  const auto results = run_acceptance(opts, [&](const CriterionResult& r) {
    std::cout << format_line(r) << std::endl;
    all = all && r.pass();
  });
  Json data = report_data(results);
  Json verdicts = Json::array();
  for (const auto& r : results) verdicts.push_back(Json{{"id", r.id}, {"pass", r.pass()}});
  Emitter out(cfg, "report");
  out.metadata()["timings"] = report_timings(results)["timings"];
  out.metadata()["verdicts"] = verdicts;
  out.metadata()["seed"] = seed;
  out.emit("report", data, {});
  return all ? kOk : kQuality;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fractional susceptibility of unimodal maps"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--t0", o.t0, "base parameter (decimal string, 50 digits kept)");
  app.add_option("--eta", o.eta, "fractional orders, 0 <= eta < 1/2")->delimiter(',');
  app.add_option("--kind", o.kind, "response | frozen | semifreddo");
  app.add_option("--phi", o.phi, "observable, e.g. cos:3, x^2, poly:0,1, ind:0,2");
  app.add_option("--jmax", o.jmax, "largest coefficient index J");
  app.add_option("--bins", o.bins, "Ulam cells N");
  app.add_option("--K", o.K, "orbit length for orbit / ce");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--format", o.formats, "csv | json (repeatable)")->delimiter(',');
  app.add_option("--threads", o.threads, "worker thread bound")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "seed for the randomized oracle checks in report");

  const std::map<std::string, std::string> commands{
      {"orbit", "critical orbit c_k, D_k, sigma_k"},
      {"ce", "Collet-Eckmann rate and MT detection"},
      {"density", "Ulam invariant density"},
      {"spikes", "spike decomposition of the invariant density"},
      {"marchaud", "Marchaud derivative of the density model"},
      {"coeffs", "susceptibility coefficients a_j"},
      {"susceptibility", "series values at the configured z"},
      {"radius", "decay fit and radius of convergence"},
      {"report", "run the acceptance suite"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (o.threads) set_thread_limit(*o.threads);
    const RunConfig cfg = resolve(o);
    if (cmd == "orbit") return cmd_orbit(cfg);
    if (cmd == "ce") return cmd_ce(cfg);
    if (cmd == "density") return cmd_density(cfg);
    if (cmd == "spikes") return cmd_spikes(cfg);
    if (cmd == "marchaud") return cmd_marchaud(cfg);
    if (cmd == "coeffs") return cmd_coeffs(cfg);
    if (cmd == "susceptibility") return cmd_susceptibility(cfg);
    if (cmd == "radius") return cmd_radius(cfg);
    return cmd_report(cfg, o.seed);
  } catch (const ValidationError& e) {
    std::cerr << "fracsus " << cmd << ": invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const FormatError& e) {
    std::cerr << "fracsus " << cmd << ": format: " << e.what() << '\n';
    return kInvalid;
  } catch (const DomainError& e) {
    std::cerr << "fracsus " << cmd << ": outside the domain: " << e.what() << '\n';
    return kInvalid;
  } catch (const MethodError& e) {
    std::cerr << "fracsus " << cmd << ": " << e.what() << '\n';
    return kInvalid;
  } catch (const UnsupportedError& e) {
    std::cerr << "fracsus " << cmd << ": unsupported: " << e.what() << '\n';
    return kInvalid;
  } catch (const Error& e) {
    // Convergence, decomposition quality, singular points, escape, short data.
    std::cerr << "fracsus " << cmd << ": numerical quality: " << e.what() << '\n';
    return kQuality;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "fracsus " << cmd << ": config: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "fracsus " << cmd << ": " << e.what() << '\n';
    return kQuality;
  }
}

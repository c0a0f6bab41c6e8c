// chdbc command line: run, sweep, depcheck, prep-init, print-defaults.
//
// Exit status: 0 success, 1 solver failure, 2 usage or configuration error,
// 3 sweep finished with some failed points.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "chdbc/config.hpp"
#include "chdbc/experiments.hpp"
#include "chdbc/field_io.hpp"
#include "chdbc/initdata.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace chdbc;

namespace {

enum Exit { kOk = 0, kSolver = 1, kConfig = 2, kPartial = 3 };

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

RunConfig resolve(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (o.out) c.out_dir = *o.out;
  if (o.seed) c.initial.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

fs::path out_path(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

json config_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : c.to_map()) j[k] = v;
  return j;
}

// NaN and infinities become null
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2) << '\n';
}

std::ofstream open_csv(const RunConfig& c, const std::string& name, const std::string& columns) {
  std::ofstream out(out_path(c, name));
  for (const auto& line : c.header_lines()) out << line << '\n';
  out << columns << '\n';
  out.precision(17);
  return out;
}

void write_error(const std::string& dir, const std::string& command, const std::string& kind,
                 const std::string& message, json extra = json::object()) {
  json j = {{"status", "error"}, {"command", command}, {"kind", kind}, {"message", message}};
  j.update(extra);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!ec) write_json(fs::path(dir) / "error.json", j);
  std::cerr << "error: " << message << '\n';
}

std::string checkpoint_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u_%06d.field", step);
  return buf;
}

int cmd_run(const RunConfig& c) {
  const SolverConfig sc = c.solver();
  Stepper stepper(sc);
  const StripMesh& mesh = stepper.mesh();
  const auto header = [&] {
    std::vector<std::string> h;
    for (const auto& line : c.header_lines()) h.push_back(line.substr(2));
    return h;
  }();

  auto diag = open_csv(c, "diagnostics.csv",
                       "t,mass,energy,grad_mu,u_V,xi_H,boundary_relation,newton_iterations,residual");
  auto emit = [&](const Diagnostics& d) {
    diag << d.t << ',' << d.mass << ',' << d.energy << ',' << d.grad_mu << ',' << d.u_V << ','
         << d.xi_H << ',' << d.boundary_relation << ',' << d.newton_iterations << ',' << d.residual
         << '\n';
  };

  SimState s = stepper.initial_state(c.initial_field(mesh));
  emit(stepper.diagnose(s, s));
  write_field(out_path(c, checkpoint_name(0)).string(), mesh, s.u, header);
  const int steps = sc.steps();
  for (int n = 1; n <= steps; ++n) {
    SimState next = stepper.step(s);
    emit(stepper.diagnose(next, s));
    s = std::move(next);
    if (n == steps || (c.checkpoint_every > 0 && n % c.checkpoint_every == 0)) {
      write_field(out_path(c, checkpoint_name(n)).string(), mesh, s.u, header);
    }
  }
  write_field(out_path(c, "u_final.field").string(), mesh, s.u, header);
  write_field(out_path(c, "mu_final.field").string(), mesh, s.mu, header);
  return kOk;
}

json records_json(const std::vector<SweepRecord>& recs) {
  json arr = json::array();
  for (const auto& r : recs) {
    json j = {{"delta", r.delta},
              {"err_LinfVstar", num(r.err_LinfVstar)},
              {"err_L2Z", num(r.err_L2Z)},
              {"err_combined", num(r.err_combined)},
              {"runtime", r.runtime},
              {"failed", r.failed}};
    if (r.failed) j["error"] = r.error;
    arr.push_back(j);
  }
  return arr;
}

json fit_json(const std::vector<SweepRecord>& recs) {
  try {
    const RateFit f = fit_rate(recs);
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared},
            {"points", f.points}, {"excluded", f.excluded}};
  } catch (const InsufficientPoints& e) {
    return {{"slope", nullptr}, {"intercept", nullptr}, {"r_squared", nullptr},
            {"fit_error", e.what()}};
  }
}

void write_sweep_csv(const RunConfig& c, const std::string& name, const std::vector<SweepRecord>& recs) {
  auto out = open_csv(c, name, "delta,err_LinfVstar,err_L2Z,err_combined,runtime");
  for (const auto& r : recs) {
    if (r.failed) {
      out << r.delta << ",nan,nan,nan," << r.runtime << '\n';
    } else {
      out << r.delta << ',' << r.err_LinfVstar << ',' << r.err_L2Z << ',' << r.err_combined << ','
          << r.runtime << '\n';
    }
  }
}

int cmd_sweep(const RunConfig& c) {
  const SolverConfig base = c.solver(0.0);
  const CoupledField u0 = c.initial_field(c.mesh.build());
  const SweepOptions opts{c.threads};

  const auto recs = delta_sweep(base, u0, c.deltas, opts);
  write_sweep_csv(c, "sweep.csv", recs);
  json rate = fit_json(recs);
  rate["lambda"] = base.lambda;
  rate["records"] = records_json(recs);
  rate["config"] = config_json(c);

  bool failed = std::any_of(recs.begin(), recs.end(), [](const SweepRecord& r) { return r.failed; });
  if (base.lambda > 0) {
    // same sweep with half the regularization, to expose lambda contamination
    SolverConfig half = base;
    half.lambda = base.lambda / 2;
    const auto recs_half = delta_sweep(half, u0, c.deltas, opts);
    write_sweep_csv(c, "sweep_lambda_half.csv", recs_half);
    json h = fit_json(recs_half);
    h["lambda"] = half.lambda;
    h["records"] = records_json(recs_half);
    rate["lambda_half"] = h;
    failed = failed ||
             std::any_of(recs_half.begin(), recs_half.end(), [](const SweepRecord& r) { return r.failed; });
  }
  write_json(out_path(c, "rate.json"), rate);
  std::cout << "slope " << (rate["slope"].is_null() ? std::string("null") : rate["slope"].dump())
            << '\n';
  return failed ? kPartial : kOk;
}

int cmd_depcheck(const RunConfig& c) {
  const StripMesh mesh = c.mesh.build();
  const CoupledField u0 = c.initial_field(mesh);
  const Source f = c.source(mesh);
  // mean-zero perturbation direction for the source
  const CoupledField bump = generate_unclamped(mesh, {ProfileKind::cosine, 0.0, 1.0});

  json results = json::array();
  json spread = json::object();
  for (double delta : c.dep_deltas) {
    const SolverConfig sc = c.solver(delta);
    double kmin = kInfinity, kmax = 0.0;
    for (double eps : c.dep_epsilons) {
      ProblemData d1{u0, f};
      ProblemData d2{u0, f};
      d2.f.g.push_back({eps * bump, 0.0});
      const DependenceReport rep = continuous_dependence(sc, d1, d2);
      results.push_back({{"delta", delta},
                         {"epsilon", eps},
                         {"solution_diff", rep.solution_diff},
                         {"err_LinfVstar", rep.parts.linf_vstar},
                         {"err_L2Z", rep.parts.l2_z},
                         {"data_diff", rep.data_diff},
                         {"K", rep.ratio}});
      if (rep.data_diff > 0) {
        kmin = std::min(kmin, rep.ratio);
        kmax = std::max(kmax, rep.ratio);
      }
    }
    spread[format_double(delta)] =
        kmax > 0 ? json{{"K_min", kmin}, {"K_max", kmax}, {"K_spread", kmax / kmin}} : json(nullptr);
  }
  write_json(out_path(c, "depcheck.json"),
             {{"results", results}, {"by_delta", spread}, {"config", config_json(c)}});
  return kOk;
}

int cmd_prep_init(const RunConfig& c) {
  if (!(c.prep_delta > 0)) throw ConfigError("prep.delta must be positive");
  const StripMesh mesh = c.mesh.build();
  const CoupledOperator op(mesh);
  const CoupledField u0 = c.initial_field(mesh);
  const PotentialPair p = c.pair();
  const double lambda = p.boundary_graph.single_valued() ? 0.0 : c.effective_lambda();

  std::vector<std::string> header;
  for (const auto& line : c.header_lines()) header.push_back(line.substr(2));
  const PreparedData prepared = prepare_initial_data(mesh, u0, c.prep_delta, p.boundary_graph, lambda);
  write_field(out_path(c, "u0_prepared.field").string(), mesh, prepared.field, header);

  auto table = open_csv(c, "prep_convergence.csv",
                        "delta,h_diff,v_norm,v_norm_bound,boundary_primitive,newton_iterations");
  for (double d : c.prep_deltas) {
    if (!(d > 0)) throw ConfigError("prep.deltas must be positive");
    const PreparedData r = prepare_initial_data(mesh, u0, d, p.boundary_graph, lambda);
    table << d << ',' << norm(op, r.field - u0, NormKind::H) << ',' << r.v_norm << ','
          << r.v_norm_bound << ',' << r.boundary_primitive << ',' << r.newton_iterations << '\n';
  }
  return kOk;
}

template <class F>
int guarded(const std::string& name, const Options& o, F&& body) {
  RunConfig c;
  try {
    c = resolve(o);
  } catch (const ConfigError& e) {
    write_error(o.out.value_or("."), name, "config", e.what());
    return kConfig;
  }
  try {
    return body(c);
  } catch (const ConfigError& e) {
    write_error(c.out_dir, name, "config", e.what());
    return kConfig;
  } catch (const NewtonDivergence& e) {
    write_error(c.out_dir, name, "newton_divergence", e.what(),
                {{"iterations", e.iterations}, {"residual", num(e.last_residual)}});
    return kSolver;
  } catch (const DomainEscape& e) {
    write_error(c.out_dir, name, "domain_escape", e.what());
    return kSolver;
  } catch (const NonzeroMeanError& e) {
    write_error(c.out_dir, name, "mean_mismatch", e.what());
    return kConfig;
  } catch (const std::invalid_argument& e) {
    write_error(c.out_dir, name, "invalid_argument", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    write_error(c.out_dir, name, "solver", e.what());
    return kSolver;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cahn-Hilliard solver with dynamic boundary conditions"};
  app.require_subcommand(1);
  Options opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "configuration file (defaults if omitted)");
    sub->add_option("--out", opts.out, "output directory");
    sub->add_option("--seed", opts.seed, "seed of the initial profile");
    sub->add_option("--threads", opts.threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
  };
  auto* run = app.add_subcommand("run", "single trajectory with diagnostics");
  auto* sweep = app.add_subcommand("sweep", "delta sweep against the delta = 0 reference");
  auto* dep = app.add_subcommand("depcheck", "continuous dependence ratios");
  auto* prep = app.add_subcommand("prep-init", "delta-dependent initial data");
  auto* defaults = app.add_subcommand("print-defaults", "print the default configuration");
  for (auto* s : {run, sweep, dep, prep}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  if (*defaults) {
    std::cout << RunConfig{}.serialize();
    return kOk;
  }
  if (*run) return guarded("run", opts, cmd_run);
  if (*sweep) return guarded("sweep", opts, cmd_sweep);
  if (*dep) return guarded("depcheck", opts, cmd_depcheck);
  return guarded("prep-init", opts, cmd_prep_init);
}

#include "chdbc/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace chdbc {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("'" + key + "': expected a number, got '" + raw + "'");
  }
  return v;
}

long long parse_int(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("'" + key + "': expected an integer, got '" + raw + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + raw + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_double(key, item));
  }
  return out;
}

std::optional<double> parse_auto(const std::string& key, const std::string& raw) {
  if (trim(raw) == "auto") return std::nullopt;
  return parse_double(key, raw);
}

std::string format_auto(const std::optional<double>& v) { return v ? format_double(*v) : "auto"; }

void put_profile(std::map<std::string, std::string>& m, const std::string& sec, const ProfileSpec& p) {
  m[sec + ".kind"] = std::string(to_string(p.kind));
  m[sec + ".mean"] = format_double(p.mean);
  m[sec + ".amplitude"] = format_double(p.amplitude);
  m[sec + ".width"] = format_double(p.width);
  m[sec + ".seed"] = std::to_string(p.seed);
  m[sec + ".margin"] = format_double(p.margin);
  m[sec + ".modes"] = std::to_string(p.modes);
}

bool apply_profile_key(ProfileSpec& p, const std::string& key, const std::string& name,
                       const std::string& v) {
  if (name == "kind") {
    try {
      p.kind = profile_kind_from_string(trim(v));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what());
    }
  } else if (name == "mean") p.mean = parse_double(key, v);
  else if (name == "amplitude") p.amplitude = parse_double(key, v);
  else if (name == "width") p.width = parse_double(key, v);
  else if (name == "seed") p.seed = static_cast<std::uint64_t>(parse_int(key, v));
  else if (name == "margin") p.margin = parse_double(key, v);
  else if (name == "modes") p.modes = static_cast<int>(parse_int(key, v));
  else return false;
  return true;
}

GraphKind parse_graph(const std::string& key, const std::string& v) {
  try {
    return graph_kind_from_string(trim(v));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

MonotoneGraph make_graph(GraphKind k, double c1, double c2, double slope) {
  switch (k) {
    case GraphKind::cubic: return MonotoneGraph::cubic();
    case GraphKind::logarithmic: return MonotoneGraph::logarithmic(c1);
    case GraphKind::obstacle: return MonotoneGraph::obstacle(c2);
    case GraphKind::linear: return MonotoneGraph::linear(slope);
    case GraphKind::zero: return MonotoneGraph::zero();
    case GraphKind::custom: break;
  }
  throw ConfigError("custom graphs cannot be described in a configuration file");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out;
}

PotentialPair RunConfig::pair() const {
  PotentialPair p;
  p.bulk_graph = make_graph(bulk_potential, c1, c2, bulk_slope);
  p.boundary_graph = make_graph(boundary_potential, c1, c2, boundary_slope);
  p.pi_bulk.slope = pi_bulk.value_or(default_pi_slope(p.bulk_graph));
  p.pi_boundary.slope = pi_boundary.value_or(default_pi_slope(p.boundary_graph));
  p.M = M;
  return p;
}

double RunConfig::effective_lambda() const {
  if (lambda) return *lambda;
  const PotentialPair p = pair();
  return (p.bulk_graph.single_valued() && p.boundary_graph.single_valued()) ? 0.0 : 1e-3;
}

Source RunConfig::source(const StripMesh& m) const {
  Source s;
  if (source_g.enabled) s.g.push_back({generate_unclamped(m, source_g.profile), source_g.frequency});
  if (source_h.enabled) s.h.push_back({generate_unclamped(m, source_h.profile), source_h.frequency});
  return s;
}

SolverConfig RunConfig::solver(double delta_value) const {
  SolverConfig c;
  c.mesh = mesh;
  c.pair = pair();
  c.delta = delta_value;
  c.lambda = effective_lambda();
  c.dt = dt;
  c.T = T;
  c.scheme = scheme;
  c.newton_tol = newton_tol;
  c.newton_max_iter = newton_max_iter;
  c.reuse_jacobian = reuse_jacobian;
  c.f = source(mesh.build());
  return c;
}

CoupledField RunConfig::initial_field(const StripMesh& m) const {
  try {
    return generate(m, initial, pair());
  } catch (const InadmissibleProfile& e) {
    throw ConfigError(std::string("initial profile: ") + e.what());
  }
}

void RunConfig::validate() const {
  StripMesh m = [&] {
    try {
      return mesh.build();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("mesh: ") + e.what());
    }
  }();
  const PotentialPair p = pair();
  const PairReport rep = validate_pair(p, 401);
  if (!rep.pass()) {
    throw ConfigError("potential pair violates the domination condition (worst sample r=" +
                      format_double(rep.worst_sample) + ")");
  }
  const double lam = effective_lambda();
  if (lam < 0) throw ConfigError("lambda must be >= 0");
  if (lam == 0 && (!p.bulk_graph.single_valued() || !p.boundary_graph.single_valued())) {
    throw ConfigError("lambda = 0 is not allowed with a multivalued (obstacle) graph");
  }
  try {
    solver().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  const CoupledField u0 = initial_field(m);
  const double mu0 = mean(m, u0);
  if (!p.boundary_graph.domain().interior_contains(mu0)) {
    throw ConfigError("mean of the initial field (" + format_double(mu0) +
                      ") is not in the interior of D(beta_Gamma)");
  }
  if (checkpoint_every < 0 || threads < 1) throw ConfigError("output: bad checkpoint_every or threads");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> m;
  m["mesh.nx"] = std::to_string(mesh.nx);
  m["mesh.ny"] = std::to_string(mesh.ny);
  m["mesh.lx"] = format_double(mesh.lx);
  m["mesh.ly"] = format_double(mesh.ly);
  m["potential.bulk"] = std::string(to_string(bulk_potential));
  m["potential.boundary"] = std::string(to_string(boundary_potential));
  m["potential.c1"] = format_double(c1);
  m["potential.c2"] = format_double(c2);
  m["potential.bulk_slope"] = format_double(bulk_slope);
  m["potential.boundary_slope"] = format_double(boundary_slope);
  m["potential.pi_bulk"] = format_auto(pi_bulk);
  m["potential.pi_boundary"] = format_auto(pi_boundary);
  m["potential.M"] = format_double(M);
  m["solver.delta"] = format_double(delta);
  m["solver.deltas"] = format_list(deltas);
  m["solver.lambda"] = format_auto(lambda);
  m["solver.dt"] = format_double(dt);
  m["solver.T"] = format_double(T);
  m["solver.scheme"] = std::string(to_string(scheme));
  m["solver.newton_tol"] = format_double(newton_tol);
  m["solver.newton_max_iter"] = std::to_string(newton_max_iter);
  m["solver.reuse_jacobian"] = reuse_jacobian ? "true" : "false";
  put_profile(m, "initial", initial);
  for (const auto& [sec, s] : {std::pair{"source_g", &source_g}, std::pair{"source_h", &source_h}}) {
    const std::string name = sec;
    put_profile(m, name, s->profile);
    m[name + ".enabled"] = s->enabled ? "true" : "false";
    m[name + ".frequency"] = format_double(s->frequency);
  }
  m["depcheck.epsilons"] = format_list(dep_epsilons);
  m["depcheck.deltas"] = format_list(dep_deltas);
  m["prep.delta"] = format_double(prep_delta);
  m["prep.deltas"] = format_list(prep_deltas);
  m["output.dir"] = out_dir;
  m["output.checkpoint_every"] = std::to_string(checkpoint_every);
  m["output.threads"] = std::to_string(threads);
  return m;
}

std::string RunConfig::serialize() const {
  pt::ptree tree;
  for (const auto& [key, value] : to_map()) tree.put(key, value);
  std::ostringstream out;
  pt::write_ini(out, tree);
  return out.str();
}

std::vector<std::string> RunConfig::header_lines() const {
  std::vector<std::string> lines;
  for (const auto& [key, value] : to_map()) lines.push_back("# " + key + " = " + value);
  return lines;
}

RunConfig RunConfig::parse(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' outside of a section");
    for (const auto& [name, node] : body) {
      const std::string key = section + "." + name;
      const std::string v = node.get_value<std::string>();
      bool ok = true;
      if (section == "mesh") {
        if (name == "nx") c.mesh.nx = static_cast<int>(parse_int(key, v));
        else if (name == "ny") c.mesh.ny = static_cast<int>(parse_int(key, v));
        else if (name == "lx") c.mesh.lx = parse_double(key, v);
        else if (name == "ly") c.mesh.ly = parse_double(key, v);
        else ok = false;
      } else if (section == "potential") {
        if (name == "bulk") c.bulk_potential = parse_graph(key, v);
        else if (name == "boundary") c.boundary_potential = parse_graph(key, v);
        else if (name == "c1") c.c1 = parse_double(key, v);
        else if (name == "c2") c.c2 = parse_double(key, v);
        else if (name == "bulk_slope") c.bulk_slope = parse_double(key, v);
        else if (name == "boundary_slope") c.boundary_slope = parse_double(key, v);
        else if (name == "pi_bulk") c.pi_bulk = parse_auto(key, v);
        else if (name == "pi_boundary") c.pi_boundary = parse_auto(key, v);
        else if (name == "M") c.M = parse_double(key, v);
        else ok = false;
      } else if (section == "solver") {
        if (name == "delta") c.delta = parse_double(key, v);
        else if (name == "deltas") c.deltas = parse_list(key, v);
        else if (name == "lambda") c.lambda = parse_auto(key, v);
        else if (name == "dt") c.dt = parse_double(key, v);
        else if (name == "T") c.T = parse_double(key, v);
        else if (name == "scheme") {
          try {
            c.scheme = scheme_from_string(trim(v));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(key + ": " + e.what());
          }
        } else if (name == "newton_tol") c.newton_tol = parse_double(key, v);
        else if (name == "newton_max_iter") c.newton_max_iter = static_cast<int>(parse_int(key, v));
        else if (name == "reuse_jacobian") c.reuse_jacobian = parse_bool(key, v);
        else ok = false;
      } else if (section == "initial") {
        ok = apply_profile_key(c.initial, key, name, v);
      } else if (section == "source_g" || section == "source_h") {
        SourceSpec& s = section == "source_g" ? c.source_g : c.source_h;
        if (name == "enabled") s.enabled = parse_bool(key, v);
        else if (name == "frequency") s.frequency = parse_double(key, v);
        else ok = apply_profile_key(s.profile, key, name, v);
      } else if (section == "depcheck") {
        if (name == "epsilons") c.dep_epsilons = parse_list(key, v);
        else if (name == "deltas") c.dep_deltas = parse_list(key, v);
        else ok = false;
      } else if (section == "prep") {
        if (name == "delta") c.prep_delta = parse_double(key, v);
        else if (name == "deltas") c.prep_deltas = parse_list(key, v);
        else ok = false;
      } else if (section == "output") {
        if (name == "dir") c.out_dir = trim(v);
        else if (name == "checkpoint_every") c.checkpoint_every = static_cast<int>(parse_int(key, v));
        else if (name == "threads") c.threads = static_cast<int>(parse_int(key, v));
        else ok = false;
      } else {
        throw ConfigError("unknown section [" + section + "]");
      }
      if (!ok) throw ConfigError("unknown key '" + key + "'");
    }
  }
  return c;
}

RunConfig RunConfig::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  return parse(in);
}

}  // namespace chdbc

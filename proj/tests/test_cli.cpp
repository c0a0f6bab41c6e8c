#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chdbc/config.hpp"
#include "chdbc/field_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace chdbc;

namespace {

using Keys = std::map<std::string, std::string>;

// small mesh, 20 steps; `over` replaces or adds "section.key" entries
std::string small(const Keys& over = {}) {
  Keys k{{"mesh.nx", "16"},
         {"mesh.ny", "17"},
         {"solver.dt", "1e-3"},
         {"solver.T", "0.02"},
         {"solver.deltas", "0.2, 0.1, 0.05, 0.025"},
         {"depcheck.epsilons", "0.01, 0.001"},
         {"depcheck.deltas", "0.1"},
         {"prep.delta", "0.05"},
         {"prep.deltas", "0.1, 0.01"}};
  for (const auto& [key, v] : over) k[key] = v;
  std::string text, section;
  for (const auto& [key, v] : k) {
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      section = key.substr(0, dot);
      text += "[" + section + "]\n";
    }
    text += key.substr(dot + 1) + " = " + v + "\n";
  }
  return text;
}

struct Sandbox {
  fs::path dir;
  Sandbox() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("chdbc_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  fs::path config(const std::string& text, const std::string& name = "c.ini") const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
  fs::path out(const std::string& name = "out") const { return dir / name; }
};

int invoke(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CHDBC_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_cmd(const Sandbox& s, const std::string& sub, const fs::path& cfg, const fs::path& out,
            const std::string& extra = "") {
  return invoke(sub + " --config " + cfg.string() + " --out " + out.string() + " " + extra,
               s.dir / "log.txt");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

struct Csv {
  std::vector<std::string> header;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const {
    std::size_t k = 0;
    while (k < columns.size() && columns[k] != name) ++k;
    REQUIRE(k < columns.size());
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
  }
};

Csv read_csv(const fs::path& p) {
  Csv c;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      c.header.push_back(line);
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (c.columns.empty()) {
      c.columns = cells;
    } else {
      std::vector<double> row;
      for (const auto& v : cells) row.push_back(std::stod(v));
      c.rows.push_back(row);
    }
  }
  return c;
}

}  // namespace

TEST_CASE("print-defaults emits a parseable default configuration") {
  Sandbox s;
  CHECK(invoke("print-defaults", s.dir / "defaults.ini") == 0);
  CHECK(RunConfig::load((s.dir / "defaults.ini").string()) == RunConfig{});
}

TEST_CASE("usage and configuration errors exit with 2") {
  Sandbox s;
  CHECK(invoke("", s.dir / "log.txt") == 2);
  CHECK(invoke("frobnicate", s.dir / "log.txt") == 2);
  CHECK(invoke("run --threads 0", s.dir / "log.txt") == 2);

  CHECK(run_cmd(s, "run", s.dir / "missing.ini", s.out()) == 2);
  const json err = load_json(s.out() / "error.json");
  CHECK(err["status"] == "error");
  CHECK(err["kind"] == "config");
  CHECK(err["command"] == "run");

  const fs::path bad = s.config("[solver]\nbogus = 1\n", "bad.ini");
  CHECK(run_cmd(s, "run", bad, s.out("bad")) == 2);
  CHECK(fs::exists(s.out("bad") / "error.json"));

  const fs::path obstacle = s.config("[potential]\nbulk = obstacle\nboundary = obstacle\n[solver]\nlambda = 0\n",
                                     "obstacle.ini");
  CHECK(run_cmd(s, "run", obstacle, s.out("obstacle")) == 2);
}

TEST_CASE("solver failure exits with 1 and a machine-readable record") {
  Sandbox s;
  const fs::path cfg = s.config(small({{"solver.newton_tol", "1e-300"}, {"solver.newton_max_iter", "2"}}));
  CHECK(run_cmd(s, "run", cfg, s.out()) == 1);
  const json err = load_json(s.out() / "error.json");
  CHECK(err["kind"] == "newton_divergence");
  CHECK(err["iterations"] == 2);
  CHECK(err.contains("residual"));
}

TEST_CASE("run: constant initial data give a constant mass column") {
  Sandbox s;
  const fs::path cfg = s.config(small({{"initial.kind", "constant"}, {"initial.mean", "0.3"}}));
  REQUIRE(run_cmd(s, "run", cfg, s.out()) == 0);
  const Csv d = read_csv(s.out() / "diagnostics.csv");
  const auto mass = d.column("mass");
  REQUIRE(mass.size() == 21);
  for (double m : mass) CHECK(m == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(d.columns == std::vector<std::string>{"t", "mass", "energy", "grad_mu", "u_V", "xi_H",
                                              "boundary_relation", "newton_iterations", "residual"});
}

TEST_CASE("run: outputs carry the resolved configuration and fields round-trip") {
  Sandbox s;
  const fs::path cfg = s.config(small({{"output.checkpoint_every", "5"}}));
  REQUIRE(run_cmd(s, "run", cfg, s.out()) == 0);
  RunConfig resolved = RunConfig::load(cfg.string());
  resolved.out_dir = s.out().string();

  const Csv d = read_csv(s.out() / "diagnostics.csv");
  CHECK(d.header == resolved.header_lines());
  const auto t = d.column("t");
  CHECK(t.front() == 0.0);
  CHECK(t.back() == doctest::Approx(0.02));

  for (const char* name : {"u_000000.field", "u_000005.field", "u_000010.field", "u_000015.field",
                           "u_000020.field", "u_final.field", "mu_final.field"}) {
    CHECK_MESSAGE(fs::exists(s.out() / name), name);
  }
  const FieldFile f = read_field((s.out() / "u_final.field").string());
  CHECK(f.mesh == StripMesh(16, 17, 1.0, 1.0));
  CHECK(f.comments.size() == resolved.header_lines().size());
  CHECK(read_field((s.out() / "u_000020.field").string()).field == f.field);

  std::ostringstream again;
  write_field(again, f.mesh, f.field, f.comments);
  CHECK(again.str() == slurp(s.out() / "u_final.field"));
}

TEST_CASE("run: golden determinism at the default configuration") {
  Sandbox s;
  REQUIRE(invoke("run --seed 7 --out " + s.out("a").string(), s.dir / "a.txt") == 0);
  REQUIRE(invoke("run --seed 7 --out " + s.out("b").string(), s.dir / "b.txt") == 0);
  const std::string a = slurp(s.out("a") / "diagnostics.csv");
  const std::string b = slurp(s.out("b") / "diagnostics.csv");
  const auto strip_dir = [](const std::string& text) {
    std::string out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
      if (line.rfind("# output.dir", 0) != 0) out += line + '\n';
    }
    return out;
  };
  CHECK(read_csv(s.out("a") / "diagnostics.csv").rows.size() == 1001);
  CHECK(strip_dir(a) == strip_dir(b));
  CHECK(slurp(s.out("a") / "u_final.field").size() > 0);
}

TEST_CASE("sweep: one row per delta and a fitted slope") {
  Sandbox s;
  const fs::path cfg = s.config(small());
  REQUIRE(run_cmd(s, "sweep", cfg, s.out(), "--threads 2") == 0);
  const Csv c = read_csv(s.out() / "sweep.csv");
  CHECK(c.columns == std::vector<std::string>{"delta", "err_LinfVstar", "err_L2Z", "err_combined", "runtime"});
  REQUIRE(c.rows.size() == 4);
  CHECK(c.column("delta") == std::vector<double>{0.2, 0.1, 0.05, 0.025});
  CHECK_FALSE(c.header.empty());

  const json rate = load_json(s.out() / "rate.json");
  REQUIRE(rate["slope"].is_number());
  CHECK(rate["slope"].get<double>() > 0);
  CHECK(rate["points"] == 4);
  CHECK(rate["records"].size() == 4);
  CHECK(rate["config"]["solver.deltas"] == "0.2, 0.1, 0.05, 0.025");
  CHECK_FALSE(fs::exists(s.out() / "sweep_lambda_half.csv"));
}

TEST_CASE("sweep: a single delta degenerates to one run against the reference") {
  Sandbox s;
  const fs::path cfg = s.config(small({{"solver.deltas", "0.1"}}), "single.ini");
  REQUIRE(run_cmd(s, "sweep", cfg, s.out()) == 0);
  const Csv c = read_csv(s.out() / "sweep.csv");
  REQUIRE(c.rows.size() == 1);
  CHECK(c.column("err_combined")[0] > 0);
  const json rate = load_json(s.out() / "rate.json");
  CHECK(rate["slope"].is_null());
  CHECK(rate.contains("fit_error"));
}

TEST_CASE("sweep: failed points give exit 3 and nan rows") {
  Sandbox s;
  const fs::path cfg = s.config(
      "[mesh]\nnx = 16\nny = 17\n[solver]\ndt = 1e-3\nT = 0.01\ndeltas = inf, 0.1\n");
  CHECK(run_cmd(s, "sweep", cfg, s.out()) == 3);
  const Csv c = read_csv(s.out() / "sweep.csv");
  REQUIRE(c.rows.size() == 2);
  CHECK(std::isnan(c.rows[0][3]));
  CHECK(c.rows[1][3] > 0);
  const json rate = load_json(s.out() / "rate.json");
  CHECK(rate["records"][0]["failed"] == true);
  CHECK(rate["records"][1]["failed"] == false);
}

TEST_CASE("sweep: multivalued graphs add the half-lambda sweep") {
  Sandbox s;
  const fs::path cfg = s.config(
      "[mesh]\nnx = 16\nny = 17\n[potential]\nbulk = obstacle\nboundary = obstacle\n"
      "[solver]\ndt = 1e-3\nT = 0.01\ndeltas = 0.1, 0.05\n");
  REQUIRE(run_cmd(s, "sweep", cfg, s.out()) == 0);
  CHECK(read_csv(s.out() / "sweep_lambda_half.csv").rows.size() == 2);
  const json rate = load_json(s.out() / "rate.json");
  CHECK(rate["lambda"] == 1e-3);
  CHECK(rate["lambda_half"]["lambda"] == 5e-4);
}

TEST_CASE("depcheck: one ratio per epsilon with the empirical constant") {
  Sandbox s;
  const fs::path cfg = s.config(small());
  REQUIRE(run_cmd(s, "depcheck", cfg, s.out()) == 0);
  const json rep = load_json(s.out() / "depcheck.json");
  REQUIRE(rep["results"].size() == 2);
  for (const auto& r : rep["results"]) {
    CHECK(r.contains("K"));
    CHECK(r["K"].get<double>() > 0);
    CHECK(r["data_diff"].get<double>() > 0);
  }
  CHECK(rep["by_delta"]["0.1"]["K_spread"].get<double>() < 2.0);
  CHECK(rep.contains("config"));
}

TEST_CASE("depcheck: identical data record a zero numerator") {
  Sandbox s;
  const fs::path cfg = s.config(small({{"depcheck.epsilons", "0"}}), "zero.ini");
  REQUIRE(run_cmd(s, "depcheck", cfg, s.out()) == 0);
  const json rep = load_json(s.out() / "depcheck.json");
  REQUIRE(rep["results"].size() == 1);
  CHECK(rep["results"][0]["solution_diff"] == 0.0);
  CHECK(rep["results"][0]["data_diff"] == 0.0);
}

TEST_CASE("prep-init: zero data give a zero field and a convergence table") {
  Sandbox s;
  const fs::path cfg = s.config(small({{"initial.kind", "constant"}, {"initial.mean", "0"}}));
  REQUIRE(run_cmd(s, "prep-init", cfg, s.out()) == 0);
  const FieldFile f = read_field((s.out() / "u0_prepared.field").string());
  for (double v : f.field.bulk) CHECK(v == 0.0);
  for (double v : f.field.boundary) CHECK(v == 0.0);
  std::ostringstream again;
  write_field(again, f.mesh, f.field, f.comments);
  CHECK(again.str() == slurp(s.out() / "u0_prepared.field"));

  const Csv t = read_csv(s.out() / "prep_convergence.csv");
  CHECK(t.rows.size() == 2);
  for (double h : t.column("h_diff")) CHECK(h == 0.0);
}

TEST_CASE("prep-init: the H-difference shrinks along the delta sequence") {
  Sandbox s;
  const fs::path cfg = s.config(small());
  REQUIRE(run_cmd(s, "prep-init", cfg, s.out()) == 0);
  const auto h = read_csv(s.out() / "prep_convergence.csv").column("h_diff");
  REQUIRE(h.size() == 2);
  CHECK(h[1] < h[0]);

  const fs::path bad = s.config(small({{"prep.delta", "0"}}), "bad.ini");
  CHECK(run_cmd(s, "prep-init", bad, s.out("bad")) == 2);
}

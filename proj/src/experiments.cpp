#include "chdbc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <thread>

namespace chdbc {

ErrorNorms trajectory_difference(const CoupledOperator& op, const Trajectory& a,
                                 const Trajectory& b, double dt) {
  if (a.states.size() != b.states.size()) {
    throw SizeMismatch("trajectories have different numbers of time nodes");
  }
  ErrorNorms e;
  double l2 = 0.0;
  const std::size_t n = a.states.size();
  for (std::size_t k = 0; k < n; ++k) {
    const CoupledField diff = a.states[k].u - b.states[k].u;
    e.linf_vstar = std::max(e.linf_vstar, norm(op, diff, NormKind::Vstar));
    if (k + 1 < n) {
      const double z = norm(op, diff, NormKind::Z);
      l2 += dt * z * z;
    }
  }
  e.l2_z = std::sqrt(l2);
  return e;
}

std::vector<SweepRecord> delta_sweep(const SolverConfig& base, const CoupledField& u0,
                                     const std::vector<double>& deltas, const SweepOptions& opts) {
  if (deltas.empty()) throw std::invalid_argument("delta_sweep: empty delta list");
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (!(deltas[k] > 0)) throw std::invalid_argument("delta_sweep: deltas must be positive");
    if (k > 0 && !(deltas[k] < deltas[k - 1])) {
      throw std::invalid_argument("delta_sweep: deltas must be sorted decreasing");
    }
  }
  if (!validate_pair(base.pair, 201).same_growth) {
    throw std::invalid_argument("delta_sweep: the potential pair must satisfy the same-growth condition");
  }

  const RunOptions lean{.keep_auxiliary = false, .compute_diagnostics = false};
  SolverConfig ref_cfg = base;
  ref_cfg.delta = 0.0;
  const Trajectory reference = run(ref_cfg, u0, lean);
  const StripMesh mesh = base.mesh.build();
  const CoupledOperator op(mesh);

  std::vector<SweepRecord> records(deltas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < deltas.size(); k = next++) {
      SweepRecord& rec = records[k];
      rec.delta = deltas[k];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        SolverConfig cfg = base;
        cfg.delta = deltas[k];
        const Trajectory traj = run(cfg, u0, lean);
        const ErrorNorms e = trajectory_difference(op, traj, reference, base.dt);
        rec.err_LinfVstar = e.linf_vstar;
        rec.err_L2Z = e.l2_z;
        rec.err_combined = e.combined();
      } catch (const std::exception& ex) {
        rec.failed = true;
        rec.error = ex.what();
      }
      rec.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const int threads = std::clamp(opts.threads, 1, static_cast<int>(deltas.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return records;
}

RateFit fit_rate(const std::vector<SweepRecord>& records) {
  std::vector<double> xs, ys;
  RateFit fit;
  for (const auto& r : records) {
    if (r.failed) continue;
    if (!(r.err_combined > 0) || !(r.delta > 0)) {
      ++fit.excluded;
      continue;
    }
    xs.push_back(std::log(r.delta));
    ys.push_back(std::log(r.err_combined));
  }
  if (fit.excluded > 0) {
    std::cerr << "warning: fit_rate excluded " << fit.excluded << " zero-error point(s)\n";
  }
  if (xs.size() < 4) {
    throw InsufficientPoints("fit_rate needs at least 4 points with positive error, got " +
                             std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0) throw InsufficientPoints("fit_rate needs distinct deltas");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.points = static_cast<int>(xs.size());
  return fit;
}

DependenceReport continuous_dependence(const SolverConfig& config, const ProblemData& data1,
                                       ProblemData data2) {
  const StripMesh mesh = config.mesh.build();
  const double m1 = mean(mesh, data1.u0);
  const double shift = m1 - mean(mesh, data2.u0);
  for (auto& v : data2.u0.bulk) v += shift;
  for (auto& v : data2.u0.boundary) v += shift;
  if (std::abs(mean(mesh, data2.u0) - m1) > 1e-12) {
    throw std::invalid_argument("continuous_dependence: initial means differ");
  }

  const RunOptions lean{.keep_auxiliary = false, .compute_diagnostics = false};
  SolverConfig c1 = config;
  c1.f = data1.f;
  SolverConfig c2 = config;
  c2.f = data2.f;
  const Trajectory t1 = run(c1, data1.u0, lean);
  const Trajectory t2 = run(c2, data2.u0, lean);
  const CoupledOperator op(mesh);

  DependenceReport rep;
  rep.parts = trajectory_difference(op, t1, t2, config.dt);
  rep.solution_diff = rep.parts.combined();

  double f_sq = 0.0;
  for (int n = 1; n <= config.steps(); ++n) {
    const double t = n * config.dt;
    const double h = norm(op, data1.f.evaluate(mesh, t) - data2.f.evaluate(mesh, t), NormKind::H);
    f_sq += config.dt * h * h;
  }
  rep.data_diff = norm(op, data1.u0 - data2.u0, NormKind::Vstar) + std::sqrt(f_sq);
  rep.ratio = rep.data_diff > 0 ? rep.solution_diff / rep.data_diff : 0.0;
  return rep;
}

DtRefinementReport dt_refinement_check(const SolverConfig& config, const CoupledField& u0,
                                       int levels) {
  if (levels < 2) throw std::invalid_argument("dt_refinement_check needs >= 2 levels");
  DtRefinementReport rep;
  const StripMesh mesh = config.mesh.build();
  const CoupledOperator op(mesh);
  const RunOptions lean{.keep_auxiliary = false, .compute_diagnostics = false};
  double dt = config.dt;
  for (int l = 0; l < levels; ++l, dt *= 0.5) {
    SolverConfig c = config;
    c.dt = dt;
    SolverConfig r = c;
    r.delta = 0.0;
    const Trajectory a = run(c, u0, lean);
    const Trajectory b = run(r, u0, lean);
    rep.dts.push_back(dt);
    rep.errors.push_back(trajectory_difference(op, a, b, dt).combined());
  }
  const double e0 = rep.errors[0];
  const double e1 = rep.errors[1];
  rep.relative_change = e1 > 0 ? std::abs(e1 - e0) / e1 : (e0 > 0 ? kInfinity : 0.0);
  rep.flagged = rep.relative_change > 0.1;
  if (levels >= 3 && e0 != e1) rep.order_ratio = (e1 - rep.errors[2]) / (e0 - e1);
  return rep;
}

}  // namespace chdbc

#pragma once

#include <string>
#include <vector>

#include "chdbc/stepping.hpp"

namespace chdbc {

class InsufficientPoints : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Errors of one delta run against the delta = 0 reference.
struct SweepRecord {
  double delta = 0.0;
  double err_LinfVstar = 0.0;  // max_n ||u^delta(t_n) - u^0(t_n)||_*
  double err_L2Z = 0.0;        // sqrt(sum_{n<N} dt ||u^delta(t_n) - u^0(t_n)||_Z^2)
  double err_combined = 0.0;
  double runtime = 0.0;        // seconds
  bool failed = false;
  std::string error;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
  int excluded = 0;  // zero-error points left out of the fit
};

struct ErrorNorms {
  double linf_vstar = 0.0;
  double l2_z = 0.0;
  double combined() const { return linf_vstar + l2_z; }
};

/// L^inf(V*) and left-endpoint L^2(Z) norms of the difference of two
/// trajectories sampled on the same time grid.
ErrorNorms trajectory_difference(const CoupledOperator& op, const Trajectory& a,
                                 const Trajectory& b, double dt);

struct SweepOptions {
  int threads = 1;
};

/// delta = 0 reference followed by one run per delta with everything else
/// shared. Failed points are flagged without aborting the sweep.
std::vector<SweepRecord> delta_sweep(const SolverConfig& base, const CoupledField& u0,
                                     const std::vector<double>& deltas,
                                     const SweepOptions& opts = {});

/// Least squares on (log delta, log err_combined); zero errors are excluded.
RateFit fit_rate(const std::vector<SweepRecord>& records);

struct ProblemData {
  CoupledField u0;
  Source f;
};

struct DependenceReport {
  double solution_diff = 0.0;  // ||u1 - u2||_{Linf(V*) + L2(Z)}
  double data_diff = 0.0;      // ||u01 - u02||_* + ||f1 - f2||_{L2(H)}
  double ratio = 0.0;          // empirical K; 0 when both differences vanish
  ErrorNorms parts;
};

/// Runs both problems under `config` (its source is ignored) and compares.
/// The second initial field is shifted to the mean of the first; a remaining
/// mismatch above 1e-12 throws std::invalid_argument.
DependenceReport continuous_dependence(const SolverConfig& config, const ProblemData& data1,
                                       ProblemData data2);

struct DtRefinementReport {
  std::vector<double> dts;
  std::vector<double> errors;   // err_combined per dt
  double relative_change = 0.0;  // |e(dt/2) - e(dt)| / e(dt/2)
  double order_ratio = 0.0;      // (e(dt/2) - e(dt/4)) / (e(dt) - e(dt/2)) when 3 levels
  bool flagged = false;          // relative change above 10%
};

/// Repeats one sweep point (config.delta against delta = 0) with dt, dt/2, ...
DtRefinementReport dt_refinement_check(const SolverConfig& config, const CoupledField& u0,
                                       int levels = 2);

}  // namespace chdbc

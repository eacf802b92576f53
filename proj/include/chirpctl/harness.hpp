#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "chirpctl/conditions.hpp"
#include "chirpctl/control.hpp"
#include "chirpctl/model.hpp"
#include "chirpctl/propagator.hpp"
#include "chirpctl/types.hpp"

namespace chirpctl {

// Configuration problems carry the offending field in the message.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One pulse segment as configured (window, shapes, duration).
struct PulseSpec {
  double v0 = 0.0, v1 = 0.0;
  double T = 1.0;
  std::string envelope = "sine";  // "sine" or "tabulated"
  std::string chirp = "linear";   // "linear" or "tabulated"
  std::vector<double> envelope_samples;
  std::vector<double> chirp_samples;

  ChirpedPulse build(double eps1, double eps2) const;
};

struct RunConfig {
  EnsembleSystem system;
  int p = 0, q = 0;           // 0-based internally; 1-based in config files
  int initial_level = 0;      // 0-based internally
  std::vector<PulseSpec> pulses;  // one entry = single pulse; more = chain
  std::vector<RVec> alphas;

  double eps1 = 0.0;
  double eps2 = 0.0;          // 0 -> derive from kappa
  double kappa = 0.0;         // eps2 = eps1^kappa (needs kappa > 1)
  std::vector<double> eps1_list;  // scaling studies

  double delta_choice = 0.5;
  RMat delta_matrix;          // optional per-entry choice (overrides scalar)
  int delta_samples = 0;      // > 0 -> draw this many random choices per alpha
  std::uint64_t seed = 0;

  int steps_per_period = 50;
  int n_samples = 2000;
  int workers = 1;
  std::string out_dir = "out";
  std::string format = "csv";  // "csv", "json", or "both"

  double eps2_for(double e1) const;  // explicit eps2 or e1^kappa
  void validate() const;             // throws config_error naming the field
};

// Outcome of one propagation job.
struct SweepRecord {
  int run_id = 0;
  RVec alpha;
  std::string delta_desc;  // scalar choice or "matrix"
  double eps1 = 0.0, eps2 = 0.0;
  double final_slow_time = 0.0;
  double fid = 0.0;       // final population of the target level
  double distance = 0.0;  // final phase-free distance to the target
  double norm_drift = 0.0;
  bool degraded = false;
  double wall_ms = 0.0;   // in-memory only; never persisted
};

// One stored sample of a fidelity curve.
struct CurveRow {
  int run_id = 0;
  RVec alpha;
  double eps1 = 0.0, eps2 = 0.0;
  double s = 0.0;
  double fid = 0.0;
  double log10_one_minus_fid = 0.0;
  double distance = 0.0;
  double norm_drift = 0.0;
};

struct SweepResult {
  std::vector<SweepRecord> records;  // sorted by run id
  std::vector<CurveRow> curves;      // grouped by run id, in sample order
  ConditionReport conditions;
  bool any_degraded = false;
};

// Staged population curves of a pulse chain.
struct ConcatResult {
  std::vector<double> s;                       // slow-time grid
  std::vector<std::vector<double>> pops;       // [sample][level]
  std::vector<int> segment;                    // segment index per sample
  std::vector<double> breakpoints;             // slow times between segments
  SweepRecord record;                          // final-state summary
};

struct ScalingResult {
  std::vector<SweepRecord> records;  // one per eps1, in list order
  double slope = 0.0;                // d log(distance) / d log(eps1)
  double intercept = 0.0;
  double residual_rms = 0.0;
  bool unreliable = false;           // some run was degraded
};

// One propagation per (alpha, delta draw): per-run fidelity curves plus
// final-state records. The window conditions are checked first and the
// report attached; violating parameters still run. Jobs execute on
// `workers` threads; results are merged in run-id order, so the output is
// identical for any worker count.
SweepResult run_fid_curves(const RunConfig& cfg);

// Populations of every level along the configured pulse chain.
ConcatResult run_concat(const RunConfig& cfg);

// One run per eps1 in the configured list (eps2 = eps1^kappa unless set
// explicitly), followed by a log-log line fit of final distance against
// eps1. Uses the first configured alpha.
ScalingResult run_scaling(const RunConfig& cfg);

// Serialization. CSV columns are fixed:
//   run_id, alpha_0..alpha_{m-1}, eps1, eps2, s, fid, log10_one_minus_fid,
//   distance, norm_drift
// Records use the same schema with s = final slow time. JSON files mirror
// the same rows. format: "csv", "json", or "both".
void persist(const std::vector<SweepRecord>& records,
             const std::vector<CurveRow>& curves, const std::string& dir,
             const std::string& format);

std::string records_csv(const std::vector<SweepRecord>& records);
std::string curves_csv(const std::vector<CurveRow>& curves);
std::string records_json(const std::vector<SweepRecord>& records);
std::string curves_json(const std::vector<CurveRow>& curves);
std::string conditions_json(const ConditionReport& report);

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text);  // same, from memory
void save_config(const RunConfig& cfg, const std::string& path);
std::string config_json(const RunConfig& cfg);

// log10(1 - fid) clamped at the double-precision floor of 1 - fid.
double log10_one_minus(double fid);

}  // namespace chirpctl

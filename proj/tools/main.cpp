// chirpctl: simulate and verify ensemble control of n-level systems by a
// single chirped pulse.
//
// Subcommands
//   check     window-condition report over the configured parameter box
//   simulate  one propagation, trajectory written as CSV
//   sweep     one run per (alpha, coupling draw); curves + records
//   scaling   one run per eps1; log-log slope of the final distance
//   concat    staged populations along a pulse chain
//   frames    averaging/adiabatic-frame diagnostics per eps pair
//
// Exit codes: 0 success; 2 configuration error; 3 conditions failed under
// check --strict; 4 numeric degradation (norm drift beyond tolerance).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chirpctl/conditions.hpp"
#include "chirpctl/frames.hpp"
#include "chirpctl/harness.hpp"

namespace {

using namespace chirpctl;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_file(const std::string& dir, const std::string& name,
                const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + dir + ": " +
                             ec.message());
  std::string path = dir + "/" + name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

// Flags shared by every subcommand; negative/empty means "keep the config".
struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string format;
  int workers = -1;
  int steps_per_period = -1;
  int n_samples = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Path to the JSON run config")
        ->required();
    cmd->add_option("--out", out_dir, "Output directory (default from config)");
    cmd->add_option("--workers", workers, "Worker thread count");
    cmd->add_option("--steps-per-period", steps_per_period,
                    "Integrator steps per fastest oscillation period");
    cmd->add_option("--samples", n_samples, "Stored samples per trajectory");
    cmd->add_option("--format", format, "Output format: csv, json, or both")
        ->check(CLI::IsMember({"csv", "json", "both"}));
  }

  RunConfig load() const {
    RunConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!format.empty()) cfg.format = format;
    if (workers > 0) cfg.workers = workers;
    if (steps_per_period > 0) cfg.steps_per_period = steps_per_period;
    if (n_samples > 0) cfg.n_samples = n_samples;
    cfg.validate();
    return cfg;
  }
};

ConditionReport merged_conditions(const RunConfig& cfg, bool prop2,
                                  double margin) {
  ConditionReport merged;
  for (const PulseSpec& ps : cfg.pulses) {
    ConditionReport rep =
        prop2 ? check_prop2(cfg.system, cfg.p, cfg.q, ps.v0, ps.v1, margin)
              : check_theorem1(cfg.system, cfg.p, cfg.q, ps.v0, ps.v1,
                               margin);
    if (!rep.holds) merged.holds = false;
    merged.violations.insert(merged.violations.end(), rep.violations.begin(),
                             rep.violations.end());
  }
  return merged;
}

void print_conditions(const ConditionReport& rep) {
  if (rep.holds) {
    std::printf("conditions hold over the configured box\n");
    return;
  }
  std::printf("conditions FAIL: %zu violation(s)\n", rep.violations.size());
  std::printf("  %-14s %-8s %-14s %s\n", "condition", "levels", "gap",
              "witness alpha");
  for (const Violation& v : rep.violations) {
    std::string alpha = "-";
    if (v.alpha.size() > 0) {
      alpha.clear();
      for (int i = 0; i < v.alpha.size(); ++i)
        alpha += (i ? " " : "") + fmt(v.alpha(i));
    }
    std::printf("  %-14s (%d,%d)    %-14s %s\n", v.condition.c_str(),
                v.j + 1, v.k + 1, fmt(v.gap).c_str(), alpha.c_str());
  }
}

int do_check(const CommonFlags& flags, bool strict, bool prop2,
             double margin) {
  RunConfig cfg = flags.load();
  ConditionReport rep = merged_conditions(cfg, prop2, margin);
  print_conditions(rep);
  write_file(cfg.out_dir, "conditions.json", conditions_json(rep));
  std::printf("report written to %s/conditions.json\n", cfg.out_dir.c_str());
  if (!rep.holds && strict) return 3;
  return 0;
}

std::string trajectory_csv(const ConcatResult& res, int q,
                           bool with_segment) {
  size_t n = res.pops.empty() ? 0 : res.pops.front().size();
  std::string out = "s";
  if (with_segment) out += ",segment";
  for (size_t j = 0; j < n; ++j) out += ",pop_" + std::to_string(j + 1);
  out += ",fid,log10_one_minus_fid,distance,norm_drift\n";
  for (size_t i = 0; i < res.s.size(); ++i) {
    out += fmt(res.s[i]);
    if (with_segment) out += "," + std::to_string(res.segment[i]);
    for (size_t j = 0; j < n; ++j) out += "," + fmt(res.pops[i][j]);
    double fid = res.pops[i][q];
    double dist = std::sqrt(std::max(0.0, 2.0 - 2.0 * std::sqrt(fid)));
    out += "," + fmt(fid) + "," + fmt(log10_one_minus(fid)) + "," +
           fmt(dist) + "," + fmt(res.record.norm_drift) + "\n";
  }
  return out;
}

int do_simulate(const CommonFlags& flags) {
  RunConfig cfg = flags.load();
  ConcatResult res = run_concat(cfg);
  write_file(cfg.out_dir, "trajectory.csv",
             trajectory_csv(res, cfg.q, false));
  std::printf("final fid %.6f  distance %.6g  norm drift %.3g\n",
              res.record.fid, res.record.distance, res.record.norm_drift);
  std::printf("trajectory written to %s/trajectory.csv\n",
              cfg.out_dir.c_str());
  if (res.record.degraded) {
    std::fprintf(stderr, "warning: propagation degraded (norm drift)\n");
    return 4;
  }
  return 0;
}

int do_sweep(const CommonFlags& flags) {
  RunConfig cfg = flags.load();
  SweepResult res = run_fid_curves(cfg);
  persist(res.records, res.curves, cfg.out_dir, cfg.format);
  write_file(cfg.out_dir, "conditions.json", conditions_json(res.conditions));
  if (!res.conditions.holds)
    std::printf("note: window conditions fail somewhere on the box "
                "(%zu violations); see conditions.json\n",
                res.conditions.violations.size());
  for (const SweepRecord& r : res.records) {
    std::string alpha;
    for (int i = 0; i < r.alpha.size(); ++i)
      alpha += (i ? " " : "") + fmt(r.alpha(i));
    std::printf("run %d  alpha [%s]  delta %s  fid %.6f  distance %.6g%s\n",
                r.run_id, alpha.c_str(), r.delta_desc.c_str(), r.fid,
                r.distance, r.degraded ? "  DEGRADED" : "");
  }
  std::printf("results written to %s\n", cfg.out_dir.c_str());
  return res.any_degraded ? 4 : 0;
}

int do_scaling(const CommonFlags& flags) {
  RunConfig cfg = flags.load();
  ScalingResult res = run_scaling(cfg);
  bool csv = cfg.format == "csv" || cfg.format == "both";
  if (csv) write_file(cfg.out_dir, "records.csv", records_csv(res.records));
  nlohmann::json j;
  j["slope"] = res.slope;
  j["intercept"] = res.intercept;
  j["residual_rms"] = res.residual_rms;
  j["unreliable"] = res.unreliable;
  j["records"] = nlohmann::json::parse(records_json(res.records));
  write_file(cfg.out_dir, "scaling.json", j.dump(2) + "\n");
  for (const SweepRecord& r : res.records)
    std::printf("eps1 %-12s eps2 %-12s distance %.6g%s\n", fmt(r.eps1).c_str(),
                fmt(r.eps2).c_str(), r.distance,
                r.degraded ? "  DEGRADED" : "");
  std::printf("log-log slope %.4f (residual rms %.3g)\n", res.slope,
              res.residual_rms);
  std::printf("results written to %s\n", cfg.out_dir.c_str());
  return res.unreliable ? 4 : 0;
}

int do_concat(const CommonFlags& flags) {
  RunConfig cfg = flags.load();
  ConcatResult res = run_concat(cfg);
  write_file(cfg.out_dir, "populations.csv",
             trajectory_csv(res, cfg.q, true));
  std::string bps;
  for (double b : res.breakpoints) bps += (bps.empty() ? "" : ", ") + fmt(b);
  std::printf("segments: %zu  breakpoints at s = [%s]\n",
              res.breakpoints.size() + 1, bps.c_str());
  std::printf("final fid %.6f  distance %.6g\n", res.record.fid,
              res.record.distance);
  std::printf("populations written to %s/populations.csv\n",
              cfg.out_dir.c_str());
  return res.record.degraded ? 4 : 0;
}

std::string lemmas_csv(const std::vector<LemmaRow>& rows) {
  std::string out =
      "eps1,eps2,int_abs_dtheta,sup_abs_dtheta,margin_curvature,margin_rate,"
      "margin_slope,sup_bulk,sup_pair,sup_row_p,sup_row_q,truncation_gap,"
      "chain_gap\n";
  for (const LemmaRow& r : rows) {
    out += fmt(r.eps1) + "," + fmt(r.eps2) + "," + fmt(r.int_abs_dtheta) +
           "," + fmt(r.sup_abs_dtheta) + "," + fmt(r.margin_curvature) + "," +
           fmt(r.margin_rate) + "," + fmt(r.margin_slope);
    for (double s : r.residual_sups) out += "," + fmt(s);
    out += ",";
    if (r.truncation_gap) out += fmt(*r.truncation_gap);
    out += ",";
    if (r.chain_gap) out += fmt(*r.chain_gap);
    out += "\n";
  }
  return out;
}

int do_frames(const CommonFlags& flags, bool dynamics, int grid_points) {
  RunConfig cfg = flags.load();
  SampledSystem sys = sample_system(
      cfg.system, cfg.alphas.front(),
      cfg.delta_matrix.size() != 0
          ? cfg.delta_matrix
          : RMat::Constant(cfg.system.n(), cfg.system.n(), cfg.delta_choice));

  std::vector<std::pair<double, double>> eps_pairs;
  if (!cfg.eps1_list.empty()) {
    for (double e1 : cfg.eps1_list) eps_pairs.push_back({e1, cfg.eps2_for(e1)});
  } else {
    eps_pairs.push_back({cfg.eps1, cfg.eps2_for(cfg.eps1)});
  }

  LemmaOptions opts;
  if (grid_points > 0) opts.grid_points = grid_points;
  opts.dynamics = dynamics;
  if (flags.steps_per_period > 0) {
    opts.steps_per_period = flags.steps_per_period;
    opts.dynamics_steps_per_period = flags.steps_per_period;
  }

  ChirpedPulse proto = cfg.pulses.front().build(1.0, 1.0);
  std::vector<LemmaRow> rows =
      verify_lemmas(sys, cfg.p, cfg.q, proto, eps_pairs, opts);

  std::printf("%-10s %-10s %-12s %-12s %-12s %-12s %-12s\n", "eps1", "eps2",
              "int|dtheta|", "sup|dtheta|", "margin1", "margin2", "margin3");
  for (const LemmaRow& r : rows) {
    std::printf("%-10s %-10s %-12.6g %-12.6g %-12.6g %-12.6g %-12.6g\n",
                fmt(r.eps1).c_str(), fmt(r.eps2).c_str(), r.int_abs_dtheta,
                r.sup_abs_dtheta, r.margin_curvature, r.margin_rate,
                r.margin_slope);
    std::printf("    remainder sups: bulk %.6g  pair %.6g  row_p %.6g  "
                "row_q %.6g\n",
                r.residual_sups[0], r.residual_sups[1], r.residual_sups[2],
                r.residual_sups[3]);
    if (r.truncation_gap)
      std::printf("    truncation gap %.6g  chain gap %.6g\n",
                  *r.truncation_gap, r.chain_gap ? *r.chain_gap : 0.0);
  }
  write_file(cfg.out_dir, "lemmas.csv", lemmas_csv(rows));
  std::printf("diagnostics written to %s/lemmas.csv\n", cfg.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "chirpctl: ensemble control of n-level systems by one chirped pulse"};
  app.require_subcommand(1);

  CommonFlags check_flags, sim_flags, sweep_flags, scaling_flags,
      concat_flags, frames_flags;
  bool strict = false, prop2 = false, dynamics = false;
  double margin = 0.0;
  int grid_points = -1;

  CLI::App* check = app.add_subcommand(
      "check", "Verify the frequency-window conditions over the box");
  check_flags.attach(check);
  check->add_flag("--strict", strict, "Exit 3 when the conditions fail");
  check->add_flag("--prop2", prop2,
                  "Also require every gap to avoid the doubled window");
  check->add_option("--margin", margin,
                    "Safety margin added to the window checks");

  CLI::App* simulate =
      app.add_subcommand("simulate", "Propagate one run and store it");
  sim_flags.attach(simulate);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "One run per (alpha, coupling draw); curves and records");
  sweep_flags.attach(sweep);

  CLI::App* scaling = app.add_subcommand(
      "scaling", "Distance vs eps1 with a fitted log-log slope");
  scaling_flags.attach(scaling);

  CLI::App* concat_cmd = app.add_subcommand(
      "concat", "Populations along a concatenated pulse chain");
  concat_flags.attach(concat_cmd);

  CLI::App* frames = app.add_subcommand(
      "frames", "Averaging and adiabatic-frame diagnostics per eps pair");
  frames_flags.attach(frames);
  frames->add_flag("--dynamics", dynamics,
                   "Also compare the truncated flow to the exact one");
  frames->add_option("--grid", grid_points,
                     "Margin/sup evaluation grid points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (check->parsed()) return do_check(check_flags, strict, prop2, margin);
    if (simulate->parsed()) return do_simulate(sim_flags);
    if (sweep->parsed()) return do_sweep(sweep_flags);
    if (scaling->parsed()) return do_scaling(scaling_flags);
    if (concat_cmd->parsed()) return do_concat(concat_flags);
    if (frames->parsed()) return do_frames(frames_flags, dynamics, grid_points);
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

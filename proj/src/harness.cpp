#include "chirpctl/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace chirpctl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw config_error(msg); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

const json& need(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(std::string("missing field \"") + key + "\"");
  return *it;
}

double as_number(const json& j, const std::string& what) {
  if (!j.is_number()) fail(what + " must be a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& what) {
  if (!j.is_number_integer()) fail(what + " must be an integer");
  return j.get<int>();
}

std::string as_string(const json& j, const std::string& what) {
  if (!j.is_string()) fail(what + " must be a string");
  return j.get<std::string>();
}

std::vector<double> as_number_list(const json& j, const std::string& what) {
  if (!j.is_array()) fail(what + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(as_number(item, what + " entry"));
  return out;
}

Interval as_interval(const json& j, const std::string& what) {
  if (j.is_number()) {
    double v = j.get<double>();
    return Interval{v, v};
  }
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return Interval{j[0].get<double>(), j[1].get<double>()};
  fail(what + " must be a number or a [lo, hi] pair");
}

EnsembleSystem parse_system(const json& js) {
  EnsembleSystem sys;
  const json& box = need(js, "box");
  if (!box.is_array() || box.empty())
    fail("system.box must be a non-empty array of [lo, hi] pairs");
  for (size_t a = 0; a < box.size(); ++a)
    sys.box.axes.push_back(
        as_interval(box[a], "system.box[" + std::to_string(a) + "]"));
  int dim = static_cast<int>(sys.box.axes.size());

  const json& levels = need(js, "levels");
  if (!levels.is_array() || levels.size() < 2)
    fail("system.levels must be an array of at least two entries");
  for (size_t l = 0; l < levels.size(); ++l) {
    std::string what = "system.levels[" + std::to_string(l) + "]";
    AffineLevel lev;
    lev.slope = RVec::Zero(dim);
    const json& item = levels[l];
    if (item.is_number()) {
      lev.offset = item.get<double>();
    } else if (item.is_object()) {
      lev.offset = as_number(need(item, "offset"), what + ".offset");
      if (item.contains("slope")) {
        std::vector<double> s = as_number_list(item["slope"], what + ".slope");
        if (static_cast<int>(s.size()) != dim)
          fail(what + ".slope length must match the box dimension");
        for (int a = 0; a < dim; ++a) lev.slope(a) = s[a];
      }
    } else {
      fail(what + " must be a number or an {offset, slope} object");
    }
    sys.levels.push_back(lev);
  }

  const json& coupling = need(js, "coupling");
  if (!coupling.is_array()) fail("system.coupling must be an array of rows");
  for (size_t r = 0; r < coupling.size(); ++r) {
    std::string what = "system.coupling[" + std::to_string(r) + "]";
    const json& row = coupling[r];
    if (!row.is_array()) fail(what + " must be an array");
    std::vector<Interval> out;
    for (size_t c = 0; c < row.size(); ++c)
      out.push_back(
          as_interval(row[c], what + "[" + std::to_string(c) + "]"));
    sys.coupling.push_back(std::move(out));
  }
  return sys;
}

json system_json(const EnsembleSystem& sys) {
  json js;
  js["levels"] = json::array();
  for (const AffineLevel& lev : sys.levels) {
    json jl;
    jl["offset"] = lev.offset;
    jl["slope"] = std::vector<double>(lev.slope.data(),
                                      lev.slope.data() + lev.slope.size());
    js["levels"].push_back(jl);
  }
  js["coupling"] = json::array();
  for (const auto& row : sys.coupling) {
    json jr = json::array();
    for (const Interval& iv : row) {
      if (iv.lo == iv.hi)
        jr.push_back(iv.lo);
      else
        jr.push_back(json::array({iv.lo, iv.hi}));
    }
    js["coupling"].push_back(jr);
  }
  js["box"] = json::array();
  for (const Interval& ax : sys.box.axes)
    js["box"].push_back(json::array({ax.lo, ax.hi}));
  return js;
}

PulseSpec parse_pulse(const json& jp, const std::string& what) {
  if (!jp.is_object()) fail(what + " must be an object");
  PulseSpec ps;
  ps.v0 = as_number(need(jp, "v0"), what + ".v0");
  ps.v1 = as_number(need(jp, "v1"), what + ".v1");
  if (jp.contains("T")) ps.T = as_number(jp["T"], what + ".T");
  if (jp.contains("envelope"))
    ps.envelope = as_string(jp["envelope"], what + ".envelope");
  if (jp.contains("chirp")) ps.chirp = as_string(jp["chirp"], what + ".chirp");
  if (jp.contains("envelope_samples"))
    ps.envelope_samples =
        as_number_list(jp["envelope_samples"], what + ".envelope_samples");
  if (jp.contains("chirp_samples"))
    ps.chirp_samples =
        as_number_list(jp["chirp_samples"], what + ".chirp_samples");
  return ps;
}

json pulse_json(const PulseSpec& ps) {
  json jp;
  jp["v0"] = ps.v0;
  jp["v1"] = ps.v1;
  jp["T"] = ps.T;
  jp["envelope"] = ps.envelope;
  jp["chirp"] = ps.chirp;
  if (!ps.envelope_samples.empty())
    jp["envelope_samples"] = ps.envelope_samples;
  if (!ps.chirp_samples.empty()) jp["chirp_samples"] = ps.chirp_samples;
  return jp;
}

// Everything a propagation job needs, fixed before any thread starts.
struct Job {
  RVec alpha;
  RMat delta;
  std::string delta_desc;
};

// Claims job indices from a shared counter; the first exception wins and
// is rethrown on the caller's thread after the pool drains.
void run_jobs(int count, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto loop = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int nthreads = std::min(workers, count);
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(loop);
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// The job list is built serially so the random coupling draws depend only
// on (seed, job order), never on the worker schedule.
std::vector<Job> enumerate_jobs(const RunConfig& cfg) {
  int n = cfg.system.n();
  std::vector<Job> jobs;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const RVec& alpha : cfg.alphas) {
    if (cfg.delta_samples > 0) {
      for (int d = 0; d < cfg.delta_samples; ++d) {
        RMat delta(n, n);
        for (int j = 0; j < n; ++j)
          for (int k = j; k < n; ++k) {
            delta(j, k) = unit(rng);
            delta(k, j) = delta(j, k);
          }
        jobs.push_back({alpha, delta, "draw-" + std::to_string(d)});
      }
    } else if (cfg.delta_matrix.size() != 0) {
      jobs.push_back({alpha, cfg.delta_matrix, "matrix"});
    } else {
      jobs.push_back({alpha, RMat::Constant(n, n, cfg.delta_choice),
                      fmt(cfg.delta_choice)});
    }
  }
  return jobs;
}

PiecewiseControl build_control(const RunConfig& cfg, double e1, double e2) {
  std::vector<ChirpedPulse> built;
  built.reserve(cfg.pulses.size());
  for (const PulseSpec& ps : cfg.pulses) built.push_back(ps.build(e1, e2));
  return concat(std::move(built));
}

SweepRecord summarize(int run_id, const Job& job, double e1, double e2,
                      const Trajectory& tr, int q, double wall_ms) {
  SweepRecord rec;
  rec.run_id = run_id;
  rec.alpha = job.alpha;
  rec.delta_desc = job.delta_desc;
  rec.eps1 = e1;
  rec.eps2 = e2;
  rec.final_slow_time = tr.slow_times.back();
  rec.fid = std::norm(tr.states.back()(q));
  rec.distance = distance_to_target(tr.states.back(), q);
  rec.norm_drift = tr.max_norm_drift;
  rec.degraded = tr.degraded;
  rec.wall_ms = wall_ms;
  return rec;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

ChirpedPulse PulseSpec::build(double eps1, double eps2) const {
  ChirpedPulse pulse;
  pulse.eps1 = eps1;
  pulse.eps2 = eps2;
  pulse.v0 = v0;
  pulse.v1 = v1;
  pulse.T = T;
  if (envelope == "sine") {
    pulse.envelope = Shape::sine();
  } else if (envelope == "tabulated") {
    pulse.envelope = Shape::tabulated(envelope_samples);
  } else {
    fail("envelope must be \"sine\" or \"tabulated\"");
  }
  if (chirp == "linear") {
    pulse.chirp = Shape::linear(v0, v1);
    pulse.chirp_is_default = true;
  } else if (chirp == "tabulated") {
    pulse.chirp = Shape::tabulated(chirp_samples);
    pulse.chirp_is_default = false;
  } else {
    fail("chirp must be \"linear\" or \"tabulated\"");
  }
  return pulse;
}

double RunConfig::eps2_for(double e1) const {
  if (eps2 > 0.0) return eps2;
  return std::pow(e1, kappa);
}

void RunConfig::validate() const {
  try {
    system.validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("system: ") + e.what());
  }
  int n = system.n();
  if (p < 0 || p >= n) fail("p must name a level between 1 and n");
  if (q <= p || q >= n) fail("q must name a level above p and at most n");
  if (initial_level < 0 || initial_level >= n)
    fail("initial_level must name a level between 1 and n");
  if (pulses.empty()) fail("pulses must hold at least one segment");

  if (eps1_list.empty() && eps1 <= 0.0) fail("eps1 must be positive");
  if (eps1 < 0.0) fail("eps1 must be positive");
  for (double e1 : eps1_list)
    if (e1 <= 0.0) fail("eps1_list entries must be positive");
  if (eps2 < 0.0) fail("eps2 must be positive when given");
  if (eps2 == 0.0 && kappa <= 1.0)
    fail("kappa must exceed 1 when eps2 is derived from the coupling rule");

  double probe1 = eps1 > 0.0 ? eps1 : eps1_list.front();
  double probe2 = eps2_for(probe1);
  for (size_t i = 0; i < pulses.size(); ++i) {
    try {
      pulses[i].build(probe1, probe2).validate();
    } catch (const std::invalid_argument& e) {
      fail("pulses[" + std::to_string(i) + "]: " + e.what());
    }
  }

  if (alphas.empty()) fail("alphas must hold at least one parameter point");
  for (size_t i = 0; i < alphas.size(); ++i) {
    if (alphas[i].size() != system.box.dim())
      fail("alphas[" + std::to_string(i) +
           "] dimension must match the box");
    if (!system.box.contains(alphas[i]))
      fail("alphas[" + std::to_string(i) + "] lies outside the box");
  }

  if (delta_choice < 0.0 || delta_choice > 1.0)
    fail("delta_choice must lie in [0, 1]");
  if (delta_matrix.size() != 0) {
    if (delta_matrix.rows() != n || delta_matrix.cols() != n)
      fail("delta_matrix must be n x n");
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        if (delta_matrix(j, k) != delta_matrix(k, j))
          fail("delta_matrix must be symmetric");
        if (delta_matrix(j, k) < 0.0 || delta_matrix(j, k) > 1.0)
          fail("delta_matrix entries must lie in [0, 1]");
      }
  }
  if (delta_samples < 0) fail("delta_samples must be non-negative");

  if (steps_per_period < 1) fail("steps_per_period must be at least 1");
  if (n_samples < 2) fail("n_samples must be at least 2");
  if (workers < 1) fail("workers must be at least 1");
  if (out_dir.empty()) fail("out_dir must not be empty");
  if (format != "csv" && format != "json" && format != "both")
    fail("format must be \"csv\", \"json\", or \"both\"");
}

SweepResult run_fid_curves(const RunConfig& cfg) {
  cfg.validate();
  SweepResult out;

  // Window conditions over the whole configured box, one pass per pulse
  // segment. Violations are reported, never fatal: runs with failing
  // parameters are exactly the interesting negative controls.
  for (const PulseSpec& ps : cfg.pulses) {
    ConditionReport rep = check_theorem1(cfg.system, cfg.p, cfg.q, ps.v0,
                                         ps.v1);
    if (!rep.holds) out.conditions.holds = false;
    out.conditions.violations.insert(out.conditions.violations.end(),
                                     rep.violations.begin(),
                                     rep.violations.end());
  }

  double e1 = cfg.eps1;
  double e2 = cfg.eps2_for(e1);
  PiecewiseControl ctrl = build_control(cfg, e1, e2);
  std::vector<Job> jobs = enumerate_jobs(cfg);
  int n = cfg.system.n();
  Vec psi0 = Vec::Zero(n);
  psi0(cfg.initial_level) = 1.0;

  out.records.resize(jobs.size());
  std::vector<std::vector<CurveRow>> rows(jobs.size());
  run_jobs(static_cast<int>(jobs.size()), cfg.workers, [&](int i) {
    const Job& job = jobs[i];
    SampledSystem sys = sample_system(cfg.system, job.alpha, job.delta);
    auto t0 = std::chrono::steady_clock::now();
    Trajectory tr =
        propagate(sys, ctrl, psi0, cfg.steps_per_period, cfg.n_samples);
    double wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    std::vector<double> fid = fidelity(tr, cfg.q);
    std::vector<CurveRow>& mine = rows[i];
    mine.reserve(tr.states.size());
    for (size_t s = 0; s < tr.states.size(); ++s) {
      CurveRow row;
      row.run_id = i;
      row.alpha = job.alpha;
      row.eps1 = e1;
      row.eps2 = e2;
      row.s = tr.slow_times[s];
      row.fid = fid[s];
      row.log10_one_minus_fid = log10_one_minus(fid[s]);
      row.distance = distance_to_target(tr.states[s], cfg.q);
      row.norm_drift = tr.max_norm_drift;
      mine.push_back(row);
    }
    out.records[i] = summarize(i, job, e1, e2, tr, cfg.q, wall_ms);
  });

  for (std::vector<CurveRow>& mine : rows)
    out.curves.insert(out.curves.end(), mine.begin(), mine.end());
  for (const SweepRecord& rec : out.records)
    if (rec.degraded) out.any_degraded = true;
  return out;
}

ConcatResult run_concat(const RunConfig& cfg) {
  cfg.validate();
  double e1 = cfg.eps1;
  double e2 = cfg.eps2_for(e1);
  PiecewiseControl ctrl = build_control(cfg, e1, e2);
  int n = cfg.system.n();

  Job job;
  job.alpha = cfg.alphas.front();
  if (cfg.delta_matrix.size() != 0) {
    job.delta = cfg.delta_matrix;
    job.delta_desc = "matrix";
  } else {
    job.delta = RMat::Constant(n, n, cfg.delta_choice);
    job.delta_desc = fmt(cfg.delta_choice);
  }
  SampledSystem sys = sample_system(cfg.system, job.alpha, job.delta);
  Vec psi0 = Vec::Zero(n);
  psi0(cfg.initial_level) = 1.0;

  auto t0 = std::chrono::steady_clock::now();
  Trajectory tr =
      propagate(sys, ctrl, psi0, cfg.steps_per_period, cfg.n_samples);
  double wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();

  ConcatResult out;
  out.s = tr.slow_times;
  out.pops.reserve(tr.states.size());
  for (const Vec& psi : tr.states) {
    std::vector<double> row(n);
    for (int j = 0; j < n; ++j) row[j] = std::norm(psi(j));
    out.pops.push_back(std::move(row));
  }
  // Slow-time segment boundaries: cumulative durations, interior only.
  double acc = 0.0;
  for (size_t i = 0; i + 1 < ctrl.segments.size(); ++i) {
    acc += ctrl.segments[i].T;
    out.breakpoints.push_back(acc);
  }
  out.segment.reserve(out.s.size());
  for (double s : out.s) {
    int seg = 0;
    while (seg < static_cast<int>(out.breakpoints.size()) &&
           s >= out.breakpoints[seg])
      ++seg;
    out.segment.push_back(seg);
  }
  out.record = summarize(0, job, e1, e2, tr, cfg.q, wall_ms);
  return out;
}

ScalingResult run_scaling(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.eps1_list.size() < 2)
    fail("eps1_list must hold at least two values for a scaling fit");
  int n = cfg.system.n();

  Job job;
  job.alpha = cfg.alphas.front();
  if (cfg.delta_matrix.size() != 0) {
    job.delta = cfg.delta_matrix;
    job.delta_desc = "matrix";
  } else {
    job.delta = RMat::Constant(n, n, cfg.delta_choice);
    job.delta_desc = fmt(cfg.delta_choice);
  }
  SampledSystem sys = sample_system(cfg.system, job.alpha, job.delta);
  Vec psi0 = Vec::Zero(n);
  psi0(cfg.initial_level) = 1.0;

  ScalingResult out;
  out.records.resize(cfg.eps1_list.size());
  run_jobs(static_cast<int>(cfg.eps1_list.size()), cfg.workers, [&](int i) {
    double e1 = cfg.eps1_list[i];
    double e2 = cfg.eps2_for(e1);
    PiecewiseControl ctrl = build_control(cfg, e1, e2);
    auto t0 = std::chrono::steady_clock::now();
    Trajectory tr =
        propagate(sys, ctrl, psi0, cfg.steps_per_period, cfg.n_samples);
    double wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    out.records[i] = summarize(i, job, e1, e2, tr, cfg.q, wall_ms);
  });

  std::vector<double> x, y;
  for (const SweepRecord& rec : out.records) {
    if (rec.degraded) out.unreliable = true;
    x.push_back(std::log10(rec.eps1));
    y.push_back(std::log10(std::max(rec.distance, 1e-300)));
  }
  LineFit fit = fit_line(x, y);
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.residual_rms = fit.residual_rms;
  return out;
}

double log10_one_minus(double fid) {
  double d = 1.0 - fid;
  const double floor_gap = std::numeric_limits<double>::epsilon() / 2.0;
  if (!(d > floor_gap)) d = floor_gap;
  return std::log10(d);
}

std::string records_csv(const std::vector<SweepRecord>& records) {
  int m = records.empty() ? 0 : static_cast<int>(records.front().alpha.size());
  std::string out = "run_id";
  for (int i = 0; i < m; ++i) out += ",alpha_" + std::to_string(i);
  out += ",eps1,eps2,s,fid,log10_one_minus_fid,distance,norm_drift\n";
  for (const SweepRecord& r : records) {
    out += std::to_string(r.run_id);
    for (int i = 0; i < m; ++i) out += "," + fmt(r.alpha(i));
    out += "," + fmt(r.eps1) + "," + fmt(r.eps2) + "," +
           fmt(r.final_slow_time) + "," + fmt(r.fid) + "," +
           fmt(log10_one_minus(r.fid)) + "," + fmt(r.distance) + "," +
           fmt(r.norm_drift) + "\n";
  }
  return out;
}

std::string curves_csv(const std::vector<CurveRow>& curves) {
  int m = curves.empty() ? 0 : static_cast<int>(curves.front().alpha.size());
  std::string out = "run_id";
  for (int i = 0; i < m; ++i) out += ",alpha_" + std::to_string(i);
  out += ",eps1,eps2,s,fid,log10_one_minus_fid,distance,norm_drift\n";
  for (const CurveRow& r : curves) {
    out += std::to_string(r.run_id);
    for (int i = 0; i < m; ++i) out += "," + fmt(r.alpha(i));
    out += "," + fmt(r.eps1) + "," + fmt(r.eps2) + "," + fmt(r.s) + "," +
           fmt(r.fid) + "," + fmt(r.log10_one_minus_fid) + "," +
           fmt(r.distance) + "," + fmt(r.norm_drift) + "\n";
  }
  return out;
}

std::string records_json(const std::vector<SweepRecord>& records) {
  json arr = json::array();
  for (const SweepRecord& r : records) {
    json o;
    o["run_id"] = r.run_id;
    o["alpha"] = std::vector<double>(r.alpha.data(),
                                     r.alpha.data() + r.alpha.size());
    o["eps1"] = r.eps1;
    o["eps2"] = r.eps2;
    o["s"] = r.final_slow_time;
    o["fid"] = r.fid;
    o["log10_one_minus_fid"] = log10_one_minus(r.fid);
    o["distance"] = r.distance;
    o["norm_drift"] = r.norm_drift;
    arr.push_back(o);
  }
  return arr.dump(2) + "\n";
}

std::string curves_json(const std::vector<CurveRow>& curves) {
  json arr = json::array();
  for (const CurveRow& r : curves) {
    json o;
    o["run_id"] = r.run_id;
    o["alpha"] = std::vector<double>(r.alpha.data(),
                                     r.alpha.data() + r.alpha.size());
    o["eps1"] = r.eps1;
    o["eps2"] = r.eps2;
    o["s"] = r.s;
    o["fid"] = r.fid;
    o["log10_one_minus_fid"] = r.log10_one_minus_fid;
    o["distance"] = r.distance;
    o["norm_drift"] = r.norm_drift;
    arr.push_back(o);
  }
  return arr.dump(2) + "\n";
}

std::string conditions_json(const ConditionReport& report) {
  json o;
  o["holds"] = report.holds;
  json arr = json::array();
  for (const Violation& v : report.violations) {
    json jv;
    jv["j"] = v.j + 1;  // level labels are 1-based in files
    jv["k"] = v.k + 1;
    jv["condition"] = v.condition;
    jv["gap"] = v.gap;
    jv["alpha"] = std::vector<double>(v.alpha.data(),
                                      v.alpha.data() + v.alpha.size());
    arr.push_back(jv);
  }
  o["violations"] = arr;
  return o.dump(2) + "\n";
}

void persist(const std::vector<SweepRecord>& records,
             const std::vector<CurveRow>& curves, const std::string& dir,
             const std::string& format) {
  bool want_csv = format == "csv" || format == "both";
  bool want_json = format == "json" || format == "both";
  if (!want_csv && !want_json)
    fail("format must be \"csv\", \"json\", or \"both\"");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + dir + ": " +
                             ec.message());
  if (want_csv) {
    write_file(dir + "/records.csv", records_csv(records));
    write_file(dir + "/curves.csv", curves_csv(curves));
  }
  if (want_json) {
    write_file(dir + "/records.json", records_json(records));
    write_file(dir + "/curves.json", curves_json(curves));
  }
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) fail("config must be a JSON object");

  RunConfig cfg;
  cfg.system = parse_system(need(j, "system"));
  cfg.p = as_int(need(j, "p"), "p") - 1;
  cfg.q = as_int(need(j, "q"), "q") - 1;
  cfg.initial_level = j.contains("initial_level")
                          ? as_int(j["initial_level"], "initial_level") - 1
                          : cfg.p;

  const json& pulses = need(j, "pulses");
  if (!pulses.is_array() || pulses.empty())
    fail("pulses must be a non-empty array");
  for (size_t i = 0; i < pulses.size(); ++i)
    cfg.pulses.push_back(
        parse_pulse(pulses[i], "pulses[" + std::to_string(i) + "]"));

  const json& alphas = need(j, "alphas");
  if (!alphas.is_array() || alphas.empty())
    fail("alphas must be a non-empty array");
  for (size_t i = 0; i < alphas.size(); ++i) {
    std::string what = "alphas[" + std::to_string(i) + "]";
    std::vector<double> vals;
    if (alphas[i].is_number())
      vals.push_back(alphas[i].get<double>());
    else
      vals = as_number_list(alphas[i], what);
    RVec a(vals.size());
    for (size_t d = 0; d < vals.size(); ++d) a(d) = vals[d];
    cfg.alphas.push_back(a);
  }

  if (j.contains("eps1")) cfg.eps1 = as_number(j["eps1"], "eps1");
  if (j.contains("eps2")) cfg.eps2 = as_number(j["eps2"], "eps2");
  if (j.contains("kappa")) cfg.kappa = as_number(j["kappa"], "kappa");
  if (j.contains("eps1_list"))
    cfg.eps1_list = as_number_list(j["eps1_list"], "eps1_list");

  if (j.contains("delta_choice"))
    cfg.delta_choice = as_number(j["delta_choice"], "delta_choice");
  if (j.contains("delta_matrix")) {
    const json& dm = j["delta_matrix"];
    if (!dm.is_array()) fail("delta_matrix must be an array of rows");
    int n = cfg.system.n();
    cfg.delta_matrix = RMat::Zero(n, n);
    if (static_cast<int>(dm.size()) != n) fail("delta_matrix must be n x n");
    for (int r = 0; r < n; ++r) {
      std::vector<double> row = as_number_list(
          dm[r], "delta_matrix[" + std::to_string(r) + "]");
      if (static_cast<int>(row.size()) != n)
        fail("delta_matrix must be n x n");
      for (int c = 0; c < n; ++c) cfg.delta_matrix(r, c) = row[c];
    }
  }
  if (j.contains("delta_samples"))
    cfg.delta_samples = as_int(j["delta_samples"], "delta_samples");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned())
      fail("seed must be an integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }

  if (j.contains("steps_per_period"))
    cfg.steps_per_period = as_int(j["steps_per_period"], "steps_per_period");
  if (j.contains("n_samples"))
    cfg.n_samples = as_int(j["n_samples"], "n_samples");
  if (j.contains("workers")) cfg.workers = as_int(j["workers"], "workers");
  if (j.contains("out_dir")) cfg.out_dir = as_string(j["out_dir"], "out_dir");
  if (j.contains("format")) cfg.format = as_string(j["format"], "format");

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_json(const RunConfig& cfg) {
  json j;
  j["system"] = system_json(cfg.system);
  j["p"] = cfg.p + 1;
  j["q"] = cfg.q + 1;
  j["initial_level"] = cfg.initial_level + 1;
  j["pulses"] = json::array();
  for (const PulseSpec& ps : cfg.pulses) j["pulses"].push_back(pulse_json(ps));
  j["alphas"] = json::array();
  for (const RVec& a : cfg.alphas)
    j["alphas"].push_back(
        std::vector<double>(a.data(), a.data() + a.size()));
  if (cfg.eps1 > 0.0) j["eps1"] = cfg.eps1;
  if (cfg.eps2 > 0.0) j["eps2"] = cfg.eps2;
  if (cfg.kappa > 0.0) j["kappa"] = cfg.kappa;
  if (!cfg.eps1_list.empty()) j["eps1_list"] = cfg.eps1_list;
  j["delta_choice"] = cfg.delta_choice;
  if (cfg.delta_matrix.size() != 0) {
    json dm = json::array();
    for (int r = 0; r < cfg.delta_matrix.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < cfg.delta_matrix.cols(); ++c)
        row.push_back(cfg.delta_matrix(r, c));
      dm.push_back(row);
    }
    j["delta_matrix"] = dm;
  }
  if (cfg.delta_samples > 0) j["delta_samples"] = cfg.delta_samples;
  j["seed"] = cfg.seed;
  j["steps_per_period"] = cfg.steps_per_period;
  j["n_samples"] = cfg.n_samples;
  j["workers"] = cfg.workers;
  j["out_dir"] = cfg.out_dir;
  j["format"] = cfg.format;
  return j.dump(2) + "\n";
}

void save_config(const RunConfig& cfg, const std::string& path) {
  write_file(path, config_json(cfg));
}

}  // namespace chirpctl
